#pragma once

#include <chanest/errors.hpp>
#include <chanest/signal_model.hpp>

#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>

namespace chanest {

struct Decision {
    std::size_t index;
    cplx soft;  // y / h_hat, or 0 when h_hat == 0
};

/// Clairvoyant ZF coefficient 1/h.
inline cplx zf_coefficient(cplx h)
{
    if (h == cplx{})
        throw SingularityError("zf_coefficient: h == 0 (estimate was not trimmed)");
    return 1.0 / h;
}

/// Clairvoyant MMSE coefficient sigma_x^2 h* / (|h|^2 sigma_x^2 + sigma_w^2).
inline cplx mmse_coefficient(cplx h, double symbol_power, double noise_power)
{
    if (!(symbol_power > 0.0))
        throw std::invalid_argument("mmse_coefficient: symbol power must be > 0");
    if (!(noise_power >= 0.0))
        throw std::invalid_argument("mmse_coefficient: noise power must be >= 0");
    const double den = std::norm(h) * symbol_power + noise_power;
    if (den == 0.0)
        return {};
    return symbol_power * std::conj(h) / den;
}

inline cplx equalize(cplx coeff, cplx y) { return coeff * y; }

/// ML decision argmin_k |y - h_hat x_k|^2. Defined for every h_hat, including
/// zero; ties go to the lowest index.
inline Decision ml_detect(cplx h_hat, cplx y, const Constellation& c)
{
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    const auto pts = c.points();
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const double d = std::norm(y - h_hat * pts[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return {best, h_hat == cplx{} ? cplx{} : y / h_hat};
}

/// Same decision via the normalized form argmin_k |y/h_hat - x_k|^2.
/// Used as a cross-check; singular at h_hat == 0.
inline Decision ml_detect_normalized(cplx h_hat, cplx y, const Constellation& c)
{
    const cplx z = equalize(zf_coefficient(h_hat), y);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    const auto pts = c.points();
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const double d = std::norm(z - pts[k]);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return {best, z};
}

}  // namespace chanest
