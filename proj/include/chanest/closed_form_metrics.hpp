#pragma once

#include <chanest/errors.hpp>
#include <chanest/estimators.hpp>
#include <chanest/parallel.hpp>
#include <chanest/signal_model.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>

namespace chanest {

/// Zeroth-order metrics depend on the filter only through phi = f^H x_tr and
/// ||f||^2. h2/h4 are |h|^2, |h|^4 for a known channel or E[|h|^2], E[|h|^4]
/// under a prior; h4 is only read by the random-channel excess MSE.
struct ZerothOrderInputs {
    cplx phi;
    double f_norm2;
    double h2;
    double h4;
    double symbol_power;
    double noise_power;

    void validate() const
    {
        if (!(f_norm2 > 0.0))
            throw std::invalid_argument("ZerothOrderInputs: ||f||^2 must be > 0");
        if (!(h2 > 0.0))
            throw std::invalid_argument("ZerothOrderInputs: h2 must be > 0");
        if (!(h4 >= h2 * h2 * (1.0 - 1e-12)))
            throw std::invalid_argument("ZerothOrderInputs: h4 < h2^2 violates Jensen's inequality");
        if (!(symbol_power > 0.0))
            throw std::invalid_argument("ZerothOrderInputs: symbol power must be > 0");
        if (!(noise_power >= 0.0))
            throw std::invalid_argument("ZerothOrderInputs: noise power must be >= 0");
    }
};

/// Inputs for filter `f` on pilot `x_tr`. When `h4` is omitted the channel is
/// treated as known and h4 = h2^2.
inline ZerothOrderInputs make_zeroth_inputs(std::span<const cplx> f, std::span<const cplx> x_tr, double h2,
                                            double symbol_power, double noise_power, double h4 = -1.0)
{
    ZerothOrderInputs in{inner(f, x_tr), squared_norm(f), h2, h4 < 0.0 ? h2 * h2 : h4, symbol_power, noise_power};
    in.validate();
    return in;
}

inline ZerothOrderInputs make_zeroth_inputs(const LinearEstimator& est, const TrainingBlock& tr, double h2,
                                            double symbol_power, double noise_power, double h4 = -1.0)
{
    return make_zeroth_inputs(est.filter(), tr.symbols(), h2, symbol_power, noise_power, h4);
}

enum class MetricKind { MseX_DC, MseX_RC, MseXe_DC, MseXe_RC, ZerothPe, AvgZerothPe, Pe };

inline std::string_view to_string(MetricKind k)
{
    switch (k) {
    case MetricKind::MseX_DC: return "mse_x_dc";
    case MetricKind::MseX_RC: return "mse_x_rc";
    case MetricKind::MseXe_DC: return "mse_xe_dc";
    case MetricKind::MseXe_RC: return "mse_xe_rc";
    case MetricKind::ZerothPe: return "zeroth_pe";
    case MetricKind::AvgZerothPe: return "avg_zeroth_pe";
    case MetricKind::Pe: return "pe";
    }
    return "?";
}

namespace detail {

/// E|h_hat - h|^2 = h2 |phi - 1|^2 + sigma_w^2 ||f||^2.
inline double estimate_error_power(const ZerothOrderInputs& in)
{
    return in.h2 * std::norm(in.phi - 1.0) + in.noise_power * in.f_norm2;
}

/// E|h_hat|^2 = h2 |phi|^2 + sigma_w^2 ||f||^2.
inline double estimate_power(const ZerothOrderInputs& in)
{
    return in.h2 * std::norm(in.phi) + in.noise_power * in.f_norm2;
}

inline double checked_denominator(double d)
{
    if (!(d > 0.0) || !std::isfinite(d))
        throw std::invalid_argument("zeroth-order metric: denominator must be > 0");
    return d;
}

/// Unchecked symbol-estimate MSE; h2 may be 0 (used inside channel averages).
inline double mse_x_unchecked(const ZerothOrderInputs& in)
{
    return (in.symbol_power * estimate_error_power(in) + in.noise_power) / checked_denominator(estimate_power(in));
}

}  // namespace detail

/// [MSE_x^dc]_0 = (sigma_x^2 E|h_hat - h|^2 + sigma_w^2) / E|h_hat|^2.
inline double zeroth_mse_x_dc(const ZerothOrderInputs& in)
{
    in.validate();
    return detail::mse_x_unchecked(in);
}

/// Random-channel version: identical form with h2 = E[|h|^2].
inline double zeroth_mse_x_rc(const ZerothOrderInputs& in) { return zeroth_mse_x_dc(in); }

/// [MSE_xe^dc]_0 = E|h_hat - h|^2 / E|h_hat|^2 * (sigma_x^2 + sigma_w^2 / |h|^2).
inline double zeroth_mse_xe_dc(const ZerothOrderInputs& in)
{
    in.validate();
    return detail::estimate_error_power(in) / detail::checked_denominator(detail::estimate_power(in)) *
           (in.symbol_power + in.noise_power / in.h2);
}

/// [MSE_xe^rc]_0 with second and fourth channel moments.
inline double zeroth_mse_xe_rc(const ZerothOrderInputs& in)
{
    in.validate();
    const double sw2f = in.noise_power * in.f_norm2;
    const double num = std::norm(in.phi - 1.0) * (in.h4 * in.symbol_power + in.h2 * in.noise_power) +
                       sw2f * (in.h2 * in.symbol_power + in.noise_power);
    const double den = in.h4 * std::norm(in.phi) + sw2f * in.h2;
    return num / detail::checked_denominator(den);
}

namespace detail {

/// D (a x + sigma_w^2 f) - (b x + sigma_w^2 f) N, the shared shape of both
/// gradient numerators (conjugate-Wirtinger derivative of N/D times D^2).
inline CVector quotient_numerator(const ZerothOrderInputs& in, std::span<const cplx> f, std::span<const cplx> x_tr,
                                  double numer)
{
    if (f.size() != x_tr.size())
        throw std::invalid_argument("gradient numerator: f and x_tr lengths differ");
    const double den = estimate_power(in);
    const cplx a = in.h2 * std::conj(in.phi - 1.0);
    const cplx b = in.h2 * std::conj(in.phi);
    CVector g(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
        const cplx dnum = a * x_tr[k] + in.noise_power * f[k];
        const cplx dden = b * x_tr[k] + in.noise_power * f[k];
        g[k] = den * dnum - dden * numer;
    }
    return g;
}

}  // namespace detail

/// Gradient numerator of [MSE_x^dc]_0 / sigma_x^2 with respect to f*:
///   [h2|phi|^2 + sw2||f||^2][h2(phi-1)* x + sw2 f]
///   - [h2 phi* x + sw2 f][sw2/sx2 + h2|phi-1|^2 + sw2||f||^2].
/// Dividing by (h2|phi|^2 + sw2||f||^2)^2 gives the Wirtinger gradient.
inline CVector grad_numerator_mse_x(const ZerothOrderInputs& in, std::span<const cplx> f,
                                    std::span<const cplx> x_tr)
{
    in.validate();
    const double numer = in.noise_power / in.symbol_power + detail::estimate_error_power(in);
    return detail::quotient_numerator(in, f, x_tr, numer);
}

/// Gradient numerator of the excess MSE ratio E|h_hat-h|^2 / E|h_hat|^2; the
/// constant factor (sigma_x^2 + sigma_w^2/h2) is dropped.
inline CVector grad_numerator_mse_xe(const ZerothOrderInputs& in, std::span<const cplx> f,
                                     std::span<const cplx> x_tr)
{
    in.validate();
    return detail::quotient_numerator(in, f, x_tr, detail::estimate_error_power(in));
}

/// f^H x_tr - (1 + sigma_w^2 / (sigma_x^2 h2)); zero for every stationary point.
inline cplx necessary_condition_residual(std::span<const cplx> f, std::span<const cplx> x_tr, double h2,
                                         double symbol_power, double noise_power)
{
    return inner(f, x_tr) - (1.0 + noise_power / (symbol_power * h2));
}

/// [SNR]_0 = sigma_x^2 / [MSE_x^dc]_0.
inline double zeroth_snr(const ZerothOrderInputs& in)
{
    const double mse = zeroth_mse_x_dc(in);
    if (!(mse > 0.0))
        throw std::domain_error("zeroth_snr: zero MSE gives an infinite SNR");
    return in.symbol_power / mse;
}

/// a Q(b sqrt(snr)).
inline double zeroth_pe_from_snr(double snr, double a, double b)
{
    if (!(a > 0.0) || !(b > 0.0))
        throw std::invalid_argument("zeroth_pe: a and b must be > 0");
    if (!(snr >= 0.0))
        throw std::invalid_argument("zeroth_pe: SNR must be >= 0");
    return a * q_function(b * std::sqrt(snr));
}

/// [Pe]_0 = a Q(b sqrt([SNR]_0)).
inline double zeroth_pe(const ZerothOrderInputs& in, double a, double b)
{
    return zeroth_pe_from_snr(zeroth_snr(in), a, b);
}

/// Average of [Pe]_0 over the channel prior, with h2 = |h|^2 per draw. Draw i
/// uses substream (seed, i).
inline McResult avg_zeroth_pe(std::span<const cplx> f, const Scenario& scenario, double a, double b,
                              std::uint64_t n_channel_draws, std::uint64_t seed, unsigned workers = 0)
{
    if (!scenario.prior().is_random())
        throw std::invalid_argument("avg_zeroth_pe: deterministic prior; use zeroth_pe");
    if (!(a > 0.0) || !(b > 0.0))
        throw std::invalid_argument("avg_zeroth_pe: a and b must be > 0");
    const cplx phi = inner(f, scenario.training().symbols());
    const double fn2 = squared_norm(f);
    const double sx2 = scenario.symbol_power();
    const double sw2 = scenario.noise_power();
    McConfig cfg;
    cfg.n_trials = n_channel_draws;
    cfg.seed = seed;
    cfg.workers = workers;
    return run_trials(cfg, [&](Substream& rng) {
        const double h2 = std::norm(scenario.prior().sample(rng));
        const ZerothOrderInputs in{phi, fn2, h2, h2 * h2, sx2, sw2};
        return a * q_function(b * std::sqrt(sx2 / detail::mse_x_unchecked(in)));
    });
}

}  // namespace chanest
