#pragma once

#include <chanest/signal_model.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

namespace chanest {

/// Inner product a^H b (conjugates the first argument).
inline cplx inner(std::span<const cplx> a, std::span<const cplx> b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("inner: length mismatch");
    cplx acc{};
    for (std::size_t k = 0; k < a.size(); ++k)
        acc += std::conj(a[k]) * b[k];
    return acc;
}

inline double squared_norm(std::span<const cplx> a)
{
    double acc = 0.0;
    for (const auto& v : a)
        acc += std::norm(v);
    return acc;
}

// ---------------------------------------------------------------------------
// Estimator identity
// ---------------------------------------------------------------------------

namespace kind {
struct Mvu {};
struct Mmse {};
/// Metric-optimal filter for a known |h|^2.
struct OptZfDc {
    double h2;
};
/// Metric-optimal filter using the prior's E[|h|^2].
struct OptZfRc {};
/// Metric-optimal filter using the second moment of a noninformative box prior.
struct OptZfUd {
    double second_moment;
    static OptZfUd from_half_width(double w) { return {2.0 * w * w / 3.0}; }
};
/// (1 + alpha) f_MVU.
struct BiasScaled {
    double alpha;
};
}  // namespace kind

using EstimatorKind = std::variant<kind::Mvu, kind::Mmse, kind::OptZfDc, kind::OptZfRc, kind::OptZfUd, kind::BiasScaled>;

inline void validate(const EstimatorKind& k)
{
    if (const auto* dc = std::get_if<kind::OptZfDc>(&k); dc && !(dc->h2 > 0.0))
        throw std::invalid_argument("OptZfDc requires |h|^2 > 0");
    if (const auto* ud = std::get_if<kind::OptZfUd>(&k); ud && !(ud->second_moment > 0.0))
        throw std::invalid_argument("OptZfUd requires a positive second moment");
    if (const auto* b = std::get_if<kind::BiasScaled>(&k); b && !(b->alpha >= 0.0))
        throw std::invalid_argument("BiasScaled requires alpha >= 0");
}

inline std::string label(const EstimatorKind& k)
{
    struct Visitor {
        std::string operator()(kind::Mvu) const { return "mvu"; }
        std::string operator()(kind::Mmse) const { return "mmse"; }
        std::string operator()(kind::OptZfDc) const { return "opt_dc"; }
        std::string operator()(kind::OptZfRc) const { return "opt_rc"; }
        std::string operator()(kind::OptZfUd) const { return "opt_ud"; }
        std::string operator()(kind::BiasScaled b) const
        {
            char buf[64];
            std::snprintf(buf, sizeof buf, "bias_%g", b.alpha);
            return buf;
        }
    };
    return std::visit(Visitor{}, k);
}

// ---------------------------------------------------------------------------
// Linear estimator
// ---------------------------------------------------------------------------

/// h_hat = f^H y_tr, optionally followed by trimming at `trim_lambda`.
class LinearEstimator {
public:
    LinearEstimator(CVector filter, std::string label, double trim_lambda = 0.0)
        : filter_(std::move(filter)), label_(std::move(label)), trim_lambda_(trim_lambda)
    {
        if (!(squared_norm(filter_) > 0.0))
            throw std::invalid_argument("LinearEstimator: zero filter");
        if (!(trim_lambda_ >= 0.0))
            throw std::invalid_argument("LinearEstimator: trim lambda must be >= 0");
    }

    std::span<const cplx> filter() const noexcept { return filter_; }
    std::size_t length() const noexcept { return filter_.size(); }
    const std::string& label() const noexcept { return label_; }
    double trim_lambda() const noexcept { return trim_lambda_; }
    double norm2() const { return squared_norm(filter_); }

    /// phi = f^H x_tr.
    cplx gain(const TrainingBlock& training) const { return inner(filter_, training.symbols()); }

    LinearEstimator with_trim(double lambda) const { return LinearEstimator(filter_, label_, lambda); }

private:
    CVector filter_;
    std::string label_;
    double trim_lambda_;
};

namespace detail {
inline CVector scaled_pilot(const TrainingBlock& training, double scale)
{
    CVector f(training.symbols().begin(), training.symbols().end());
    for (auto& v : f)
        v *= scale;
    return f;
}
}  // namespace detail

/// f_MVU = x_tr / ||x_tr||^2.
inline LinearEstimator mvu_filter(const TrainingBlock& training)
{
    return LinearEstimator(detail::scaled_pilot(training, 1.0 / training.energy()), "mvu");
}

/// f_MMSE = E[|h|^2] x_tr / (E[|h|^2] ||x_tr||^2 + sigma_w^2).
inline LinearEstimator mmse_filter(const TrainingBlock& training, double second_moment, double noise_power)
{
    if (!(second_moment > 0.0) || !(noise_power > 0.0))
        throw std::invalid_argument("mmse_filter: moments must be > 0");
    const double scale = second_moment / (second_moment * training.energy() + noise_power);
    return LinearEstimator(detail::scaled_pilot(training, scale), "mmse");
}

/// (1 + sigma_w^2 / (sigma_x^2 h2)) f_MVU: the collinear solution of the
/// first-order condition f^H x_tr = 1 + sigma_w^2 / (sigma_x^2 h2).
inline LinearEstimator opt_zf_filter(const TrainingBlock& training, double h2, double symbol_power,
                                     double noise_power, std::string label = "opt")
{
    if (!(h2 > 0.0))
        throw std::invalid_argument("opt_zf_filter: h2 must be > 0");
    if (!(symbol_power > 0.0))
        throw std::invalid_argument("opt_zf_filter: symbol power must be > 0");
    if (!(noise_power >= 0.0))
        throw std::invalid_argument("opt_zf_filter: noise power must be >= 0");
    const double alpha = noise_power / (symbol_power * h2);
    return LinearEstimator(detail::scaled_pilot(training, (1.0 + alpha) / training.energy()), std::move(label));
}

/// (1 + alpha) f_MVU.
inline LinearEstimator bias_scaled_filter(const TrainingBlock& training, double alpha)
{
    if (!(alpha >= 0.0))
        throw std::invalid_argument("bias_scaled_filter: alpha must be >= 0");
    return LinearEstimator(detail::scaled_pilot(training, (1.0 + alpha) / training.energy()),
                           label(EstimatorKind{kind::BiasScaled{alpha}}));
}

/// Instantiates `k` for a scenario; the estimator inherits the scenario's trim lambda.
inline LinearEstimator make_estimator(const EstimatorKind& k, const Scenario& s)
{
    validate(k);
    const auto& tr = s.training();
    const double sx2 = s.symbol_power();
    const double sw2 = s.noise_power();
    struct Visitor {
        const TrainingBlock& tr;
        const Scenario& s;
        double sx2, sw2;
        LinearEstimator operator()(kind::Mvu) const { return mvu_filter(tr); }
        LinearEstimator operator()(kind::Mmse) const { return mmse_filter(tr, s.prior().second_moment(), sw2); }
        LinearEstimator operator()(kind::OptZfDc k) const { return opt_zf_filter(tr, k.h2, sx2, sw2, "opt_dc"); }
        LinearEstimator operator()(kind::OptZfRc) const
        {
            return opt_zf_filter(tr, s.prior().second_moment(), sx2, sw2, "opt_rc");
        }
        LinearEstimator operator()(kind::OptZfUd k) const
        {
            return opt_zf_filter(tr, k.second_moment, sx2, sw2, "opt_ud");
        }
        LinearEstimator operator()(kind::BiasScaled k) const { return bias_scaled_filter(tr, k.alpha); }
    };
    return std::visit(Visitor{tr, s, sx2, sw2}, k).with_trim(s.trim_lambda());
}

/// Raw estimate f^H y_tr (no trimming).
inline cplx estimate_channel(const LinearEstimator& est, std::span<const cplx> y_tr)
{
    if (y_tr.size() != est.length())
        throw std::invalid_argument("estimate_channel: length mismatch");
    return inner(est.filter(), y_tr);
}

/// Clamps |h_raw| from below at lambda, keeping the phase. A zero estimate maps
/// to the real value lambda. The boundary |h_raw| = lambda takes the clamped branch.
inline cplx trim_estimate(cplx raw, double lambda)
{
    const double mag = std::abs(raw);
    if (mag > lambda)
        return raw;
    if (mag == 0.0)
        return {lambda, 0.0};
    return raw * (lambda / mag);
}

}  // namespace chanest
