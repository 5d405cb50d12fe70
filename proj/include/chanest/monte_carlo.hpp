#pragma once

#include <chanest/estimators.hpp>
#include <chanest/parallel.hpp>
#include <chanest/receivers.hpp>
#include <chanest/signal_model.hpp>

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace chanest {

namespace detail {

/// One trial's channel, its raw estimate and the trimmed estimate. Draw order
/// (h, then w_tr[0..B)) matches generate_training_obs.
struct TrainingDraw {
    cplx h;
    cplx raw;
    cplx trimmed;
};

inline cplx stream_estimate(std::span<const cplx> f, const TrainingBlock& tr, cplx h, double noise_power,
                            Substream& rng)
{
    const auto x = tr.symbols();
    cplx acc{};
    for (std::size_t k = 0; k < x.size(); ++k)
        acc += std::conj(f[k]) * (h * x[k] + sample_circular_gaussian(noise_power, rng));
    return acc;
}

inline TrainingDraw draw_training(const Scenario& s, const LinearEstimator& est, Substream& rng)
{
    const cplx h = s.prior().sample(rng);
    const cplx raw = stream_estimate(est.filter(), s.training(), h, s.noise_power(), rng);
    return {h, raw, trim_estimate(raw, est.trim_lambda())};
}

inline void require_trim(const Scenario& s, const LinearEstimator& est, const char* who)
{
    if (est.length() != s.training().length())
        throw std::invalid_argument(std::string(who) + ": filter length does not match training block");
    if (!(est.trim_lambda() > 0.0))
        throw std::invalid_argument(std::string(who) +
                                    ": trim lambda must be > 0; untrimmed 1/|h_hat|^2 has an infinite moment");
}

}  // namespace detail

/// MSE_x of the ZF equalizer driven by the trimmed estimate:
/// E|y/h_hat - x|^2, averaged over h (if random), w_tr, x and w.
inline McResult true_mse_x(const Scenario& s, const LinearEstimator& est, const McConfig& mc)
{
    detail::require_trim(s, est, "true_mse_x");
    const auto& c = s.constellation();
    const double sw2 = s.noise_power();
    return run_trials(mc, [&](Substream& rng) {
        const auto d = detail::draw_training(s, est, rng);
        const cplx x = c[c.sample_index(rng)];
        const cplx y = generate_data_obs(d.h, x, sw2, rng);
        return std::norm(equalize(zf_coefficient(d.trimmed), y) - x);
    });
}

/// Excess MSE E|y/h_hat - y/h_reg|^2 against the clairvoyant ZF equalizer,
/// where h_reg = trim(h, h_regularization_lambda) keeps 1/h bounded.
inline McResult true_mse_xe(const Scenario& s, const LinearEstimator& est, const McConfig& mc)
{
    detail::require_trim(s, est, "true_mse_xe");
    const double h_lambda = mc.h_regularization_lambda.value_or(est.trim_lambda());
    if (s.prior().is_random() && !(h_lambda > 0.0))
        throw std::invalid_argument("true_mse_xe: random channel needs h_regularization_lambda > 0");
    const auto& c = s.constellation();
    const double sw2 = s.noise_power();
    return run_trials(mc, [&](Substream& rng) {
        const auto d = detail::draw_training(s, est, rng);
        const cplx x = c[c.sample_index(rng)];
        const cplx y = generate_data_obs(d.h, x, sw2, rng);
        const cplx h_reg = h_lambda > 0.0 ? trim_estimate(d.h, h_lambda) : d.h;
        return std::norm(equalize(zf_coefficient(d.trimmed), y) - equalize(zf_coefficient(h_reg), y));
    });
}

namespace detail {
inline McResult binomial_result(const McResult& r)
{
    const double p = r.mean;
    return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(r.n)), r.n};
}
}  // namespace detail

/// Symbol error probability of the ML detector using the trimmed estimate.
inline McResult true_pe(const Scenario& s, const LinearEstimator& est, const McConfig& mc)
{
    if (est.length() != s.training().length())
        throw std::invalid_argument("true_pe: filter length does not match training block");
    const auto& c = s.constellation();
    const double sw2 = s.noise_power();
    return detail::binomial_result(run_trials(mc, [&](Substream& rng) {
        const auto d = detail::draw_training(s, est, rng);
        const std::size_t k = c.sample_index(rng);
        const cplx y = generate_data_obs(d.h, c[k], sw2, rng);
        return ml_detect(d.trimmed, y, c).index == k ? 0.0 : 1.0;
    }));
}

/// Symbol error probability with perfect CSI (h_hat = h). Consumes the same
/// draws per trial as true_pe, so both are paired under a common seed.
inline McResult true_pe_perfect_csi(const Scenario& s, const McConfig& mc)
{
    const auto& c = s.constellation();
    const double sw2 = s.noise_power();
    const auto& tr = s.training();
    return detail::binomial_result(run_trials(mc, [&](Substream& rng) {
        const cplx h = s.prior().sample(rng);
        for (std::size_t k = 0; k < tr.length(); ++k)
            (void)sample_circular_gaussian(sw2, rng);
        const std::size_t k = c.sample_index(rng);
        const cplx y = generate_data_obs(h, c[k], sw2, rng);
        return ml_detect(h, y, c).index == k ? 0.0 : 1.0;
    }));
}

// ---------------------------------------------------------------------------
// Approximation-chain checks
// ---------------------------------------------------------------------------

/// Empirical check of |E[X/Y] - E[X]/E[Y]| <= E|X E[Y] - Y E[X]| / lambda^4
/// with X = |h_t - h|^2, Y = |h_t|^2 >= lambda^2 and h_t the trimmed estimate.
struct MomentRatioReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double mean_x = 0.0;
    double mean_y = 0.0;
    double mean_ratio = 0.0;  // E[X/Y]
    bool holds = false;

    /// lhs relative to E[X]/E[Y].
    double relative_gap() const { return mean_x > 0.0 ? lhs / (mean_x / mean_y) : 0.0; }
};

inline MomentRatioReport moment_ratio_check(const Scenario& s, const LinearEstimator& est, const McConfig& mc)
{
    detail::require_trim(s, est, "moment_ratio_check");
    struct Sums {
        double x = 0.0, y = 0.0, ratio = 0.0;
        void merge(const Sums& o)
        {
            x += o.x;
            y += o.y;
            ratio += o.ratio;
        }
    };
    const auto first = reduce_trials<Sums>(mc, [&](std::uint64_t, Substream& rng, Sums& acc) {
        const auto d = detail::draw_training(s, est, rng);
        const double x = std::norm(d.trimmed - d.h);
        const double y = std::norm(d.trimmed);
        acc.x += x;
        acc.y += y;
        acc.ratio += x / y;
    });
    const double n = static_cast<double>(mc.n_trials);
    const double ex = first.x / n;
    const double ey = first.y / n;

    struct AbsSum {
        double v = 0.0;
        void merge(const AbsSum& o) { v += o.v; }
    };
    // Same substreams, so the second pass revisits exactly the same draws.
    const auto second = reduce_trials<AbsSum>(mc, [&](std::uint64_t, Substream& rng, AbsSum& acc) {
        const auto d = detail::draw_training(s, est, rng);
        acc.v += std::abs(std::norm(d.trimmed - d.h) * ey - std::norm(d.trimmed) * ex);
    });

    MomentRatioReport r;
    r.mean_x = ex;
    r.mean_y = ey;
    r.mean_ratio = first.ratio / n;
    r.lhs = std::abs(r.mean_ratio - ex / ey);
    const double l2 = est.trim_lambda() * est.trim_lambda();
    r.rhs = second.v / n / (l2 * l2);
    r.holds = r.lhs <= r.rhs * (1.0 + 1e-9) + 1e-300;
    return r;
}

/// Pr{|f^H y_tr| <= lambda} for each lambda of an ascending grid.
struct TailMassReport {
    std::vector<double> lambdas;
    std::vector<double> probabilities;
    std::vector<double> std_errors;
    std::uint64_t n = 0;
};

inline TailMassReport tail_mass_check(const Scenario& s, const LinearEstimator& est,
                                      std::span<const double> lambda_grid, const McConfig& mc)
{
    if (lambda_grid.empty())
        throw std::invalid_argument("tail_mass_check: empty lambda grid");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
        if (!(lambda_grid[i] > 0.0) || (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])))
            throw std::invalid_argument("tail_mass_check: lambda grid must be positive and ascending");
    }
    if (est.length() != s.training().length())
        throw std::invalid_argument("tail_mass_check: filter length does not match training block");

    struct Counts {
        std::vector<std::uint64_t> c;
        void merge(const Counts& o)
        {
            if (c.size() < o.c.size())
                c.resize(o.c.size(), 0);
            for (std::size_t i = 0; i < o.c.size(); ++i)
                c[i] += o.c[i];
        }
    };
    const std::size_t m = lambda_grid.size();
    const auto counts = reduce_trials<Counts>(mc, [&](std::uint64_t, Substream& rng, Counts& acc) {
        if (acc.c.empty())
            acc.c.assign(m, 0);
        const cplx h = s.prior().sample(rng);
        const double mag = std::abs(detail::stream_estimate(est.filter(), s.training(), h, s.noise_power(), rng));
        for (std::size_t i = 0; i < m; ++i)
            if (mag <= lambda_grid[i])
                ++acc.c[i];
    });

    TailMassReport r;
    r.n = mc.n_trials;
    const double n = static_cast<double>(mc.n_trials);
    for (std::size_t i = 0; i < m; ++i) {
        const double p = i < counts.c.size() ? static_cast<double>(counts.c[i]) / n : 0.0;
        r.lambdas.push_back(lambda_grid[i]);
        r.probabilities.push_back(p);
        r.std_errors.push_back(std::sqrt(p * (1.0 - p) / n));
    }
    return r;
}

/// Least-squares slope of log p against log lambda over entries with p > 0.
inline double loglog_slope(const TailMassReport& r)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int k = 0;
    for (std::size_t i = 0; i < r.lambdas.size(); ++i) {
        if (!(r.probabilities[i] > 0.0))
            continue;
        const double x = std::log(r.lambdas[i]);
        const double y = std::log(r.probabilities[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++k;
    }
    if (k < 2)
        throw std::domain_error("loglog_slope: fewer than two nonzero probabilities");
    return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

}  // namespace chanest
