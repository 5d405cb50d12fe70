#pragma once

#include <chanest/rng.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace chanest {

/// Environment variable holding the default worker count.
inline constexpr const char* kThreadsEnv = "CHANEST_THREADS";

struct McConfig {
    std::uint64_t n_trials = 1'000'000;
    std::uint64_t seed = 1;
    std::uint64_t chunk_size = 4096;
    /// Lower clamp applied to the true h inside the clairvoyant equalizer of the
    /// excess-MSE metric. Unset means "reuse the estimator's trim lambda".
    std::optional<double> h_regularization_lambda;
    /// 0 selects CHANEST_THREADS, falling back to hardware_concurrency().
    unsigned workers = 0;

    void validate() const
    {
        if (n_trials < 1)
            throw std::invalid_argument("McConfig: n_trials must be >= 1");
        if (chunk_size < 1)
            throw std::invalid_argument("McConfig: chunk_size must be >= 1");
        if (h_regularization_lambda && !(*h_regularization_lambda >= 0.0))
            throw std::invalid_argument("McConfig: h_regularization_lambda must be >= 0");
    }
};

struct McResult {
    double mean = 0.0;
    double std_error = 0.0;
    std::uint64_t n = 0;
};

inline unsigned default_workers()
{
    if (const char* env = std::getenv(kThreadsEnv)) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline unsigned resolve_workers(unsigned requested) { return requested > 0 ? requested : default_workers(); }

/// Streaming mean/variance (Welford) with Chan's pairwise merge.
struct RunningStats {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x)
    {
        ++n;
        const double d = x - mean;
        mean += d / static_cast<double>(n);
        m2 += d * (x - mean);
    }

    void merge(const RunningStats& o)
    {
        if (o.n == 0)
            return;
        if (n == 0) {
            *this = o;
            return;
        }
        const double na = static_cast<double>(n);
        const double nb = static_cast<double>(o.n);
        const double d = o.mean - mean;
        const double nt = na + nb;
        mean += d * nb / nt;
        m2 += o.m2 + d * d * na * nb / nt;
        n += o.n;
    }

    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double std_error() const { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
    McResult result() const { return {mean, std_error(), n}; }
};

/// Runs `trial(index, rng, acc)` for index in [0, n_trials), where rng is the
/// substream (seed, index). Trials are grouped into fixed chunks of
/// `chunk_size`; each chunk is accumulated sequentially into a fresh `Acc`,
/// and chunk partials are merged in chunk order. The result therefore does not
/// depend on the number of workers.
///
/// `Acc` must be default-constructible and provide `merge(const Acc&)`.
template <class Acc, class TrialFn>
Acc reduce_trials(const McConfig& cfg, TrialFn&& trial)
{
    cfg.validate();
    const std::uint64_t n = cfg.n_trials;
    const std::uint64_t chunk = cfg.chunk_size;
    const std::uint64_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<Acc> partial(n_chunks);

    auto run_chunk = [&](std::uint64_t c) {
        Acc acc{};
        const std::uint64_t begin = c * chunk;
        const std::uint64_t end = std::min(n, begin + chunk);
        for (std::uint64_t i = begin; i < end; ++i) {
            Substream rng(cfg.seed, i);
            trial(i, rng, acc);
        }
        partial[c] = std::move(acc);
    };

    const unsigned workers =
        static_cast<unsigned>(std::min<std::uint64_t>(resolve_workers(cfg.workers), n_chunks));
    if (workers <= 1) {
        for (std::uint64_t c = 0; c < n_chunks; ++c)
            run_chunk(c);
    } else {
        std::atomic<std::uint64_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                try {
                    for (std::uint64_t c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1))
                        run_chunk(c);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure)
                        failure = std::current_exception();
                    next.store(n_chunks);
                }
            });
        }
        for (auto& t : pool)
            t.join();
        if (failure)
            std::rethrow_exception(failure);
    }

    Acc total{};
    for (const auto& p : partial)
        total.merge(p);
    return total;
}

/// Scalar convenience: `trial(rng)` returns one sample; result is mean and
/// standard error of the mean.
template <class TrialFn>
McResult run_trials(const McConfig& cfg, TrialFn&& trial)
{
    return reduce_trials<RunningStats>(cfg, [&](std::uint64_t, Substream& rng, RunningStats& acc) {
               acc.add(trial(rng));
           })
        .result();
}

}  // namespace chanest
