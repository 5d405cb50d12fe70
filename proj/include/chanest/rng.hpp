#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace chanest {

/// 64-bit finalizer from SplitMix64. A bijection on uint64_t with full
/// avalanche; used both to derive stream keys and to hash counters.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Counter-based random stream identified by (seed, stream).
///
/// The k-th output is a pure function of (seed, stream, k), so trial i of a
/// Monte Carlo run can own stream i and produce the same draws no matter
/// which worker executes it. Satisfies UniformRandomBitGenerator.
class Substream {
public:
    using result_type = std::uint64_t;

    explicit Substream(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix64(mix64(seed ^ 0x243f6a8885a308d3ULL) + stream * 0x9e3779b97f4a7c15ULL))
    {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        return mix64(key_ + mix64(++counter_ * 0xd1b54a32d192ed03ULL));
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open_low() noexcept { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

    /// Exactly uniform integer in [0, n) (Lemire's multiply-shift with rejection).
    std::uint64_t below(std::uint64_t n)
    {
        if (n == 0)
            throw std::invalid_argument("Substream::below: empty range");
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    std::uint64_t draws() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Circularly-symmetric complex Gaussian CN(0, variance): real and imaginary
/// parts are independent N(0, variance/2). Box-Muller on two uniforms, so the
/// stream always advances by exactly two draws.
inline std::complex<double> sample_circular_gaussian(double variance, Substream& rng)
{
    if (!(variance >= 0.0))
        throw std::invalid_argument("sample_circular_gaussian: variance must be >= 0");
    const double u = rng.uniform_open_low();
    const double v = rng.uniform();
    if (variance == 0.0)
        return {0.0, 0.0};
    const double r = std::sqrt(-variance * std::log(u));
    const double t = 2.0 * std::numbers::pi * v;
    return {r * std::cos(t), r * std::sin(t)};
}

}  // namespace chanest
