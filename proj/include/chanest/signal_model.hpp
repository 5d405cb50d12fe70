#pragma once

#include <chanest/rng.hpp>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace chanest {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

// ---------------------------------------------------------------------------
// Constellation
// ---------------------------------------------------------------------------

/// Equiprobable M-ary symbol alphabet with zero mean and average power
/// `symbol_power`. Points are validated on construction.
class Constellation {
public:
    Constellation(std::string name, std::vector<cplx> points, double symbol_power)
        : name_(std::move(name)), points_(std::move(points)), symbol_power_(symbol_power)
    {
        validate();
    }

    /// Rescales arbitrary prototype points so that their average power is
    /// `symbol_power` and subtracts nothing: prototypes must already be centred.
    static Constellation normalized(std::string name, std::vector<cplx> prototype, double symbol_power)
    {
        if (prototype.empty())
            throw std::invalid_argument("Constellation: no points");
        if (!(symbol_power > 0.0))
            throw std::invalid_argument("Constellation: symbol power must be > 0");
        double p = 0.0;
        for (const auto& x : prototype)
            p += std::norm(x);
        p /= static_cast<double>(prototype.size());
        const double g = std::sqrt(symbol_power / p);
        for (auto& x : prototype)
            x *= g;
        return Constellation(std::move(name), std::move(prototype), symbol_power);
    }

    static Constellation bpsk(double symbol_power = 1.0)
    {
        return normalized("bpsk", {{1.0, 0.0}, {-1.0, 0.0}}, symbol_power);
    }

    /// QPSK {(+-1 +- i)/sqrt 2}, ordered counter-clockwise from the first quadrant.
    static Constellation qpsk(double symbol_power = 1.0)
    {
        return normalized("qpsk", {{1.0, 1.0}, {-1.0, 1.0}, {-1.0, -1.0}, {1.0, -1.0}}, symbol_power);
    }

    static Constellation psk8(double symbol_power = 1.0)
    {
        std::vector<cplx> pts;
        for (int k = 0; k < 8; ++k)
            pts.push_back(std::polar(1.0, std::numbers::pi * k / 4.0));
        return normalized("8psk", std::move(pts), symbol_power);
    }

    static Constellation qam16(double symbol_power = 1.0)
    {
        std::vector<cplx> pts;
        for (int i : {-3, -1, 1, 3})
            for (int q : {-3, -1, 1, 3})
                pts.emplace_back(i, q);
        return normalized("16qam", std::move(pts), symbol_power);
    }

    static Constellation by_name(std::string_view name, double symbol_power = 1.0)
    {
        if (name == "bpsk")
            return bpsk(symbol_power);
        if (name == "qpsk")
            return qpsk(symbol_power);
        if (name == "8psk")
            return psk8(symbol_power);
        if (name == "16qam")
            return qam16(symbol_power);
        throw std::invalid_argument("unknown constellation '" + std::string(name) + "'");
    }

    std::span<const cplx> points() const noexcept { return points_; }
    const cplx& operator[](std::size_t i) const { return points_.at(i); }
    std::size_t size() const noexcept { return points_.size(); }
    double symbol_power() const noexcept { return symbol_power_; }
    const std::string& name() const noexcept { return name_; }

    std::size_t sample_index(Substream& rng) const { return static_cast<std::size_t>(rng.below(points_.size())); }

private:
    void validate() const
    {
        const auto m = static_cast<double>(points_.size());
        if (points_.empty())
            throw std::invalid_argument("Constellation: no points");
        if (!(symbol_power_ > 0.0))
            throw std::invalid_argument("Constellation: symbol power must be > 0");
        cplx sum{};
        double power = 0.0;
        for (const auto& x : points_) {
            sum += x;
            power += std::norm(x);
        }
        if (std::abs(sum) >= 1e-12 * m * std::max(1.0, std::sqrt(symbol_power_)))
            throw std::invalid_argument("Constellation: points are not zero-mean");
        if (std::abs(power / m - symbol_power_) >= 1e-12 * std::max(1.0, symbol_power_))
            throw std::invalid_argument("Constellation: average power does not match symbol power");
        for (std::size_t i = 0; i < points_.size(); ++i)
            for (std::size_t j = i + 1; j < points_.size(); ++j)
                if (points_[i] == points_[j])
                    throw std::invalid_argument("Constellation: duplicate points");
    }

    std::string name_;
    std::vector<cplx> points_;
    double symbol_power_;
};

// ---------------------------------------------------------------------------
// Channel prior
// ---------------------------------------------------------------------------

/// Distribution of the flat-fading coefficient h.
class ChannelPrior {
public:
    struct Deterministic {
        cplx h;
    };
    struct ComplexGaussian {
        double variance;
    };
    /// Re h and Im h i.i.d. uniform on [-half_width, half_width].
    struct UniformBox {
        double half_width;
    };
    using Kind = std::variant<Deterministic, ComplexGaussian, UniformBox>;

    static ChannelPrior deterministic(cplx h) { return ChannelPrior(Deterministic{h}); }

    static ChannelPrior complex_gaussian(double variance)
    {
        if (!(variance > 0.0))
            throw std::invalid_argument("ChannelPrior: Gaussian variance must be > 0");
        return ChannelPrior(ComplexGaussian{variance});
    }

    static ChannelPrior uniform_box(double half_width)
    {
        if (!(half_width > 0.0))
            throw std::invalid_argument("ChannelPrior: box half-width must be > 0");
        return ChannelPrior(UniformBox{half_width});
    }

    /// Box whose E[|h|^2] = 2w^2/3 equals `second_moment`.
    static ChannelPrior uniform_box_with_second_moment(double second_moment)
    {
        if (!(second_moment > 0.0))
            throw std::invalid_argument("ChannelPrior: second moment must be > 0");
        return uniform_box(std::sqrt(1.5 * second_moment));
    }

    const Kind& kind() const noexcept { return kind_; }
    bool is_random() const noexcept { return !std::holds_alternative<Deterministic>(kind_); }

    double second_moment() const
    {
        if (const auto* d = std::get_if<Deterministic>(&kind_))
            return std::norm(d->h);
        if (const auto* g = std::get_if<ComplexGaussian>(&kind_))
            return g->variance;
        const double w = std::get<UniformBox>(kind_).half_width;
        return 2.0 * w * w / 3.0;
    }

    double fourth_moment() const
    {
        if (const auto* d = std::get_if<Deterministic>(&kind_))
            return std::norm(d->h) * std::norm(d->h);
        if (const auto* g = std::get_if<ComplexGaussian>(&kind_))
            return 2.0 * g->variance * g->variance;
        // E[(a^2 + b^2)^2] = 2 E[a^4] + 2 E[a^2]^2 with a ~ U[-w, w].
        const double w2 = std::pow(std::get<UniformBox>(kind_).half_width, 2);
        return 2.0 * w2 * w2 / 5.0 + 2.0 * w2 * w2 / 9.0;
    }

    /// Draws h. A deterministic prior consumes no randomness.
    cplx sample(Substream& rng) const
    {
        if (const auto* d = std::get_if<Deterministic>(&kind_))
            return d->h;
        if (const auto* g = std::get_if<ComplexGaussian>(&kind_))
            return sample_circular_gaussian(g->variance, rng);
        const double w = std::get<UniformBox>(kind_).half_width;
        const double re = (2.0 * rng.uniform() - 1.0) * w;
        const double im = (2.0 * rng.uniform() - 1.0) * w;
        return {re, im};
    }

private:
    explicit ChannelPrior(Kind k) : kind_(k) {}
    Kind kind_;
};

// ---------------------------------------------------------------------------
// Training block
// ---------------------------------------------------------------------------

/// The B pilot symbols x_tr and their total energy ||x_tr||^2.
class TrainingBlock {
public:
    explicit TrainingBlock(CVector symbols) : symbols_(std::move(symbols))
    {
        if (symbols_.empty())
            throw std::invalid_argument("TrainingBlock: length must be >= 1");
        for (const auto& x : symbols_)
            energy_ += std::norm(x);
        if (!(energy_ > 0.0) || !std::isfinite(energy_))
            throw std::invalid_argument("TrainingBlock: zero-energy training");
    }

    /// x_tr[k] = sqrt(energy/B) e^{i pi/4} for k = 0..B-1.
    static TrainingBlock constant_modulus(std::size_t length, double energy)
    {
        if (length == 0)
            throw std::invalid_argument("TrainingBlock: length must be >= 1");
        if (!(energy > 0.0))
            throw std::invalid_argument("TrainingBlock: energy must be > 0");
        const cplx x = std::polar(std::sqrt(energy / static_cast<double>(length)), std::numbers::pi / 4.0);
        return TrainingBlock(CVector(length, x));
    }

    std::span<const cplx> symbols() const noexcept { return symbols_; }
    std::size_t length() const noexcept { return symbols_.size(); }
    double energy() const noexcept { return energy_; }

private:
    CVector symbols_;
    double energy_ = 0.0;
};

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Every physical parameter of one experiment point.
class Scenario {
public:
    Scenario(ChannelPrior prior, Constellation constellation, TrainingBlock training, double noise_power,
             double trim_lambda)
        : prior_(std::move(prior)),
          constellation_(std::move(constellation)),
          training_(std::move(training)),
          noise_power_(noise_power),
          trim_lambda_(trim_lambda)
    {
        if (!(noise_power_ > 0.0) || !std::isfinite(noise_power_))
            throw std::invalid_argument("Scenario: noise power must be > 0");
        if (!(trim_lambda_ >= 0.0))
            throw std::invalid_argument("Scenario: trim lambda must be >= 0");
    }

    /// Builds the operating point from SNRs (dB):
    ///   data SNR     = E[|h|^2] sigma_x^2 / sigma_w^2
    ///   training SNR = E[|h|^2] (energy/B) / sigma_w^2  (per slot)
    /// with a constant-modulus pilot of the resulting energy.
    static Scenario from_snr(ChannelPrior prior, Constellation constellation, std::size_t training_length,
                             double data_snr_db, double training_snr_db, double trim_lambda)
    {
        const double m2 = prior.second_moment();
        if (!(m2 > 0.0))
            throw std::invalid_argument("Scenario: channel second moment must be > 0");
        const double noise = m2 * constellation.symbol_power() / db_to_linear(data_snr_db);
        const double energy = static_cast<double>(training_length) * db_to_linear(training_snr_db) * noise / m2;
        auto training = TrainingBlock::constant_modulus(training_length, energy);
        return Scenario(std::move(prior), std::move(constellation), std::move(training), noise, trim_lambda);
    }

    const ChannelPrior& prior() const noexcept { return prior_; }
    const Constellation& constellation() const noexcept { return constellation_; }
    const TrainingBlock& training() const noexcept { return training_; }
    double noise_power() const noexcept { return noise_power_; }
    double symbol_power() const noexcept { return constellation_.symbol_power(); }
    double trim_lambda() const noexcept { return trim_lambda_; }

    double data_snr() const { return prior_.second_moment() * symbol_power() / noise_power_; }
    double training_snr() const
    {
        return prior_.second_moment() * training_.energy() / static_cast<double>(training_.length()) / noise_power_;
    }

private:
    ChannelPrior prior_;
    Constellation constellation_;
    TrainingBlock training_;
    double noise_power_;
    double trim_lambda_;
};

// ---------------------------------------------------------------------------
// Observation model
// ---------------------------------------------------------------------------

/// y_tr = h x_tr + w_tr with w_tr i.i.d. CN(0, noise_power).
inline CVector generate_training_obs(cplx h, const TrainingBlock& training, double noise_power, Substream& rng)
{
    CVector y;
    y.reserve(training.length());
    for (const auto& x : training.symbols())
        y.push_back(h * x + sample_circular_gaussian(noise_power, rng));
    return y;
}

/// y(n) = h x(n) + w(n).
inline cplx generate_data_obs(cplx h, cplx symbol, double noise_power, Substream& rng)
{
    return h * symbol + sample_circular_gaussian(noise_power, rng);
}

/// Gaussian tail probability Q(x) = P(N(0,1) > x).
inline double q_function(double x)
{
    if (std::isnan(x))
        throw std::invalid_argument("q_function: NaN argument");
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

}  // namespace chanest
