#include "test_support.hpp"

#include <chanest/closed_form_metrics.hpp>
#include <chanest/monte_carlo.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace chanest;
namespace ct = chanest::testing;

namespace {

McConfig mc_with(std::uint64_t n, std::uint64_t seed = 1, unsigned workers = 1)
{
    McConfig mc;
    mc.n_trials = n;
    mc.seed = seed;
    mc.workers = workers;
    return mc;
}

Scenario rayleigh(std::size_t B, double data_db, double tr_db, double lambda = 0.1)
{
    return Scenario::from_snr(ChannelPrior::complex_gaussian(1.0), Constellation::qpsk(), B, data_db, tr_db, lambda);
}

Scenario fixed_channel(cplx h, std::size_t B, double data_db, double tr_db, double lambda = 0.1)
{
    return Scenario::from_snr(ChannelPrior::deterministic(h), Constellation::qpsk(), B, data_db, tr_db, lambda);
}

/// Scenario with unit-energy-per-slot pilot and a given (tiny) noise power.
Scenario quiet(cplx h, double noise, double lambda = 0.1)
{
    return Scenario(ChannelPrior::deterministic(h), Constellation::qpsk(), TrainingBlock::constant_modulus(2, 2.0),
                    noise, lambda);
}

}  // namespace

// ---------------------------------------------------------------------------
// Reproducibility
// ---------------------------------------------------------------------------

TEST(Determinism, BitIdenticalAcrossWorkerCounts)
{
    const auto s = rayleigh(5, 10.0, 0.0);
    const auto est = make_estimator(kind::Mvu{}, s);
    for (auto metric : {true_mse_x, true_mse_xe, true_pe}) {
        McConfig mc = mc_with(20000, 5, 1);
        mc.chunk_size = 1000;
        const auto ref = metric(s, est, mc);
        for (unsigned w : {2u, 4u}) {
            mc.workers = w;
            const auto r = metric(s, est, mc);
            EXPECT_EQ(r.mean, ref.mean);
            EXPECT_EQ(r.std_error, ref.std_error);
            EXPECT_EQ(r.n, ref.n);
        }
    }
}

TEST(Determinism, ChecksAreWorkerIndependentToo)
{
    const auto s = rayleigh(5, 10.0, 0.0);
    const auto est = make_estimator(kind::Mmse{}, s);
    McConfig mc = mc_with(30000, 3, 1);
    mc.chunk_size = 777;
    const auto a = moment_ratio_check(s, est, mc);
    const std::vector<double> grid{0.05, 0.1, 0.2};
    const auto ta = tail_mass_check(s, est, grid, mc);
    mc.workers = 3;
    const auto b = moment_ratio_check(s, est, mc);
    const auto tb = tail_mass_check(s, est, grid, mc);
    EXPECT_EQ(a.lhs, b.lhs);
    EXPECT_EQ(a.rhs, b.rhs);
    EXPECT_EQ(ta.probabilities, tb.probabilities);
}

TEST(Determinism, SameSeedSameResultDifferentSeedStatisticallyClose)
{
    const auto s = rayleigh(2, 6.0, 0.0);
    for (const auto& k : std::vector<EstimatorKind>{kind::Mvu{}, kind::OptZfRc{}}) {
        const auto est = make_estimator(k, s);
        const auto a = true_mse_x(s, est, mc_with(50000, 11));
        const auto b = true_mse_x(s, est, mc_with(50000, 11));
        const auto c = true_mse_x(s, est, mc_with(50000, 12));
        EXPECT_EQ(a.mean, b.mean);
        EXPECT_NE(a.mean, c.mean);
        EXPECT_LT(std::abs(a.mean - c.mean), 6.0 * std::hypot(a.std_error, c.std_error));

        const auto pa = true_pe(s, est, mc_with(50000, 11));
        const auto pc = true_pe(s, est, mc_with(50000, 12));
        EXPECT_LT(std::abs(pa.mean - pc.mean), 6.0 * std::hypot(pa.std_error, pc.std_error));
    }
}

TEST(McConfig, Validation)
{
    const auto s = rayleigh(2, 6.0, 0.0);
    const auto est = make_estimator(kind::Mvu{}, s);
    McConfig mc = mc_with(0);
    EXPECT_THROW(true_mse_x(s, est, mc), std::invalid_argument);
    mc = mc_with(10);
    mc.chunk_size = 0;
    EXPECT_THROW(true_mse_x(s, est, mc), std::invalid_argument);
}

TEST(RunningStats, MergeMatchesSequential)
{
    Substream rng(4, 4);
    RunningStats all, left, right;
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform() * 10.0;
        all.add(v);
        (i < 370 ? left : right).add(v);
    }
    left.merge(right);
    EXPECT_EQ(left.n, all.n);
    EXPECT_NEAR(left.mean, all.mean, 1e-12);
    EXPECT_NEAR(left.variance(), all.variance(), 1e-10);
}

// ---------------------------------------------------------------------------
// True metrics: degenerate and oracle cases
// ---------------------------------------------------------------------------

TEST(TrueMseX, NoiselessIsZero)
{
    const auto s = quiet(cplx(0.8, -0.6), 1e-30);
    const auto r = true_mse_x(s, make_estimator(kind::Mvu{}, s), mc_with(10000));
    EXPECT_LT(r.mean, 1e-20);
    EXPECT_EQ(r.n, 10000u);
}

TEST(TrueMseXe, NoiselessTrainingIsZero)
{
    const auto s = quiet(cplx(0.8, -0.6), 1e-30);
    const auto r = true_mse_xe(s, make_estimator(kind::Mvu{}, s), mc_with(10000));
    EXPECT_LT(r.mean, 1e-20);
}

TEST(TrueMetrics, UntrimmedEstimatorRefused)
{
    const auto s = rayleigh(2, 6.0, 0.0, 0.0);
    const auto est = make_estimator(kind::Mvu{}, s);
    EXPECT_THROW(true_mse_x(s, est, mc_with(10)), std::invalid_argument);
    EXPECT_THROW(true_mse_xe(s, est, mc_with(10)), std::invalid_argument);
    EXPECT_THROW(moment_ratio_check(s, est, mc_with(10)), std::invalid_argument);
    try {
        true_mse_x(s, est, mc_with(10));
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("infinite moment"), std::string::npos);
    }

    const auto t = rayleigh(2, 6.0, 0.0, 0.1);
    McConfig mc = mc_with(10);
    mc.h_regularization_lambda = 0.0;
    EXPECT_THROW(true_mse_xe(t, make_estimator(kind::Mvu{}, t), mc), std::invalid_argument);
}

TEST(TrueMetrics, FilterLengthMismatchRefused)
{
    const auto s = rayleigh(2, 6.0, 0.0);
    const LinearEstimator wrong(CVector{1.0, 1.0, 1.0}, "w", 0.1);
    EXPECT_THROW(true_mse_x(s, wrong, mc_with(10)), std::invalid_argument);
    EXPECT_THROW(true_pe(s, wrong, mc_with(10)), std::invalid_argument);
}

TEST(TruePe, PerfectCsiMatchesQpskSerForFixedChannel)
{
    for (double data_db : {0.0, 4.0, 8.0}) {
        const auto s = fixed_channel(cplx(0.6, 0.8), 5, data_db, 10.0);
        const auto r = true_pe_perfect_csi(s, mc_with(400000, 2));
        const double want = ct::qpsk_ser(db_to_linear(data_db));
        EXPECT_LT(std::abs(r.mean - want), 3.0 * r.std_error) << data_db << " dB: " << r.mean << " vs " << want;
    }
}

TEST(TruePe, PerfectCsiMatchesQpskSerForRayleighChannel)
{
    for (double data_db : {0.0, 10.0, 20.0}) {
        const auto s = rayleigh(5, data_db, 10.0);
        const auto r = true_pe_perfect_csi(s, mc_with(400000, 3));
        const double want = ct::qpsk_ser_rayleigh(db_to_linear(data_db));
        EXPECT_LT(std::abs(r.mean - want), 3.0 * r.std_error) << data_db << " dB: " << r.mean << " vs " << want;
    }
}

TEST(TruePe, VanishesAtHighSnr)
{
    const auto s = fixed_channel(1.0, 5, 40.0, 30.0);
    const auto r = true_pe(s, make_estimator(kind::Mvu{}, s), mc_with(100000));
    EXPECT_EQ(r.mean, 0.0);
    EXPECT_EQ(r.std_error, 0.0);
}

TEST(TruePe, ProbabilityRangeAndBinomialError)
{
    const auto s = rayleigh(5, 4.0, 0.0);
    const auto r = true_pe(s, make_estimator(kind::Mmse{}, s), mc_with(20000));
    EXPECT_GT(r.mean, 0.0);
    EXPECT_LT(r.mean, 1.0);
    EXPECT_NEAR(r.std_error, std::sqrt(r.mean * (1 - r.mean) / 20000.0), 1e-15);
}

// ---------------------------------------------------------------------------
// Closed form against simulation
// ---------------------------------------------------------------------------

TEST(ClosedFormAgreement, MomentRatioMatchesZerothValueAtTrainingSnr20)
{
    const auto s = rayleigh(5, 10.0, 20.0);
    for (const auto& k : std::vector<EstimatorKind>{kind::Mvu{}, kind::Mmse{}, kind::OptZfRc{}}) {
        const auto est = make_estimator(k, s);
        const auto rep = moment_ratio_check(s, est, mc_with(200000, 8));
        const double mc_ratio = (s.symbol_power() * rep.mean_x + s.noise_power()) / rep.mean_y;
        const double zeroth = zeroth_mse_x_rc(make_zeroth_inputs(est, s.training(), 1.0, 1.0, s.noise_power()));
        EXPECT_LT(std::abs(mc_ratio - zeroth), 0.05 * zeroth) << est.label();
    }
}

TEST(ClosedFormAgreement, GapToTrueMetricShrinksWithTrainingSnr)
{
    // Known channel, single pilot, common random numbers across points.
    std::vector<double> gaps;
    for (double tr_db : {0.0, 10.0, 20.0, 30.0}) {
        const auto s = fixed_channel(1.0, 1, 10.0, tr_db, 0.01);
        const auto est = make_estimator(kind::Mvu{}, s);
        const auto mc = true_mse_x(s, est, mc_with(1000000, 4));
        const double zeroth = zeroth_mse_x_dc(make_zeroth_inputs(est, s.training(), 1.0, 1.0, s.noise_power()));
        gaps.push_back(std::abs(mc.mean - zeroth) / zeroth);
    }
    for (std::size_t i = 1; i < gaps.size(); ++i)
        EXPECT_LT(gaps[i], gaps[i - 1]) << "gap " << gaps[i] << " at step " << i;
}

// ---------------------------------------------------------------------------
// Approximation-chain checks
// ---------------------------------------------------------------------------

TEST(MomentRatio, InequalityHoldsAcrossScenarios)
{
    for (double tr_db : {0.0, 10.0, 20.0})
        for (std::size_t B : {1u, 2u, 5u})
            for (const auto& k : std::vector<EstimatorKind>{kind::Mvu{}, kind::Mmse{}, kind::OptZfRc{}}) {
                const auto s = rayleigh(B, 10.0, tr_db);
                const auto rep = moment_ratio_check(s, make_estimator(k, s), mc_with(100000, 6));
                EXPECT_TRUE(rep.holds) << tr_db << " dB, B=" << B << ": " << rep.lhs << " vs " << rep.rhs;
                EXPECT_GE(rep.rhs, 0.0);
            }
}

TEST(MomentRatio, GapSmallAtTrainingSnr30)
{
    const auto s = fixed_channel(1.0, 5, 10.0, 30.0);
    const auto rep = moment_ratio_check(s, make_estimator(kind::Mvu{}, s), mc_with(100000, 6));
    EXPECT_TRUE(rep.holds);
    EXPECT_LT(rep.relative_gap(), 1e-3);
}

TEST(MomentRatio, GapShrinksWithTrainingSnr)
{
    double prev = std::numeric_limits<double>::infinity();
    for (double tr_db : {0.0, 10.0, 20.0, 30.0}) {
        const auto s = fixed_channel(1.0, 5, 10.0, tr_db);
        const auto rep = moment_ratio_check(s, make_estimator(kind::Mvu{}, s), mc_with(100000, 6));
        EXPECT_LT(rep.relative_gap(), prev) << tr_db;
        prev = rep.relative_gap();
    }
}

TEST(MomentRatio, DegenerateNoiseGivesZeroGap)
{
    const auto s = quiet(1.0, 1e-30);
    const auto rep = moment_ratio_check(s, make_estimator(kind::Mvu{}, s), mc_with(1000));
    EXPECT_LT(rep.lhs, 1e-20);
    EXPECT_TRUE(rep.holds);
}

TEST(TailMass, MatchesRayleighCdfAndScalesQuadratically)
{
    const auto s = rayleigh(5, 10.0, 0.0);
    const auto est = make_estimator(kind::Mvu{}, s);
    const std::vector<double> grid{0.02, 0.04, 0.08, 0.5, 100.0};
    const auto rep = tail_mass_check(s, est, grid, mc_with(2000000, 9));
    // h_hat ~ CN(0, 1 + sw2 ||f||^2) for the MVU filter
    const double v = 1.0 + s.noise_power() * est.norm2();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double want = 1.0 - std::exp(-grid[i] * grid[i] / v);
        EXPECT_LE(std::abs(rep.probabilities[i] - want), 4.0 * std::sqrt(want * (1 - want) / 2e6) + 1e-12)
            << "lambda " << grid[i];
    }
    EXPECT_EQ(rep.probabilities.back(), 1.0);
    for (std::size_t i = 1; i < 3; ++i) {
        const double ratio = rep.probabilities[i] / rep.probabilities[i - 1];
        EXPECT_GE(ratio, 3.0);
        EXPECT_LE(ratio, 5.0);
    }
    TailMassReport small = rep;
    small.lambdas.resize(3);
    small.probabilities.resize(3);
    small.std_errors.resize(3);
    const double slope = loglog_slope(small);
    EXPECT_GE(slope, 1.7);
    EXPECT_LE(slope, 2.3);
}

TEST(TailMass, ZeroWhenChannelClearsLambdaWithoutNoise)
{
    const auto s = quiet(1.0, 1e-30);
    const std::vector<double> grid{0.1, 0.5};
    const auto rep = tail_mass_check(s, make_estimator(kind::Mvu{}, s), grid, mc_with(1000));
    EXPECT_EQ(rep.probabilities[0], 0.0);
    EXPECT_EQ(rep.probabilities[1], 0.0);
}

TEST(TailMass, GridValidation)
{
    const auto s = rayleigh(2, 10.0, 0.0);
    const auto est = make_estimator(kind::Mvu{}, s);
    EXPECT_THROW(tail_mass_check(s, est, std::vector<double>{}, mc_with(10)), std::invalid_argument);
    EXPECT_THROW(tail_mass_check(s, est, std::vector<double>{0.2, 0.1}, mc_with(10)), std::invalid_argument);
    EXPECT_THROW(tail_mass_check(s, est, std::vector<double>{0.0, 0.1}, mc_with(10)), std::invalid_argument);
}
