// Compares MVU, MMSE and the metric-optimal estimator at one operating point,
// on the zeroth-order symbol MSE and on the true (Monte Carlo) symbol MSE.

#include <chanest/chanest.hpp>

#include <cstdio>

int main()
{
    using namespace chanest;

    const auto scenario = Scenario::from_snr(ChannelPrior::complex_gaussian(1.0), Constellation::qpsk(),
                                             /*B=*/5, /*data SNR dB=*/10.0, /*training SNR dB=*/0.0,
                                             /*lambda=*/0.1);
    McConfig mc;
    mc.n_trials = 200'000;

    const EstimatorKind kinds[] = {kind::Mvu{}, kind::Mmse{}, kind::OptZfRc{}};
    std::printf("%-8s %14s %14s %12s\n", "filter", "zeroth MSE_x", "true MSE_x", "std err");
    for (const auto& k : kinds) {
        const auto est = make_estimator(k, scenario);
        const auto in = make_zeroth_inputs(est, scenario.training(), scenario.prior().second_moment(),
                                           scenario.symbol_power(), scenario.noise_power());
        const auto mse = true_mse_x(scenario, est, mc);
        std::printf("%-8s %14.6f %14.6f %12.2e\n", est.label().c_str(), zeroth_mse_x_rc(in), mse.mean,
                    mse.std_error);
    }
}
