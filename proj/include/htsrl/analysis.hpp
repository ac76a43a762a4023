#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace htsrl::analysis {

/// Euler-Mascheroni constant.
inline constexpr double kEulerGamma = 0.5772156649015329;

struct RuntimeModelInput {
    std::int64_t n = 2;
    std::int64_t K = 2;
    std::int64_t alpha = 1;
    double beta = 1.0;
    double c = 0.0;

    /// Throws UsageError; n >= 1 here, expected_runtime additionally needs n >= 2.
    void validate() const;
};

/// Regularized lower incomplete gamma P(shape, x).
double regularized_incomplete_gamma(double shape, double x);

/// Quantile of Gamma(shape, rate): x with P(shape, rate * x) = q.
double gamma_inverse_cdf(double q, double shape, double rate);

/// Extreme-value approximation of the total rollout time for K steps.
double expected_runtime(const RuntimeModelInput& input);

enum class StepDistribution { Exponential, Constant };

struct SimulationSummary {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t replications = 0;
};

/// Virtual-clock synchronized rollout: per round each env draws alpha step
/// times, the round lasts the slowest env plus alpha * c. Constant steps
/// take exactly 1 / beta.
SimulationSummary simulate_sync_rollout(const RuntimeModelInput& input, std::size_t replications,
                                        std::uint64_t seed,
                                        StepDistribution steps = StepDistribution::Exponential);

/// Mean queue length n*rho0 / (1 - n*rho0). NumericError when n*rho0 >= 1.
double expected_latency(std::int64_t n, double lambda0, double mu);

struct QueueSimConfig {
    std::int64_t n = 1;
    double lambda0 = 1.0;
    double mu = 2.0;
    std::int64_t horizon_events = 1'000'000;
    std::size_t histogram_bins = 21;  // lengths 0..bins-1

    void validate() const;
};

struct QueueSimResult {
    double mean_length = 0.0;
    /// Fraction of post-warm-up time spent at each length; lengths beyond the
    /// last bin are not counted.
    std::vector<double> histogram;
    double observed_time = 0.0;
};

/// M/M/1 discrete-event simulation, first 10% of events discarded.
QueueSimResult simulate_mm1(const QueueSimConfig& config, std::uint64_t seed);

/// Total variation distance between `histogram` and the geometric law
/// P_j = rho^j (1 - rho) over the histogram's bins.
double geometric_tv_distance(const std::vector<double>& histogram, double rho);

struct DelayedSgdConfig {
    std::int64_t delay = 0;
    std::int64_t steps = 100'000;
    std::size_t dim = 2;
    std::size_t points = 16;
    /// Ascending step counts at which average regret is reported; empty means
    /// powers of ten up to `steps` plus `steps` itself.
    std::vector<std::int64_t> checkpoints;

    void validate() const;
};

struct RegretCheckpoint {
    std::int64_t t = 0;
    double average_regret = 0.0;
    /// 4 F L sqrt(max(tau, 1) / t).
    double envelope = 0.0;
};

struct DelayedSgdResult {
    double diameter = 0.0;   // F
    double lipschitz = 0.0;  // L
    double base_lr = 0.0;    // sigma
    std::vector<RegretCheckpoint> checkpoints;
};

/// tau-delayed SGD on 1/2 |theta - x|^2 over a random finite point set in the
/// unit cube, step size sigma / sqrt(t - tau).
DelayedSgdResult delayed_sgd_experiment(const DelayedSgdConfig& config, std::uint64_t seed);

}  // namespace htsrl::analysis
