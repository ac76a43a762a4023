#include <gtest/gtest.h>

#include <cmath>

#include "htsrl/analysis.hpp"
#include "htsrl/errors.hpp"

using namespace htsrl;
using namespace htsrl::analysis;

namespace {

// Independent quantile by plain bisection on the incomplete gamma.
double bisect_quantile(double q, double shape, double rate) {
    double lo = 0.0, hi = 1.0;
    while (regularized_incomplete_gamma(shape, rate * hi) < q) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (regularized_incomplete_gamma(shape, rate * mid) < q ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST(IncompleteGamma, ClosedForms) {
    EXPECT_NEAR(regularized_incomplete_gamma(1.0, std::log(2.0)), 0.5, 1e-14);
    EXPECT_EQ(regularized_incomplete_gamma(3.0, 0.0), 0.0);
    EXPECT_NEAR(regularized_incomplete_gamma(2.0, 2.0), 1.0 - 3.0 * std::exp(-2.0), 1e-13);
    for (double x : {0.1, 0.9, 3.0, 7.5, 25.0}) {
        EXPECT_NEAR(regularized_incomplete_gamma(1.0, x), 1.0 - std::exp(-x), 1e-12) << x;
        const double p3 = 1.0 - std::exp(-x) * (1.0 + x + x * x / 2.0);
        EXPECT_NEAR(regularized_incomplete_gamma(3.0, x), p3, 1e-12) << x;
    }
    // Shape 1/2: P = erf(sqrt(x)).
    for (double x : {0.2, 1.5, 4.0}) {
        EXPECT_NEAR(regularized_incomplete_gamma(0.5, x), std::erf(std::sqrt(x)), 1e-12) << x;
    }
}

TEST(IncompleteGamma, Errors) {
    EXPECT_THROW(regularized_incomplete_gamma(0.0, 1.0), UsageError);
    EXPECT_THROW(regularized_incomplete_gamma(1.0, -1.0), UsageError);
}

TEST(GammaInverse, Examples) {
    EXPECT_NEAR(gamma_inverse_cdf(0.5, 1.0, 2.0), std::log(2.0) / 2.0, 1e-10);
    EXPECT_EQ(gamma_inverse_cdf(0.0, 3.0, 1.0), 0.0);
    EXPECT_NEAR(gamma_inverse_cdf(0.5, 2.0, 1.0), bisect_quantile(0.5, 2.0, 1.0), 1e-10);
    EXPECT_NEAR(gamma_inverse_cdf(0.5, 2.0, 1.0), 1.6783469900166603, 1e-10);
    EXPECT_THROW(gamma_inverse_cdf(1.0, 1.0, 1.0), UsageError);
    EXPECT_THROW(gamma_inverse_cdf(-0.1, 1.0, 1.0), UsageError);
}

TEST(GammaInverse, RoundTripGrid) {
    for (double shape : {0.5, 1.0, 2.0, 4.0}) {
        for (int i = 1; i <= 99; ++i) {
            const double q = i / 100.0;
            const double x = gamma_inverse_cdf(q, shape, 1.5);
            EXPECT_NEAR(regularized_incomplete_gamma(shape, 1.5 * x), q, 1e-8) << shape << " " << q;
        }
    }
}

TEST(ExpectedRuntime, Examples) {
    RuntimeModelInput in{2, 2, 1, 1.0, 0.0};
    EXPECT_NEAR(expected_runtime(in), kEulerGamma + std::log(2.0), 1e-10);
    EXPECT_NEAR(expected_runtime(in), 1.27036, 1e-5);
    const double base = expected_runtime(in);
    in.c = 0.01;
    EXPECT_NEAR(expected_runtime(in) - base, 2 * 0.01 / 2, 1e-12);
    in.n = 1;
    in.K = 1;
    EXPECT_THROW(expected_runtime(in), UsageError);
    EXPECT_THROW(expected_runtime({4, 10, 1, 1.0, 0.0}), UsageError);
}

TEST(ExpectedRuntime, NonIncreasingInAlpha) {
    for (std::int64_t n : {4, 16}) {
        for (double beta : {1.0, 2.0}) {
            double prev = INFINITY;
            for (std::int64_t alpha : {1, 2, 4, 8, 16}) {
                const double v = expected_runtime({n, 4096, alpha, beta, 0.0});
                EXPECT_LE(v, prev * (1 + 1e-12)) << n << " " << beta << " " << alpha;
                prev = v;
            }
        }
    }
}

TEST(SimulateSyncRollout, ConstantVariant) {
    const auto s = simulate_sync_rollout({4, 64, 4, 2.0, 0.1}, 10, 1, StepDistribution::Constant);
    EXPECT_DOUBLE_EQ(s.mean, 4 * 4 * (0.5 + 0.1));
}

TEST(SimulateSyncRollout, SingleEnvIsLinear) {
    const auto s = simulate_sync_rollout({1, 256, 4, 2.0, 0.01}, 4000, 3);
    const double expected = 256 * (0.5 + 0.01);
    EXPECT_NEAR(s.mean, expected, 4 * s.std_error);
    EXPECT_NEAR(s.mean, expected, 0.01 * expected);
}

TEST(SimulateSyncRollout, AlphaReducesRuntime) {
    double prev = INFINITY;
    for (std::int64_t alpha : {1, 4, 16}) {
        const double v = simulate_sync_rollout({16, 4096, alpha, 2.0, 0.0}, 200, 5).mean;
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(SimulateSyncRollout, Deterministic) {
    const RuntimeModelInput in{4, 64, 2, 1.0, 0.0};
    EXPECT_EQ(simulate_sync_rollout(in, 50, 9).mean, simulate_sync_rollout(in, 50, 9).mean);
}

TEST(ExpectedLatency, Examples) {
    EXPECT_NEAR(expected_latency(20, 100.0, 4000.0), 1.0, 1e-12);
    EXPECT_NEAR(expected_latency(1, 100.0, 4000.0), 0.025 / 0.975, 1e-12);
    EXPECT_THROW(expected_latency(40, 100.0, 4000.0), NumericError);
}

TEST(SimulateMm1, HalfLoad) {
    QueueSimConfig q{20, 100.0, 4000.0, 1'000'000};
    const auto r = simulate_mm1(q, 7);
    EXPECT_NEAR(r.mean_length, 1.0, 0.05);
    EXPECT_LE(geometric_tv_distance(r.histogram, 0.5), 0.02);
    double total = 0.0;
    for (double h : r.histogram) total += h;
    EXPECT_LE(total, 1.0 + 1e-9);
}

TEST(GeometricTv, ExactLawIsZero) {
    std::vector<double> h;
    double p = 0.7;
    for (int j = 0; j < 21; ++j) {
        h.push_back(p);
        p *= 0.3;
    }
    EXPECT_NEAR(geometric_tv_distance(h, 0.3), 0.0, 1e-15);
}

TEST(DelayedSgd, NoDelayRegretDecreases) {
    DelayedSgdConfig c;
    c.delay = 0;
    c.steps = 100'000;
    const auto r = delayed_sgd_experiment(c, 1);
    ASSERT_GE(r.checkpoints.size(), 3u);
    for (std::size_t i = 2; i < r.checkpoints.size(); ++i) {
        EXPECT_LT(r.checkpoints[i].average_regret, r.checkpoints[i - 1].average_regret);
    }
    EXPECT_LT(r.checkpoints.back().average_regret, 0.01);
}

TEST(DelayedSgd, DelayOneWithinEnvelope) {
    DelayedSgdConfig c;
    c.delay = 1;
    c.steps = 100'000;
    const auto r = delayed_sgd_experiment(c, 2);
    for (const auto& cp : r.checkpoints) EXPECT_LE(cp.average_regret, cp.envelope) << cp.t;
    EXPECT_NEAR(r.base_lr * r.base_lr, r.diameter * r.diameter / (2 * r.lipschitz * r.lipschitz), 1e-12);
}

TEST(DelayedSgd, DecayRatio) {
    DelayedSgdConfig c;
    c.delay = 1;
    c.steps = 40'000;
    c.checkpoints = {10'000, 40'000};
    double small = 0.0, large = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto r = delayed_sgd_experiment(c, seed);
        small += r.checkpoints[0].average_regret;
        large += r.checkpoints[1].average_regret;
    }
    EXPECT_LE(large / small, 0.7);
}

TEST(DelayedSgd, Validation) {
    DelayedSgdConfig c;
    c.steps = 10;
    c.checkpoints = {5, 3};
    EXPECT_THROW(delayed_sgd_experiment(c, 1), UsageError);
}
