#include "htsrl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "htsrl/errors.hpp"
#include "htsrl/seed.hpp"

namespace htsrl::analysis {

namespace {

constexpr int kMaxIterations = 10'000;
constexpr double kEps = 1e-16;

double series_p(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int i = 1; i < kMaxIterations; ++i) {
        term *= x / (a + i);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) {
            return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
        }
    }
    throw NumericError("regularized_incomplete_gamma: series did not converge");
}

// Lentz continued fraction for Q(a, x).
double continued_fraction_q(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIterations; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) {
            return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
        }
    }
    throw NumericError("regularized_incomplete_gamma: continued fraction did not converge");
}

double gamma_pdf(double x, double shape, double rate) {
    if (x <= 0.0) return 0.0;
    return std::exp(shape * std::log(rate) + (shape - 1.0) * std::log(x) - rate * x -
                    std::lgamma(shape));
}

// Uniform in (0, 1].
inline double open_unit(SplitMix64& rng) { return 1.0 - rng.uniform(); }

}  // namespace

void RuntimeModelInput::validate() const {
    if (n < 1) throw UsageError("runtime model: n must be >= 1");
    if (alpha < 1) throw UsageError("runtime model: alpha must be >= 1");
    if (K < 1) throw UsageError("runtime model: K must be >= 1");
    if (K % (n * alpha) != 0) {
        throw UsageError("runtime model: K (" + std::to_string(K) +
                         ") must be divisible by n * alpha (" + std::to_string(n * alpha) + ")");
    }
    if (!(beta > 0.0) || !std::isfinite(beta)) throw UsageError("runtime model: beta must be > 0");
    if (!(c >= 0.0) || !std::isfinite(c)) throw UsageError("runtime model: c must be >= 0");
}

double regularized_incomplete_gamma(double shape, double x) {
    if (!(shape > 0.0) || !std::isfinite(shape)) {
        throw UsageError("regularized_incomplete_gamma: shape must be > 0");
    }
    if (!(x >= 0.0)) throw UsageError("regularized_incomplete_gamma: x must be >= 0");
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < shape + 1.0) return std::clamp(series_p(shape, x), 0.0, 1.0);
    return std::clamp(1.0 - continued_fraction_q(shape, x), 0.0, 1.0);
}

double gamma_inverse_cdf(double q, double shape, double rate) {
    if (!(q >= 0.0 && q < 1.0)) throw UsageError("gamma_inverse_cdf: q must be in [0, 1)");
    if (!(shape > 0.0)) throw UsageError("gamma_inverse_cdf: shape must be > 0");
    if (!(rate > 0.0)) throw UsageError("gamma_inverse_cdf: rate must be > 0");
    if (q == 0.0) return 0.0;

    auto cdf = [&](double x) { return regularized_incomplete_gamma(shape, rate * x); };
    double lo = 0.0;
    double hi = std::max(1.0, shape) / rate;
    for (int i = 0; cdf(hi) < q; ++i) {
        lo = hi;
        hi *= 2.0;
        if (i > 2000) throw NumericError("gamma_inverse_cdf: could not bracket quantile");
    }
    // Coarse bisection, then Newton confined to the bracket.
    for (int i = 0; i < 60 && hi - lo > 1e-6 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < q ? lo : hi) = mid;
    }
    double x = 0.5 * (lo + hi);
    for (int i = 0; i < 100; ++i) {
        const double f = cdf(x) - q;
        if (f < 0.0) lo = x; else hi = x;
        const double pdf = gamma_pdf(x, shape, rate);
        double next = pdf > 0.0 ? x - f / pdf : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 1e-14 * std::max(1.0, x)) return next;
        x = next;
        if (hi - lo <= 1e-15 * std::max(1.0, x)) return x;
    }
    if (hi - lo <= 1e-10 * std::max(1.0, x)) return x;
    throw NumericError("gamma_inverse_cdf: did not converge");
}

double expected_runtime(const RuntimeModelInput& input) {
    input.validate();
    if (input.n < 2) throw UsageError("expected_runtime: n must be >= 2");
    const double n = static_cast<double>(input.n);
    const double alpha = static_cast<double>(input.alpha);
    const double K = static_cast<double>(input.K);
    const double f_inv = gamma_inverse_cdf(1.0 - 1.0 / n, alpha, input.beta);
    const double per_round =
        kEulerGamma / input.beta * (1.0 + (alpha - 1.0) / (input.beta * f_inv)) + f_inv;
    return K / (n * alpha) * per_round + K * input.c / n;
}

SimulationSummary simulate_sync_rollout(const RuntimeModelInput& input, std::size_t replications,
                                        std::uint64_t seed, StepDistribution steps) {
    input.validate();
    if (replications < 1) throw UsageError("simulate_sync_rollout: replications must be >= 1");
    const std::int64_t rounds = input.K / (input.n * input.alpha);
    const double compute = static_cast<double>(input.alpha) * input.c;

    SimulationSummary out;
    out.replications = replications;
    if (steps == StepDistribution::Constant) {
        out.mean = static_cast<double>(rounds) *
                   (static_cast<double>(input.alpha) / input.beta + compute);
        return out;
    }

    SplitMix64 rng(mix64(seed ^ 0x5bd1e995ULL));
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t r = 0; r < replications; ++r) {
        double total = 0.0;
        for (std::int64_t round = 0; round < rounds; ++round) {
            // Max over envs of a Gamma(alpha, beta) sum equals the max of
            // -log(prod u) / beta, so one log per env suffices.
            double min_prod = 1.0;
            for (std::int64_t e = 0; e < input.n; ++e) {
                double prod = 1.0;
                for (std::int64_t s = 0; s < input.alpha; ++s) prod *= open_unit(rng);
                min_prod = std::min(min_prod, prod);
            }
            total += -std::log(min_prod) / input.beta + compute;
        }
        sum += total;
        sum_sq += total * total;
    }
    const double reps = static_cast<double>(replications);
    out.mean = sum / reps;
    if (replications > 1) {
        const double var = std::max(0.0, (sum_sq - reps * out.mean * out.mean) / (reps - 1.0));
        out.std_error = std::sqrt(var / reps);
    }
    return out;
}

double expected_latency(std::int64_t n, double lambda0, double mu) {
    if (n < 1) throw UsageError("expected_latency: n must be >= 1");
    if (!(lambda0 > 0.0) || !(mu > 0.0)) throw UsageError("expected_latency: rates must be > 0");
    const double load = static_cast<double>(n) * lambda0 / mu;
    if (load >= 1.0) {
        throw NumericError("expected_latency: unstable queue (n * rho0 = " + std::to_string(load) +
                           " >= 1)");
    }
    return load / (1.0 - load);
}

void QueueSimConfig::validate() const {
    if (n < 1) throw UsageError("queue sim: n must be >= 1");
    if (!(lambda0 > 0.0) || !(mu > 0.0)) throw UsageError("queue sim: rates must be > 0");
    if (horizon_events < 10) throw UsageError("queue sim: horizon_events must be >= 10");
    if (histogram_bins < 1) throw UsageError("queue sim: histogram_bins must be >= 1");
}

QueueSimResult simulate_mm1(const QueueSimConfig& config, std::uint64_t seed) {
    config.validate();
    const double arrival = static_cast<double>(config.n) * config.lambda0;
    const double service = config.mu;
    const std::int64_t warmup = config.horizon_events / 10;

    SplitMix64 rng(mix64(seed ^ 0x27d4eb2f165667c5ULL));
    QueueSimResult out;
    out.histogram.assign(config.histogram_bins, 0.0);
    std::int64_t length = 0;
    double weighted = 0.0;
    for (std::int64_t event = 0; event < config.horizon_events; ++event) {
        const double rate = arrival + (length > 0 ? service : 0.0);
        const double dt = -std::log(open_unit(rng)) / rate;
        if (event >= warmup) {
            out.observed_time += dt;
            weighted += dt * static_cast<double>(length);
            if (static_cast<std::size_t>(length) < out.histogram.size()) {
                out.histogram[static_cast<std::size_t>(length)] += dt;
            }
        }
        if (rng.uniform() * rate < arrival) ++length; else --length;
    }
    out.mean_length = weighted / out.observed_time;
    for (double& h : out.histogram) h /= out.observed_time;
    return out;
}

double geometric_tv_distance(const std::vector<double>& histogram, double rho) {
    if (!(rho >= 0.0 && rho < 1.0)) throw UsageError("geometric_tv_distance: rho must be in [0, 1)");
    double tv = 0.0;
    double p = 1.0 - rho;
    for (double h : histogram) {
        tv += std::abs(h - p);
        p *= rho;
    }
    return 0.5 * tv;
}

void DelayedSgdConfig::validate() const {
    if (delay < 0) throw UsageError("delayed sgd: delay must be >= 0");
    if (steps <= delay) throw UsageError("delayed sgd: steps must exceed delay");
    if (dim < 1) throw UsageError("delayed sgd: dim must be >= 1");
    if (points < 2) throw UsageError("delayed sgd: points must be >= 2");
    std::int64_t prev = 0;
    for (std::int64_t t : checkpoints) {
        if (t <= prev || t > steps) {
            throw UsageError("delayed sgd: checkpoints must be ascending within [1, steps]");
        }
        prev = t;
    }
}

DelayedSgdResult delayed_sgd_experiment(const DelayedSgdConfig& config, std::uint64_t seed) {
    config.validate();
    const std::size_t d = config.dim;
    const std::size_t m = config.points;
    SplitMix64 rng(mix64(seed ^ 0x165667b19e3779f9ULL));

    std::vector<double> xs(m * d);
    for (double& v : xs) v = rng.uniform();
    auto point = [&](std::size_t i) { return xs.data() + i * d; };

    std::vector<double> optimum(d, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t k = 0; k < d; ++k) optimum[k] += point(i)[k] / static_cast<double>(m);
    }
    double max_sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) {
            double sq = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = point(i)[k] - point(j)[k];
                sq += diff * diff;
            }
            max_sq = std::max(max_sq, sq);
        }
    }

    DelayedSgdResult out;
    out.diameter = std::sqrt(0.5 * max_sq);
    out.lipschitz = std::sqrt(max_sq);
    const double tau = static_cast<double>(config.delay);
    out.base_lr = out.diameter / (out.lipschitz * std::sqrt(2.0 * std::max(tau, 1.0)));

    std::vector<std::int64_t> marks = config.checkpoints;
    if (marks.empty()) {
        for (std::int64_t t = 10; t < config.steps; t *= 10) marks.push_back(t);
        marks.push_back(config.steps);
    }

    auto loss = [&](const double* theta, const double* x) {
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) s += (theta[k] - x[k]) * (theta[k] - x[k]);
        return 0.5 * s;
    };

    // History ring of (theta_t, x_t) for the last tau + 1 steps.
    const std::size_t window = static_cast<std::size_t>(config.delay) + 1;
    std::vector<double> thetas(window * d);
    std::vector<std::size_t> samples(window);
    std::vector<double> theta(point(0), point(0) + d);

    double regret = 0.0;
    std::size_t next_mark = 0;
    for (std::int64_t t = 1; t <= config.steps; ++t) {
        const std::size_t slot = static_cast<std::size_t>(t) % window;
        const std::size_t xi = static_cast<std::size_t>(rng() % m);
        std::copy(theta.begin(), theta.end(), thetas.begin() + slot * d);
        samples[slot] = xi;
        regret += loss(theta.data(), point(xi)) - loss(optimum.data(), point(xi));

        if (t > config.delay) {
            const std::size_t old = static_cast<std::size_t>(t - config.delay) % window;
            const double lr = out.base_lr / std::sqrt(static_cast<double>(t - config.delay));
            const double* stale = thetas.data() + old * d;
            const double* x = point(samples[old]);
            for (std::size_t k = 0; k < d; ++k) theta[k] -= lr * (stale[k] - x[k]);
        }
        if (next_mark < marks.size() && t == marks[next_mark]) {
            RegretCheckpoint cp;
            cp.t = t;
            cp.average_regret = regret / static_cast<double>(t);
            cp.envelope = 4.0 * out.diameter * out.lipschitz *
                          std::sqrt(std::max(tau, 1.0) / static_cast<double>(t));
            out.checkpoints.push_back(cp);
            ++next_mark;
        }
    }
    return out;
}

}  // namespace htsrl::analysis
