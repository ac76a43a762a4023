// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../policy_oracle.hpp"
#include "../test_util.hpp"
#include "htsrl/analysis.hpp"
#include "htsrl/baselines.hpp"
#include "htsrl/cli.hpp"
#include "htsrl/config.hpp"
#include "htsrl/engine.hpp"
#include "htsrl/envs.hpp"

using namespace htsrl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// GridWorld 5x5 workload shared by the learning criteria.
constexpr double kLearningRate = 2.0;
constexpr double kEntropyCoef = 0.01;

engine::EngineConfig grid_workload(std::int64_t total_steps, std::uint64_t seed) {
    engine::EngineConfig c;
    c.n_envs = 8;
    c.n_actors = 4;
    c.sync_interval = 8;
    c.total_steps = total_steps;
    c.seed = seed;
    c.hyperparams.learning_rate = kLearningRate;
    c.hyperparams.entropy_coef = kEntropyCoef;
    c.env = envs::GridWorldSpec{};
    return c;
}

Outcome criterion1() {
    const fs::path dir = fs::temp_directory_path() / "htsrl_acceptance_c1";
    fs::create_directories(dir);
    config::RunConfig cfg;
    cfg.engine = grid_workload(200'000, 1);
    cfg.output.metrics = (dir / "m.csv").string();
    std::ofstream(dir / "run.ini") << config::serialize(cfg);

    std::vector<std::string> metrics, params;
    double worst = 0.0;
    for (int run = 0; run < 2; ++run) {
        const auto m = dir / ("m" + std::to_string(run) + ".csv");
        const auto p = dir / ("p" + std::to_string(run) + ".json");
        std::ostringstream out, err;
        const auto t0 = std::chrono::steady_clock::now();
        const int code = cli::run_cli({"train", (dir / "run.ini").string(), "--strip-timing",
                                       "--metrics", m.string(), "--params-out", p.string()},
                                      out, err);
        worst = std::max(worst, seconds_since(t0));
        if (code != 0) return {false, "train exited " + std::to_string(code) + ": " + err.str()};
        metrics.push_back(slurp(m));
        params.push_back(slurp(p));
    }
    fs::remove_all(dir);
    const bool same_metrics = metrics[0] == metrics[1] && !metrics[0].empty();
    const bool same_params = params[0] == params[1] && !params[0].empty();
    const std::size_t rows = static_cast<std::size_t>(std::count(metrics[0].begin(), metrics[0].end(), '\n')) - 1;
    return {same_metrics && same_params && rows == 3125 && worst <= 60.0,
            fmt("metrics identical=%d (%zu rows), params identical=%d, slowest run %.2fs <= 60s",
                same_metrics, rows, same_params, worst)};
}

Outcome criterion2() {
    auto c = grid_workload(200'000, 7);
    std::vector<engine::RunResult> runs;
    for (std::size_t actors : {1u, 4u, 8u}) {
        c.n_actors = actors;
        runs.push_back(engine::run_hts(c));
    }
    bool same = true;
    for (const auto& r : runs) {
        same = same && r.final_params.policy.weights == runs[0].final_params.policy.weights &&
               r.final_params.value.weights == runs[0].final_params.value.weights &&
               r.final_params.value.bias == runs[0].final_params.value.bias &&
               r.param_digests == runs[0].param_digests;
    }
    return {same, fmt("final params bit-identical across n_actors {1,4,8}: %s (digest %016llx)",
                      same ? "yes" : "no",
                      static_cast<unsigned long long>(engine::digest(runs[0].final_params)))};
}

Outcome criterion3() {
    std::size_t hts_bad = 0, lock_bad = 0, hts_n = 0, lock_n = 0;
    for (std::uint64_t seed : {1u, 2u}) {
        for (std::size_t alpha : {1u, 8u}) {
            auto c = grid_workload(static_cast<std::int64_t>(8 * alpha * 500), seed);
            c.sync_interval = alpha;
            const auto h = engine::run_hts(c);
            for (const auto& m : h.metrics) {
                if (m.epoch >= 1) {
                    ++hts_n;
                    hts_bad += m.policy_lag != 1;
                }
            }
            hts_bad += h.lags.size() != h.metrics.size() - 1;
            const auto l = baselines::run_lockstep(c);
            for (const auto& m : l.metrics) {
                ++lock_n;
                lock_bad += m.policy_lag != 0;
            }
        }
    }
    return {hts_bad == 0 && lock_bad == 0 && hts_n > 0,
            fmt("hts epochs>=1 with lag!=1: %zu/%zu; lockstep epochs with lag!=0: %zu/%zu", hts_bad,
                hts_n, lock_bad, lock_n)};
}

Outcome criterion4() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(4242);
    double worst = 0.0;
    const int instances = 24;
    for (int i = 0; i < instances; ++i) {
        policy::LearnerHyperparams hp;
        hp.discount = 0.9 + 0.01 * (i % 5);
        hp.nstep = 1 + i % 5;
        hp.entropy_coef = 0.02 * (i % 4);
        hp.value_coef = 0.25 + 0.25 * (i % 3);
        const std::size_t states = 2 + i % 4, actions = 2 + i % 3;
        auto b = testing::random_batch(rng, states, actions, 1 + i % 3, 2 + i % 5);
        const auto g = policy::actor_critic_gradient(b.policy, b.value, *b.storage, hp);
        const auto fd = testing::finite_difference(b.policy, b.value, *b.storage, hp, 1e-6);
        std::vector<double> value(g.value.weights);
        value.push_back(g.value.bias);
        worst = std::max({worst, testing::relative_error(g.policy.weights, fd.policy),
                          testing::relative_error(value, fd.value)});
    }
    const double elapsed = seconds_since(t0);
    return {worst <= 1e-5 && elapsed < 5.0,
            fmt("%d instances, max relative error %.3g <= 1e-5, %.3fs < 5s", instances, worst, elapsed)};
}

Outcome criterion5() {
    const auto t0 = std::chrono::steady_clock::now();
    constexpr std::int64_t kSteps = 499'712;  // 7808 epochs of 64 steps
    constexpr int kSeeds = 5;
    const double optimum = envs::optimal_return_oracle(envs::GridWorldSpec{}, 0.99);
    const double target = 0.95 * optimum;

    std::vector<std::vector<double>> hts, lock;
    double min_final = INFINITY;
    for (int s = 1; s <= kSeeds; ++s) {
        const auto c = grid_workload(kSteps, static_cast<std::uint64_t>(s));
        for (auto* out : {&hts, &lock}) {
            const auto r = out == &hts ? engine::run_hts(c) : baselines::run_lockstep(c);
            std::vector<double> curve;
            for (const auto& m : r.metrics) curve.push_back(m.avg_episode_return);
            min_final = std::min(min_final, curve.back());
            out->push_back(std::move(curve));
        }
    }
    // Curve agreement at ten evenly spaced checkpoints.
    const std::size_t epochs = hts[0].size();
    double worst_gap = 0.0, worst_allow = 0.0;
    bool agree = true;
    for (int k = 1; k <= 10; ++k) {
        const std::size_t e = epochs * k / 10 - 1;
        double mh = 0, ml = 0, vh = 0, vl = 0;
        for (int s = 0; s < kSeeds; ++s) {
            mh += hts[s][e] / kSeeds;
            ml += lock[s][e] / kSeeds;
        }
        for (int s = 0; s < kSeeds; ++s) {
            vh += (hts[s][e] - mh) * (hts[s][e] - mh) / (kSeeds - 1);
            vl += (lock[s][e] - ml) * (lock[s][e] - ml) / (kSeeds - 1);
        }
        const double allow = 3.0 * std::sqrt(vh / kSeeds + vl / kSeeds) + 0.01;
        const double gap = std::abs(mh - ml);
        if (!(gap <= allow)) agree = false;
        if (gap - allow > worst_gap - worst_allow || k == 1) {
            worst_gap = gap;
            worst_allow = allow;
        }
    }
    const double elapsed = seconds_since(t0);
    return {min_final >= target && agree && elapsed <= 300.0,
            fmt("min final return %.4f >= %.4f (95%% of optimal %.4f), curves agree=%d "
                "(tightest checkpoint gap %.4f vs allowance %.4f), %.1fs <= 300s",
                min_final, target, optimum, agree, worst_gap, worst_allow, elapsed)};
}

Outcome criterion6() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string failures;
    double worst = 0.0;
    int points = 0, bad = 0;
    for (std::int64_t n : {4, 16}) {
        for (std::int64_t alpha : {1, 4, 16}) {
            for (double beta : {1.0, 2.0}) {
                const analysis::RuntimeModelInput in{n, 16384, alpha, beta, 0.0};
                const double formula = analysis::expected_runtime(in);
                const auto sim = analysis::simulate_sync_rollout(in, 10'000, 1000 + points);
                const double rel = std::abs(formula - sim.mean) / sim.mean;
                worst = std::max(worst, rel);
                std::printf("  INFO claim1 n=%lld alpha=%lld beta=%g formula=%.4f simulated=%.4f rel=%.4f\n",
                            static_cast<long long>(n), static_cast<long long>(alpha), beta, formula,
                            sim.mean, rel);
                ++points;
                if (rel > 0.05) {
                    ++bad;
                    failures += fmt(" (n=%lld,alpha=%lld,beta=%g: %.2f%%)", static_cast<long long>(n),
                                    static_cast<long long>(alpha), beta, 100 * rel);
                }
            }
        }
    }
    const double elapsed = seconds_since(t0);
    return {bad == 0 && elapsed <= 120.0,
            fmt("%d/%d grid points within 5%%, max rel error %.2f%%, %.1fs <= 120s%s%s", points - bad,
                points, 100 * worst, elapsed, bad ? "; outside:" : "", failures.c_str())};
}

Outcome criterion7() {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    const double mu = 4000.0, lambda0 = 100.0;
    for (std::int64_t n : {8, 20, 32}) {  // n * rho0 = 0.2, 0.5, 0.8
        const double load = static_cast<double>(n) * lambda0 / mu;
        const double formula = analysis::expected_latency(n, lambda0, mu);
        const auto sim = analysis::simulate_mm1({n, lambda0, mu, 4'000'000}, 77 + n);
        const double rel = std::abs(sim.mean_length - formula) / formula;
        const double tv = analysis::geometric_tv_distance(sim.histogram, load);
        ok = ok && rel <= 0.05 && tv <= 0.02;
        detail += fmt("load %.1f: E[L]=%.4f sim=%.4f (%.2f%%) TV=%.4f; ", load, formula,
                      sim.mean_length, 100 * rel, tv);
    }
    const double spot = analysis::expected_latency(20, 100.0, 4000.0);
    ok = ok && std::abs(spot - 1.0) < 1e-12;
    const double elapsed = seconds_since(t0);
    ok = ok && elapsed <= 60.0;
    return {ok, detail + fmt("spot n=20 E[L]=%.6f; %.1fs <= 60s", spot, elapsed)};
}

double bench_ratio(envs::StepTimeKind kind) {
    engine::EngineConfig c;
    c.n_envs = 16;
    c.n_actors = 4;
    c.sync_interval = 16;
    c.total_steps = 16 * 16 * 60;
    c.learner_compute_time = 0.002;
    envs::SyntheticSpec s;
    s.clock = envs::ClockMode::Real;
    s.model.kind = kind;
    s.model.rate = 500.0;       // exponential mean 2 ms
    s.model.constant = 0.002;
    s.model.actor_compute_time = 0.0;
    c.env = s;
    std::vector<double> ratios;
    for (int rep = 0; rep < 3; ++rep) {
        const double hts = engine::run_hts(c).wall_time;
        const double lock = baselines::run_lockstep(c).wall_time;
        ratios.push_back(lock / hts);  // SPS ratio on identical step counts
    }
    std::sort(ratios.begin(), ratios.end());
    return ratios[1];
}

Outcome criterion8() {
    const double expo = bench_ratio(envs::StepTimeKind::Exponential);
    const double constant = bench_ratio(envs::StepTimeKind::Constant);
    return {expo >= 1.5 && constant >= 1.0,
            fmt("median hts/lockstep SPS ratio: exponential %.3f >= 1.5, constant %.3f >= 1.0 "
                "(n=16, alpha=16, 2 ms learner update)", expo, constant)};
}

Outcome criterion9() {
    // Fixed learner rate, growing actor count.
    std::vector<double> means;
    for (std::size_t actors : {2u, 4u, 8u}) {
        double total = 0.0;
        const int reps = 3;
        for (int rep = 0; rep < reps; ++rep) {
            baselines::AsyncQueueConfig a;
            a.queue_capacity = 64;
            a.base.n_envs = 1;
            a.base.n_actors = actors;
            a.base.sync_interval = 8;
            a.base.total_steps = 8 * 480;
            a.base.seed = 100 + rep;
            a.base.learner_compute_time = 0.001;
            envs::SyntheticSpec s;
            s.clock = envs::ClockMode::Real;
            s.model.kind = envs::StepTimeKind::Constant;
            s.model.constant = 0.0005;
            a.base.env = s;
            total += baselines::measure_lag(baselines::run_async(a).lags).mean;
        }
        means.push_back(total / reps);
    }
    const bool increasing = means[0] < means[1] && means[1] < means[2];

    // Vanishing-probability instance: behaviour logit +s on the logged action,
    // current logit -s.
    const double s = 8.0;
    auto behaviour = policy::PolicyParams::zeros(1, 2);
    behaviour.at(0, 0) = s;
    auto current = policy::PolicyParams::zeros(1, 2);
    current.at(0, 0) = -s;
    current.version = 5;
    const auto v = policy::ValueParams::zeros(1);
    buffers::RolloutStorage batch(1, 1);
    batch.reset(0, testing::snapshot_of(behaviour, v));
    batch.set_bootstrap(0, {1.0});
    buffers::Transition t;
    t.features = {1.0};
    t.action = 0;
    t.reward = 1.0;
    t.done = true;
    batch.append(t);
    policy::LearnerHyperparams hp;
    hp.entropy_coef = 0.0;
    const double fresh = policy::l2_norm(policy::actor_critic_gradient(behaviour, v, batch, hp).policy);
    const double stale = policy::l2_norm(policy::stale_gradient(current, v, batch, hp).policy);
    const double ratio = stale / fresh;
    return {increasing && ratio > 10.0,
            fmt("async mean lag for n_actors 2/4/8: %.2f / %.2f / %.2f (strictly increasing=%d); "
                "stale/fresh gradient norm %.3g > 10 (p_logged %.2e under current policy)",
                means[0], means[1], means[2], increasing, ratio, 1.0 / (1.0 + std::exp(2 * s)))};
}

Outcome criterion10() {
    const auto t0 = std::chrono::steady_clock::now();
    analysis::DelayedSgdConfig c;
    c.steps = 100'000;
    c.delay = 1;
    const auto d1 = analysis::delayed_sgd_experiment(c, 1);
    bool ok = true;
    for (const auto& cp : d1.checkpoints) ok = ok && cp.average_regret <= cp.envelope;
    c.delay = 0;
    const auto d0 = analysis::delayed_sgd_experiment(c, 1);
    const double envelope = d1.checkpoints.back().envelope;
    const double r1 = d1.checkpoints.back().average_regret;
    const double r0 = d0.checkpoints.back().average_regret;
    ok = ok && r0 <= envelope && r1 <= envelope;
    const double elapsed = seconds_since(t0);
    ok = ok && elapsed <= 30.0;
    return {ok, fmt("T=1e5: regret tau=1 %.3g, tau=0 %.3g, envelope 4FL*sqrt(1/T) %.3g; %.2fs <= 30s",
                    r1, r0, envelope, elapsed)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"determinism of cmd_train (stripped metrics and final params)", criterion1},
        {"actor-count invariance of final parameters", criterion2},
        {"policy lag 1 for hts, 0 for lockstep", criterion3},
        {"actor-critic gradient vs finite differences", criterion4},
        {"GridWorld learning at parity, hts vs lockstep", criterion5},
        {"expected runtime formula vs simulation", criterion6},
        {"queue latency formula and geometric occupancy law", criterion7},
        {"throughput hts vs lockstep on real-sleep synthetic env", criterion8},
        {"stale-policy pathology in the async baseline", criterion9},
        {"delayed SGD average regret envelope", criterion10},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("%s criterion %zu: %s -- %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
