#include "htsrl/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "htsrl/analysis.hpp"
#include "htsrl/baselines.hpp"
#include "htsrl/config.hpp"
#include "htsrl/engine.hpp"
#include "htsrl/errors.hpp"
#include "htsrl/metrics_sink.hpp"

namespace htsrl::cli {

namespace {

struct RunOverrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> actors;
    std::optional<std::size_t> alpha;
    std::optional<std::size_t> envs;
    std::optional<std::int64_t> steps;
    std::optional<std::string> kind;
    std::optional<std::string> metrics;
    std::optional<std::string> format;
    bool strip_timing = false;
    std::string params_out;
};

void add_run_options(CLI::App& cmd, RunOverrides& o) {
    cmd.add_option("config", o.config_path, "Run config file (default: $HTSRL_CONFIG)");
    cmd.add_option("--seed", o.seed, "Override engine.seed");
    cmd.add_option("--actors", o.actors, "Override engine.n_actors");
    cmd.add_option("--alpha", o.alpha, "Override engine.sync_interval");
    cmd.add_option("--envs", o.envs, "Override engine.n_envs");
    cmd.add_option("--steps", o.steps, "Override engine.total_steps");
    cmd.add_option("--engine", o.kind, "Override engine.kind")
        ->check(CLI::IsMember({"hts", "lockstep", "async"}));
    cmd.add_option("--metrics", o.metrics, "Override output.metrics ('-' for stdout)");
    cmd.add_option("--format", o.format, "Override output.format")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    cmd.add_flag("--strip-timing", o.strip_timing, "Omit wall_time and sps from metrics");
}

config::RunConfig resolve_config(const RunOverrides& o) {
    std::string path = o.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv(kConfigEnvVar)) path = env;
    }
    if (path.empty()) {
        throw UsageError(std::string("no config file given and ") + kConfigEnvVar + " is unset");
    }
    config::RunConfig cfg = config::load_config(path);
    if (o.seed) cfg.engine.seed = *o.seed;
    if (o.actors) cfg.engine.n_actors = *o.actors;
    if (o.alpha) cfg.engine.sync_interval = *o.alpha;
    if (o.envs) cfg.engine.n_envs = *o.envs;
    if (o.steps) cfg.engine.total_steps = *o.steps;
    if (o.kind) {
        cfg.engine.kind = *o.kind == "hts"        ? engine::EngineKind::Hts
                          : *o.kind == "lockstep" ? engine::EngineKind::Lockstep
                                                  : engine::EngineKind::Async;
    }
    if (o.metrics) cfg.output.metrics = *o.metrics;
    if (o.format) {
        cfg.output.format = *o.format == "csv" ? config::MetricsFormat::Csv
                                               : config::MetricsFormat::Jsonl;
    }
    if (o.strip_timing) cfg.output.strip_timing = true;
    config::validate(cfg);
    return cfg;
}

engine::RunResult run_engine(const config::RunConfig& cfg, const engine::RunOptions& options) {
    switch (cfg.engine.kind) {
        case engine::EngineKind::Hts:
            return engine::run_hts(cfg.engine, options);
        case engine::EngineKind::Lockstep:
            return baselines::run_lockstep(cfg.engine, options);
        case engine::EngineKind::Async:
            return baselines::run_async({cfg.engine, cfg.queue_capacity}, options);
    }
    throw UsageError("unknown engine kind");
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::istringstream is(item);
        T v{};
        if (!(is >> v) || !(is >> std::ws).eof()) {
            throw UsageError(std::string(what) + ": bad list element '" + item + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw UsageError(std::string(what) + ": empty list");
    return out;
}

int cmd_train(const RunOverrides& o, std::ostream& out, std::ostream& err) {
    const config::RunConfig cfg = resolve_config(o);
    auto sink = metrics::MetricsSink::open(cfg.output);
    engine::RunOptions options;
    options.on_metrics = [&](const engine::MetricsRecord& r) { sink->write(r); };
    const engine::RunResult result = run_engine(cfg, options);

    if (!o.params_out.empty()) {
        std::ofstream f(o.params_out, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + o.params_out);
        f << params_to_json(result.final_params) << '\n';
    }

    std::ostream& summary = (cfg.output.metrics.empty() || cfg.output.metrics == "-") ? err : out;
    const double final_return =
        result.metrics.empty() ? std::nan("") : result.metrics.back().avg_episode_return;
    const double sps = static_cast<double>(result.transitions) / std::max(result.wall_time, 1e-9);
    double mean_lag = std::nan("");
    if (!result.lags.empty()) mean_lag = baselines::measure_lag(result.lags).mean;
    char digest[32];
    std::snprintf(digest, sizeof digest, "%016llx",
                  static_cast<unsigned long long>(engine::digest(result.final_params)));
    summary << "engine=" << config::to_string(cfg.engine.kind) << " epochs=" << result.metrics.size()
            << " env_steps=" << result.transitions << " final_avg_return=" << num(final_return)
            << " sps=" << num(sps) << " mean_lag=" << num(mean_lag)
            << " dropped_fragments=" << result.dropped_fragments << " params_digest=" << digest
            << '\n';
    return kExitOk;
}

struct RuntimeArgs {
    std::int64_t n = 16;
    std::int64_t K = 16384;
    std::int64_t alpha = 4;
    double beta = 2.0;
    double c = 0.0;
    std::size_t replications = 10'000;
    std::uint64_t seed = 1;
    std::string sweep;  // "", "alpha" or "beta"
    std::string grid;
};

int cmd_simulate_runtime(const RuntimeArgs& a, std::ostream& out) {
    std::vector<analysis::RuntimeModelInput> points;
    analysis::RuntimeModelInput base{a.n, a.K, a.alpha, a.beta, a.c};
    if (a.sweep.empty()) {
        points.push_back(base);
    } else if (a.sweep == "alpha") {
        const std::string grid = a.grid.empty() ? "1,2,4,8,16" : a.grid;
        for (auto alpha : parse_list<std::int64_t>(grid, "--grid")) {
            auto p = base;
            p.alpha = alpha;
            points.push_back(p);
        }
    } else {
        const std::string grid = a.grid.empty() ? "0.5,1,2,4,8" : a.grid;
        for (auto beta : parse_list<double>(grid, "--grid")) {
            auto p = base;
            p.beta = beta;
            points.push_back(p);
        }
    }
    out << "n,K,alpha,beta,c,formula,simulated,rel_error\n";
    for (const auto& p : points) {
        const double formula = analysis::expected_runtime(p);
        const auto sim = analysis::simulate_sync_rollout(p, a.replications, a.seed);
        out << p.n << ',' << p.K << ',' << p.alpha << ',' << num(p.beta) << ',' << num(p.c) << ','
            << num(formula) << ',' << num(sim.mean) << ','
            << num(std::abs(formula - sim.mean) / sim.mean) << '\n';
    }
    return kExitOk;
}

struct LatencyArgs {
    std::string n_grid = "1,5,10,15,20,25,30,35,39,40";
    double lambda0 = 100.0;
    double mu = 4000.0;
    std::int64_t events = 1'000'000;
    std::uint64_t seed = 1;
};

int cmd_simulate_latency(const LatencyArgs& a, std::ostream& out) {
    out << "n,load,formula,simulated,tv_distance\n";
    for (auto n : parse_list<std::int64_t>(a.n_grid, "--n-grid")) {
        const double load = static_cast<double>(n) * a.lambda0 / a.mu;
        out << n << ',' << num(load) << ',';
        if (load >= 1.0) {
            out << "unstable,,\n";
            continue;
        }
        analysis::QueueSimConfig q;
        q.n = n;
        q.lambda0 = a.lambda0;
        q.mu = a.mu;
        q.horizon_events = a.events;
        const auto sim = analysis::simulate_mm1(q, a.seed);
        out << num(analysis::expected_latency(n, a.lambda0, a.mu)) << ',' << num(sim.mean_length)
            << ',' << num(analysis::geometric_tv_distance(sim.histogram, load)) << '\n';
    }
    return kExitOk;
}

struct SgdArgs {
    std::int64_t delay = 1;
    std::int64_t steps = 100'000;
    std::uint64_t seed = 1;
    std::size_t seeds = 1;
};

int cmd_delayed_sgd(const SgdArgs& a, std::ostream& out) {
    if (a.seeds < 1) throw UsageError("--seeds must be >= 1");
    analysis::DelayedSgdConfig cfg;
    cfg.delay = a.delay;
    cfg.steps = a.steps;
    std::vector<analysis::RegretCheckpoint> mean;
    for (std::size_t s = 0; s < a.seeds; ++s) {
        const auto r = analysis::delayed_sgd_experiment(cfg, a.seed + s);
        if (mean.empty()) {
            mean = r.checkpoints;
            for (auto& cp : mean) {
                cp.average_regret = 0.0;
                cp.envelope = 0.0;
            }
        }
        for (std::size_t i = 0; i < mean.size(); ++i) {
            mean[i].average_regret += r.checkpoints[i].average_regret / static_cast<double>(a.seeds);
            mean[i].envelope += r.checkpoints[i].envelope / static_cast<double>(a.seeds);
        }
    }
    out << "t,average_regret,envelope\n";
    for (const auto& cp : mean) {
        out << cp.t << ',' << num(cp.average_regret) << ',' << num(cp.envelope) << '\n';
    }
    return kExitOk;
}

int cmd_bench(const RunOverrides& o, const std::string& envs_sweep, std::ostream& out) {
    config::RunConfig cfg = resolve_config(o);
    const auto* synth = std::get_if<envs::SyntheticSpec>(&cfg.engine.env);
    if (!synth || synth->clock != envs::ClockMode::Real) {
        throw config::ConfigError(o.config_path, 0, "bench needs env.kind = synthetic with clock = real");
    }
    std::vector<std::size_t> sweep{cfg.engine.n_envs};
    if (!envs_sweep.empty()) sweep = parse_list<std::size_t>(envs_sweep, "--envs-sweep");

    out << "n_envs,hts_wall,lockstep_wall,hts_sps,lockstep_sps,ratio\n";
    for (std::size_t n : sweep) {
        engine::EngineConfig point = cfg.engine;
        point.n_envs = n;
        point.validate();
        const auto hts = engine::run_hts(point);
        const auto lock = baselines::run_lockstep(point);
        const double steps = static_cast<double>(point.total_steps);
        const double hts_sps = steps / hts.wall_time;
        const double lock_sps = steps / lock.wall_time;
        out << n << ',' << num(hts.wall_time) << ',' << num(lock.wall_time) << ',' << num(hts_sps)
            << ',' << num(lock_sps) << ',' << num(hts_sps / lock_sps) << '\n';
    }
    return kExitOk;
}

}  // namespace

std::string params_to_json(const buffers::ParamSnapshot& params) {
    nlohmann::ordered_json j;
    j["policy"]["feature_dim"] = params.policy.feature_dim;
    j["policy"]["action_count"] = params.policy.action_count;
    j["policy"]["version"] = params.policy.version;
    j["policy"]["weights"] = params.policy.weights;
    j["value"]["version"] = params.value.version;
    j["value"]["bias"] = params.value.bias;
    j["value"]["weights"] = params.value.weights;
    return j.dump();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Deterministic actor-learner engine and runtime/latency analyses", "htsrl"};
    app.require_subcommand(1);

    RunOverrides train;
    auto* train_cmd = app.add_subcommand("train", "Run an engine and stream per-epoch metrics");
    add_run_options(*train_cmd, train);
    train_cmd->add_option("--params-out", train.params_out, "Write final parameters as JSON");

    RuntimeArgs rt;
    auto* rt_cmd = app.add_subcommand("simulate-runtime", "Runtime formula vs simulation");
    rt_cmd->add_option("--n", rt.n, "Environments");
    rt_cmd->add_option("--K", rt.K, "Total steps");
    rt_cmd->add_option("--alpha", rt.alpha, "Synchronization interval");
    rt_cmd->add_option("--beta", rt.beta, "Exponential step-time rate");
    rt_cmd->add_option("--c", rt.c, "Actor compute seconds per step");
    rt_cmd->add_option("--replications", rt.replications, "Monte-Carlo replications");
    rt_cmd->add_option("--seed", rt.seed, "Simulation seed");
    rt_cmd->add_option("--sweep", rt.sweep, "Sweep variable")->check(CLI::IsMember({"alpha", "beta"}));
    rt_cmd->add_option("--grid", rt.grid, "Comma-separated sweep values");

    LatencyArgs lat;
    auto* lat_cmd = app.add_subcommand("simulate-latency", "Queue latency formula vs simulation");
    lat_cmd->add_option("--n-grid", lat.n_grid, "Comma-separated actor counts");
    lat_cmd->add_option("--lambda0", lat.lambda0, "Arrivals per second per actor");
    lat_cmd->add_option("--mu", lat.mu, "Services per second");
    lat_cmd->add_option("--events", lat.events, "Simulated events per point");
    lat_cmd->add_option("--seed", lat.seed, "Simulation seed");

    SgdArgs sgd;
    auto* sgd_cmd = app.add_subcommand("delayed-sgd", "Average regret of delayed SGD");
    sgd_cmd->add_option("--delay", sgd.delay, "Gradient delay tau");
    sgd_cmd->add_option("--steps", sgd.steps, "Number of SGD steps T");
    sgd_cmd->add_option("--seed", sgd.seed, "First seed");
    sgd_cmd->add_option("--seeds", sgd.seeds, "Seeds averaged");

    RunOverrides bench;
    std::string envs_sweep;
    auto* bench_cmd = app.add_subcommand("bench", "HTS vs lockstep throughput");
    add_run_options(*bench_cmd, bench);
    bench_cmd->add_option("--envs-sweep", envs_sweep, "Comma-separated n_envs values");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train, out, err);
        if (rt_cmd->parsed()) return cmd_simulate_runtime(rt, out);
        if (lat_cmd->parsed()) return cmd_simulate_latency(lat, out);
        if (sgd_cmd->parsed()) return cmd_delayed_sgd(sgd, out);
        if (bench_cmd->parsed()) return cmd_bench(bench, envs_sweep, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numeric abort: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace htsrl::cli
