#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "htsrl/config.hpp"
#include "htsrl/metrics_sink.hpp"

using namespace htsrl;
using namespace htsrl::config;

namespace {

const char* kGrid = R"(# sample
[engine]
kind = hts
n_envs = 4
n_actors = 2
sync_interval = 8
total_steps = 3200
seed = 9

[learner]
discount = 0.95
learning_rate = 0.25

[env]
kind = gridworld
width = 4
height = 3
goal_x = 3
goal_y = 2

[output]
metrics = out.csv
format = jsonl
strip_timing = true
)";

int error_line(const std::string& text) {
    try {
        parse_config(text, "t.ini");
    } catch (const ConfigError& e) {
        return e.line();
    }
    return -1;
}

}  // namespace

TEST(Config, ParsesValues) {
    const auto c = parse_config(kGrid);
    EXPECT_EQ(c.engine.kind, engine::EngineKind::Hts);
    EXPECT_EQ(c.engine.n_envs, 4u);
    EXPECT_EQ(c.engine.sync_interval, 8u);
    EXPECT_EQ(c.engine.seed, 9u);
    EXPECT_EQ(c.engine.hyperparams.discount, 0.95);
    EXPECT_EQ(c.engine.hyperparams.nstep, 5);
    const auto& g = std::get<envs::GridWorldSpec>(c.engine.env);
    EXPECT_EQ(g.width, 4);
    EXPECT_EQ(g.goal, (envs::Cell{3, 2}));
    EXPECT_EQ(c.output.metrics, "out.csv");
    EXPECT_EQ(c.output.format, MetricsFormat::Jsonl);
    EXPECT_TRUE(c.output.strip_timing);
}

TEST(Config, RoundTripIsIdempotent) {
    const auto c = parse_config(kGrid);
    const std::string once = serialize(c);
    const auto back = parse_config(once);
    EXPECT_EQ(back, c);
    EXPECT_EQ(serialize(back), once);

    RunConfig s;
    envs::SyntheticSpec spec;
    spec.model.kind = envs::StepTimeKind::Gamma;
    spec.model.shape = 2.5;
    spec.model.rate = 0.1 + 0.2;  // not exactly representable
    spec.clock = envs::ClockMode::Virtual;
    s.engine.env = spec;
    s.engine.kind = engine::EngineKind::Async;
    s.engine.hyperparams.entropy_coef = 1.0 / 3.0;
    s.queue_capacity = 3;
    s.engine.total_steps = 64 * 10;
    EXPECT_EQ(parse_config(serialize(s)), s);
}

TEST(Config, UnknownKeyReportsLine) {
    EXPECT_EQ(error_line("[engine]\nn_envs = 2\nbogus = 1\n"), 3);
    EXPECT_EQ(error_line("[nonsense]\n"), 1);
    EXPECT_EQ(error_line("[engine]\nn_envs = 2\nn_envs = 2\n"), 3);
    EXPECT_EQ(error_line("n_envs = 2\n"), 1);
    EXPECT_EQ(error_line("[engine]\nn_envs = two\n"), 2);
    EXPECT_EQ(error_line("[engine]\nkind = fast\n"), 2);
    // A gridworld key under a synthetic env is foreign.
    EXPECT_EQ(error_line("[env]\nkind = synthetic\nwidth = 3\n"), 3);
}

TEST(Config, InvariantViolationNamesConstraintAndLine) {
    const std::string text = "[engine]\nn_envs = 3\nsync_interval = 4\ntotal_steps = 100\n";
    try {
        parse_config(text, "t.ini");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 4);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("t.ini:4"), std::string::npos);
        EXPECT_NE(msg.find("divisible by n_envs * sync_interval"), std::string::npos);
    }
    EXPECT_EQ(error_line("[env]\ngoal_x = 0\ngoal_y = 0\n"), 2);
    EXPECT_EQ(error_line("[learner]\ndiscount = 1.5\n"), 2);
}

TEST(Config, CommentsAndWhitespace) {
    const auto c = parse_config("  [engine]  ; trailing\n\tseed=3 # comment\n\n");
    EXPECT_EQ(c.engine.seed, 3u);
}

TEST(MetricsSink, CsvAndStripped) {
    engine::MetricsRecord r{2, 64, 0.5, 128.0, 0.25, 1};
    std::ostringstream full, stripped;
    {
        metrics::MetricsSink a(full, MetricsFormat::Csv, false);
        a.write(r);
        metrics::MetricsSink b(stripped, MetricsFormat::Csv, true);
        b.write(r);
        r.avg_episode_return = std::nan("");
        b.write(r);
    }
    EXPECT_EQ(full.str(), "epoch,env_steps,wall_time,sps,avg_episode_return,policy_lag\n2,64,0.5,128,0.25,1\n");
    EXPECT_EQ(stripped.str(), "epoch,env_steps,avg_episode_return,policy_lag\n2,64,0.25,1\n2,64,nan,1\n");
}

TEST(MetricsSink, Jsonl) {
    engine::MetricsRecord r{0, 8, 1.0, 8.0, std::nan(""), 0};
    std::ostringstream out;
    metrics::MetricsSink s(out, MetricsFormat::Jsonl, true);
    s.write(r);
    EXPECT_EQ(out.str(), "{\"epoch\":0,\"env_steps\":8,\"avg_episode_return\":null,\"policy_lag\":0}\n");
    EXPECT_EQ(s.rows(), 1u);
}
