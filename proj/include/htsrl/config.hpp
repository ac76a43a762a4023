#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "htsrl/engine.hpp"
#include "htsrl/errors.hpp"

namespace htsrl::config {

enum class MetricsFormat { Csv, Jsonl };

struct OutputConfig {
    std::string metrics;  // empty writes to standard output
    MetricsFormat format = MetricsFormat::Csv;
    bool strip_timing = false;

    friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct RunConfig {
    engine::EngineConfig engine;
    std::size_t queue_capacity = 16;  // async engine only
    OutputConfig output;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parse or validation failure. `line` is 0 when no line applies.
class ConfigError : public UsageError {
public:
    ConfigError(std::string source, int line, const std::string& message);
    int line() const { return line_; }

private:
    int line_;
};

/// INI-style text:
///
///   [engine]  kind, n_envs, n_actors, sync_interval, total_steps, seed,
///             queue_capacity, lockstep_barrier
///   [learner] discount, nstep, entropy_coef, value_coef, learning_rate,
///             compute_time
///   [env]     kind = gridworld: width, height, start_x, start_y, goal_x,
///                    goal_y, horizon, step_reward, goal_reward
///             kind = synthetic: step_time, constant, rate, shape,
///                    actor_compute_time, horizon, clock
///   [output]  metrics, format, strip_timing
///
/// '#' or ';' start comments. Unknown sections and keys, duplicates, and
/// keys foreign to the chosen env kind are rejected. The result is validated.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

/// Canonical text; parse_config(serialize(c)) == c.
std::string serialize(const RunConfig& config);

/// All engine and env invariants; throws ConfigError with line 0.
void validate(const RunConfig& config);

std::string to_string(engine::EngineKind kind);
std::string to_string(MetricsFormat format);

}  // namespace htsrl::config
