#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "htsrl/buffers.hpp"
#include "htsrl/envs.hpp"
#include "htsrl/policy.hpp"

namespace htsrl::engine {

enum class EngineKind { Hts, Lockstep, Async };

/// Lockstep synchronization granularity: every step (A2C) or every
/// sync_interval steps.
enum class LockstepBarrier { Step, Interval };

struct EngineConfig {
    EngineKind kind = EngineKind::Hts;
    std::size_t n_envs = 8;
    std::size_t n_actors = 4;
    std::size_t sync_interval = 8;
    std::int64_t total_steps = 200'000;
    std::uint64_t seed = 1;
    policy::LearnerHyperparams hyperparams;
    envs::EnvSpec env = envs::GridWorldSpec{};
    /// Seconds slept per gradient update, standing in for backward-pass cost.
    double learner_compute_time = 0.0;
    LockstepBarrier lockstep_barrier = LockstepBarrier::Step;

    /// Throws UsageError naming the violated constraint.
    void validate() const;
    std::int64_t epochs() const;
    std::int64_t steps_per_epoch() const;

    friend bool operator==(const EngineConfig&, const EngineConfig&) = default;
};

struct MetricsRecord {
    std::int64_t epoch = 0;
    std::int64_t env_steps = 0;
    double wall_time = 0.0;  // seconds since run start
    double sps = 0.0;        // steps per second over this epoch
    double avg_episode_return = 0.0;  // NaN until the first episode completes
    std::int64_t policy_lag = 0;
};

/// k = target version - behavior version at one parameter update.
struct LagSample {
    std::int64_t update_index = 0;
    std::int64_t lag = 0;
};

/// Wall-clock phases of one epoch, seconds since run start. learn_* are
/// negative when no update ran in the epoch.
struct EpochTrace {
    double rollout_begin = 0.0;
    double rollout_end = 0.0;
    double learn_begin = -1.0;
    double learn_end = -1.0;
};

struct RunOptions {
    std::function<void(const MetricsRecord&)> on_metrics;
    /// Copy every transition (canonical order per epoch) into the result.
    bool keep_transitions = false;
};

struct RunResult {
    std::vector<MetricsRecord> metrics;
    buffers::ParamSnapshot final_params;
    std::vector<LagSample> lags;
    std::vector<EpochTrace> traces;
    /// Digest of the parameters after each update, in update order.
    std::vector<std::uint64_t> param_digests;
    std::uint64_t transitions = 0;
    /// Order-sensitive digest over all transitions in canonical per-epoch order.
    std::uint64_t trajectory_digest = 0;
    std::uint64_t dropped_fragments = 0;
    double wall_time = 0.0;
    std::vector<buffers::Transition> all_transitions;
};

/// Running mean over the most recent 100 completed episodes.
class EpisodeTracker {
public:
    static constexpr std::size_t kWindow = 100;

    void add(double episode_return);
    double mean() const;  // NaN when empty
    std::uint64_t completed() const { return completed_; }

private:
    std::vector<double> ring_;
    std::size_t next_ = 0;
    std::uint64_t completed_ = 0;
};

std::uint64_t digest(const buffers::ParamSnapshot& params);
std::uint64_t digest_transition(std::uint64_t seed, const buffers::Transition& t);

/// Zero-initialized parameters at version 0 for the configured environment.
buffers::SnapshotPtr initial_snapshot(const EngineConfig& config);

/// Concurrent rollout and learning over double storages with one-step
/// delayed gradients. Deterministic in (config minus n_actors).
RunResult run_hts(const EngineConfig& config, const RunOptions& options = {});

}  // namespace htsrl::engine
