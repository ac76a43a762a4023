#pragma once

#include <cstddef>
#include <span>

#include "htsrl/engine.hpp"

namespace htsrl::baselines {

using engine::LagSample;

struct AsyncQueueConfig {
    engine::EngineConfig base;
    std::size_t queue_capacity = 16;

    void validate() const;
};

struct LagSummary {
    double mean = 0.0;
    double p95 = 0.0;
};

/// A2C-style alternation: all environments roll out sync_interval steps
/// (with a barrier every step, or once per interval), then one non-delayed
/// update on the batch just collected.
engine::RunResult run_lockstep(const engine::EngineConfig& config,
                               const engine::RunOptions& options = {});

/// Queue-based asynchronous actor-learner. Each actor owns one environment
/// and pushes sync_interval-step fragments tagged with the behavior version;
/// the learner applies the uncorrected stale gradient at its current
/// parameters. Full queue drops the oldest fragment. Not deterministic.
engine::RunResult run_async(const AsyncQueueConfig& config,
                            const engine::RunOptions& options = {});

/// Mean and nearest-rank 95th percentile. UsageError on empty input.
LagSummary measure_lag(std::span<const LagSample> samples);

}  // namespace htsrl::baselines
