#pragma once

#include "htsrl/buffers.hpp"
#include "htsrl/engine.hpp"

namespace htsrl::engine::detail {

/// Folds a completed storage into the run result: transition count and
/// digest, optional copies, and episode returns in canonical env order.
void absorb_epoch(const buffers::RolloutStorage& storage, EpisodeTracker& tracker,
                  RunResult& result, bool keep_transitions);

buffers::SnapshotPtr make_snapshot(policy::PolicyParams policy, policy::ValueParams value);

}  // namespace htsrl::engine::detail
