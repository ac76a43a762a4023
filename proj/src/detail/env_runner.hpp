#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "htsrl/buffers.hpp"
#include "htsrl/envs.hpp"
#include "htsrl/seed.hpp"

namespace htsrl::engine::detail {

/// One executor's view of its environment: current observation, episode
/// bookkeeping and auto-reset. Shared by all engines so that identical seeds
/// produce identical transitions regardless of the orchestration.
class EnvRunner {
public:
    struct Outcome {
        buffers::Transition transition;
        std::optional<double> episode_return;
    };

    EnvRunner(std::unique_ptr<envs::Environment> env, int env_id, std::uint64_t run_seed,
              double discount)
        : env_(std::move(env)), env_id_(env_id), run_seed_(run_seed), discount_(discount) {
        state_ = env_->reset(reset_seed());
    }

    int env_id() const { return env_id_; }
    const envs::EnvState& state() const { return state_; }

    std::uint64_t sample_word(std::int64_t step_index) const {
        return derive_step_seed(run_seed_ ^ kActionStream, static_cast<std::uint64_t>(env_id_),
                                static_cast<std::uint64_t>(step_index));
    }

    /// Applies `action`; `slot_env_id` is the id recorded in the transition
    /// (the async engine stores fragments under a local id).
    Outcome step(int action, std::int64_t step_index, int slot_env_id) {
        Outcome out;
        out.transition.env_id = slot_env_id;
        out.transition.step_index = step_index;
        out.transition.features = std::move(state_.features);
        out.transition.action = action;

        envs::StepResult r = env_->step(action);
        out.transition.reward = r.reward;
        out.transition.done = r.done;
        episode_return_ += weight_ * r.reward;
        weight_ *= discount_;
        if (r.done) {
            out.episode_return = episode_return_;
            episode_return_ = 0.0;
            weight_ = 1.0;
            ++episodes_;
            state_ = env_->reset(reset_seed());
        } else {
            state_ = std::move(r.state);
        }
        return out;
    }

    Outcome step(int action, std::int64_t step_index) {
        return step(action, step_index, env_id_);
    }

private:
    std::uint64_t reset_seed() const {
        return derive_step_seed(run_seed_ ^ kResetStream, static_cast<std::uint64_t>(env_id_),
                                episodes_);
    }

    std::unique_ptr<envs::Environment> env_;
    int env_id_;
    std::uint64_t run_seed_;
    double discount_;
    envs::EnvState state_;
    double episode_return_ = 0.0;
    double weight_ = 1.0;
    std::uint64_t episodes_ = 0;
};

}  // namespace htsrl::engine::detail
