#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

namespace htsrl::envs {

struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

struct GridWorldSpec {
    int width = 5;
    int height = 5;
    Cell start{0, 0};
    Cell goal{4, 4};
    int horizon = 50;
    double step_reward = 0.0;
    double goal_reward = 1.0;

    /// Throws UsageError when an invariant is violated.
    void validate() const;
    friend bool operator==(const GridWorldSpec&, const GridWorldSpec&) = default;
};

enum class StepTimeKind { Constant, Exponential, Gamma };

/// Distribution of a single environment step duration.
struct StepTimeModel {
    StepTimeKind kind = StepTimeKind::Constant;
    double constant = 0.001;         // seconds, Constant only
    double rate = 1.0;                // 1/seconds, Exponential and Gamma
    double shape = 1.0;               // Gamma only
    double actor_compute_time = 0.0;  // seconds per actor forward batch

    void validate() const;
    double mean() const;
    friend bool operator==(const StepTimeModel&, const StepTimeModel&) = default;
};

enum class ClockMode {
    Virtual,  // delays are accumulated arithmetically
    Real,     // delays are slept
};

struct SyntheticSpec {
    StepTimeModel model;
    int horizon = 100;
    ClockMode clock = ClockMode::Real;

    void validate() const;
    friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

using EnvSpec = std::variant<GridWorldSpec, SyntheticSpec>;

struct EnvState {
    std::vector<double> features;
    int step_index = 0;
    bool done = false;
};

struct StepResult {
    EnvState state;
    double reward = 0.0;
    bool done = false;
};

/// Common stepping interface. An instance is owned by one worker at a time.
class Environment {
public:
    virtual ~Environment() = default;

    virtual EnvState reset(std::uint64_t episode_seed) = 0;
    virtual StepResult step(int action) = 0;
    virtual std::size_t feature_dim() const = 0;
    virtual std::size_t action_count() const = 0;
};

/// Deterministic grid with N/S/E/W moves (actions 0..3) and wall clipping.
class GridWorld final : public Environment {
public:
    static constexpr int kNorth = 0;
    static constexpr int kSouth = 1;
    static constexpr int kEast = 2;
    static constexpr int kWest = 3;

    explicit GridWorld(GridWorldSpec spec);

    EnvState reset(std::uint64_t episode_seed) override;
    StepResult step(int action) override;
    std::size_t feature_dim() const override;
    std::size_t action_count() const override { return 4; }

    Cell position() const { return pos_; }
    std::size_t cell_index(Cell c) const;

private:
    EnvState observe() const;

    GridWorldSpec spec_;
    Cell pos_;
    int steps_ = 0;
    bool done_ = true;
};

/// Dummy-state environment whose only observable effect is its step time.
/// Step delays are a pure function of (run_seed, env_id, lifetime step count).
class SyntheticEnv final : public Environment {
public:
    SyntheticEnv(SyntheticSpec spec, std::uint64_t env_id, std::uint64_t run_seed);

    EnvState reset(std::uint64_t episode_seed) override;
    StepResult step(int action) override;
    std::size_t feature_dim() const override { return 1; }
    std::size_t action_count() const override { return 2; }

    /// Sum of all delays drawn so far (both clock modes).
    double elapsed() const { return elapsed_; }

private:
    EnvState observe() const;

    SyntheticSpec spec_;
    std::uint64_t env_id_;
    std::uint64_t run_seed_;
    std::uint64_t lifetime_steps_ = 0;
    double elapsed_ = 0.0;
    int steps_ = 0;
    bool done_ = true;
};

std::unique_ptr<Environment> make_environment(const EnvSpec& spec, std::uint64_t env_id,
                                              std::uint64_t run_seed);
std::size_t feature_dim(const EnvSpec& spec);
std::size_t action_count(const EnvSpec& spec);
void validate(const EnvSpec& spec);

/// Actor compute time implied by the env description (zero for GridWorld).
double actor_compute_time(const EnvSpec& spec);

/// Optimal expected discounted return from the start cell, by value
/// iteration to a 1e-10 fixed point. Assumes the horizon does not cut the
/// shortest path.
double optimal_return_oracle(const GridWorldSpec& spec, double discount);

/// One step duration in seconds, fully determined by (model, rng_word).
double sample_step_delay(const StepTimeModel& model, std::uint64_t rng_word);

}  // namespace htsrl::envs
