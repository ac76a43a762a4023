#include "htsrl/envs.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "htsrl/errors.hpp"
#include "htsrl/seed.hpp"

namespace htsrl::envs {

namespace {

bool inside(const GridWorldSpec& spec, Cell c) {
    return c.x >= 0 && c.y >= 0 && c.x < spec.width && c.y < spec.height;
}

std::string cell_str(Cell c) {
    return "(" + std::to_string(c.x) + ", " + std::to_string(c.y) + ")";
}

double exponential_from_unit(double u, double rate) { return -std::log1p(-u) / rate; }

// Marsaglia-Tsang for shape >= 1, shape boost for shape < 1.
double gamma_unit_rate(double shape, SplitMix64& gen) {
    if (shape < 1.0) {
        const double boost = std::pow(1.0 - gen.uniform(), 1.0 / shape);
        return gamma_unit_rate(shape + 1.0, gen) * boost;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            // Box-Muller, one normal per pair of uniforms.
            const double u1 = 1.0 - gen.uniform();
            const double u2 = gen.uniform();
            x = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = 1.0 - gen.uniform();
        if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
            return d * v;
        }
    }
}

}  // namespace

void GridWorldSpec::validate() const {
    if (width < 1 || height < 1) {
        throw UsageError("gridworld: width and height must be >= 1");
    }
    if (!inside(*this, start)) {
        throw UsageError("gridworld: start " + cell_str(start) + " outside the grid");
    }
    if (!inside(*this, goal)) {
        throw UsageError("gridworld: goal " + cell_str(goal) + " outside the grid");
    }
    if (start == goal) {
        throw UsageError("gridworld: start must differ from goal");
    }
    if (horizon < 1) {
        throw UsageError("gridworld: horizon must be >= 1");
    }
}

void StepTimeModel::validate() const {
    if (!(actor_compute_time >= 0.0)) {
        throw UsageError("step time model: actor_compute_time must be >= 0");
    }
    switch (kind) {
        case StepTimeKind::Constant:
            if (!(constant >= 0.0) || !std::isfinite(constant)) {
                throw UsageError("step time model: constant step time must be >= 0");
            }
            break;
        case StepTimeKind::Gamma:
            if (!(shape > 0.0) || !std::isfinite(shape)) {
                throw UsageError("step time model: shape must be > 0");
            }
            [[fallthrough]];
        case StepTimeKind::Exponential:
            if (!(rate > 0.0) || !std::isfinite(rate)) {
                throw UsageError("step time model: rate must be > 0");
            }
            break;
    }
}

double StepTimeModel::mean() const {
    switch (kind) {
        case StepTimeKind::Constant: return constant;
        case StepTimeKind::Exponential: return 1.0 / rate;
        case StepTimeKind::Gamma: return shape / rate;
    }
    return 0.0;
}

void SyntheticSpec::validate() const {
    model.validate();
    if (horizon < 1) {
        throw UsageError("synthetic env: horizon must be >= 1");
    }
}

// ---------------------------------------------------------------------------

GridWorld::GridWorld(GridWorldSpec spec) : spec_(spec), pos_(spec.start) {
    spec_.validate();
}

std::size_t GridWorld::feature_dim() const {
    return static_cast<std::size_t>(spec_.width) * static_cast<std::size_t>(spec_.height);
}

std::size_t GridWorld::cell_index(Cell c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(spec_.width) +
           static_cast<std::size_t>(c.x);
}

EnvState GridWorld::observe() const {
    EnvState s;
    s.features.assign(feature_dim(), 0.0);
    s.features[cell_index(pos_)] = 1.0;
    s.step_index = steps_;
    s.done = done_;
    return s;
}

EnvState GridWorld::reset(std::uint64_t /*episode_seed*/) {
    pos_ = spec_.start;
    steps_ = 0;
    done_ = false;
    return observe();
}

StepResult GridWorld::step(int action) {
    if (done_) {
        throw UsageError("gridworld: step called on a terminal (or never reset) environment");
    }
    Cell next = pos_;
    switch (action) {
        case kNorth: next.y -= 1; break;
        case kSouth: next.y += 1; break;
        case kEast: next.x += 1; break;
        case kWest: next.x -= 1; break;
        default: throw UsageError("gridworld: invalid action " + std::to_string(action));
    }
    next.x = std::clamp(next.x, 0, spec_.width - 1);
    next.y = std::clamp(next.y, 0, spec_.height - 1);
    pos_ = next;
    ++steps_;

    const bool at_goal = pos_ == spec_.goal;
    StepResult out;
    out.reward = at_goal ? spec_.goal_reward : spec_.step_reward;
    done_ = at_goal || steps_ >= spec_.horizon;
    out.done = done_;
    out.state = observe();
    return out;
}

// ---------------------------------------------------------------------------

SyntheticEnv::SyntheticEnv(SyntheticSpec spec, std::uint64_t env_id, std::uint64_t run_seed)
    : spec_(spec), env_id_(env_id), run_seed_(run_seed) {
    spec_.validate();
}

EnvState SyntheticEnv::observe() const {
    return EnvState{{1.0}, steps_, done_};
}

EnvState SyntheticEnv::reset(std::uint64_t /*episode_seed*/) {
    steps_ = 0;
    done_ = false;
    return observe();
}

StepResult SyntheticEnv::step(int action) {
    if (done_) {
        throw UsageError("synthetic env: step called on a terminal (or never reset) environment");
    }
    if (action < 0 || action >= static_cast<int>(action_count())) {
        throw UsageError("synthetic env: invalid action " + std::to_string(action));
    }
    const double delay = sample_step_delay(
        spec_.model, derive_step_seed(run_seed_ ^ kDelayStream, env_id_, lifetime_steps_++));
    elapsed_ += delay;
    if (spec_.clock == ClockMode::Real && delay > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    ++steps_;
    done_ = steps_ >= spec_.horizon;
    return StepResult{observe(), 0.0, done_};
}

// ---------------------------------------------------------------------------

std::unique_ptr<Environment> make_environment(const EnvSpec& spec, std::uint64_t env_id,
                                              std::uint64_t run_seed) {
    if (const auto* grid = std::get_if<GridWorldSpec>(&spec)) {
        return std::make_unique<GridWorld>(*grid);
    }
    return std::make_unique<SyntheticEnv>(std::get<SyntheticSpec>(spec), env_id, run_seed);
}

std::size_t feature_dim(const EnvSpec& spec) {
    if (const auto* grid = std::get_if<GridWorldSpec>(&spec)) {
        return static_cast<std::size_t>(grid->width) * static_cast<std::size_t>(grid->height);
    }
    return 1;
}

std::size_t action_count(const EnvSpec& spec) {
    return std::holds_alternative<GridWorldSpec>(spec) ? 4 : 2;
}

void validate(const EnvSpec& spec) {
    std::visit([](const auto& s) { s.validate(); }, spec);
}

double actor_compute_time(const EnvSpec& spec) {
    if (const auto* synth = std::get_if<SyntheticSpec>(&spec)) {
        return synth->model.actor_compute_time;
    }
    return 0.0;
}

double optimal_return_oracle(const GridWorldSpec& spec, double discount) {
    spec.validate();
    if (!(discount > 0.0 && discount <= 1.0)) {
        throw UsageError("optimal_return_oracle: discount must lie in (0, 1]");
    }
    const std::size_t w = static_cast<std::size_t>(spec.width);
    const std::size_t cells = w * static_cast<std::size_t>(spec.height);
    const auto index = [w](Cell c) {
        return static_cast<std::size_t>(c.y) * w + static_cast<std::size_t>(c.x);
    };
    const std::size_t goal = index(spec.goal);
    constexpr int kDx[4] = {0, 0, 1, -1};
    constexpr int kDy[4] = {-1, 1, 0, 0};

    std::vector<double> value(cells, 0.0);
    std::vector<double> next(cells, 0.0);
    constexpr int kMaxIterations = 1'000'000;
    for (int it = 0; it < kMaxIterations; ++it) {
        double delta = 0.0;
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                const std::size_t s = index({x, y});
                if (s == goal) {
                    next[s] = 0.0;
                    continue;
                }
                double best = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < 4; ++a) {
                    const Cell to{std::clamp(x + kDx[a], 0, spec.width - 1),
                                  std::clamp(y + kDy[a], 0, spec.height - 1)};
                    const std::size_t t = index(to);
                    const double q = t == goal ? spec.goal_reward
                                               : spec.step_reward + discount * value[t];
                    best = std::max(best, q);
                }
                next[s] = best;
                delta = std::max(delta, std::abs(best - value[s]));
            }
        }
        value.swap(next);
        if (!std::isfinite(delta)) {
            break;
        }
        if (delta < 1e-10) {
            return value[index(spec.start)];
        }
    }
    throw NumericError("optimal_return_oracle: value iteration did not converge");
}

double sample_step_delay(const StepTimeModel& model, std::uint64_t rng_word) {
    switch (model.kind) {
        case StepTimeKind::Constant:
            return model.constant;
        case StepTimeKind::Exponential:
            return exponential_from_unit(word_to_unit(rng_word), model.rate);
        case StepTimeKind::Gamma: {
            SplitMix64 gen(rng_word);
            const double whole = std::floor(model.shape);
            if (whole == model.shape && model.shape <= 64.0) {
                double sum = 0.0;
                for (int i = 0; i < static_cast<int>(whole); ++i) {
                    sum += exponential_from_unit(gen.uniform(), model.rate);
                }
                return sum;
            }
            return gamma_unit_rate(model.shape, gen) / model.rate;
        }
    }
    return 0.0;
}

}  // namespace htsrl::envs
