#include "htsrl/engine.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "detail/accounting.hpp"
#include "detail/env_runner.hpp"
#include "detail/sync.hpp"
#include "htsrl/errors.hpp"

namespace htsrl::engine {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv_word(std::uint64_t h, std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
        h ^= (word >> (8 * i)) & 0xffU;
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t fnv_double(std::uint64_t h, double v) {
    return fnv_word(h, std::bit_cast<std::uint64_t>(v));
}

}  // namespace

void EngineConfig::validate() const {
    if (n_envs < 1) throw UsageError("engine: n_envs must be >= 1");
    if (n_actors < 1) throw UsageError("engine: n_actors must be >= 1");
    if (sync_interval < 1) throw UsageError("engine: sync_interval must be >= 1");
    if (total_steps < 1) throw UsageError("engine: total_steps must be >= 1");
    const auto per_epoch = static_cast<std::int64_t>(n_envs * sync_interval);
    if (total_steps % per_epoch != 0) {
        throw UsageError("engine: total_steps (" + std::to_string(total_steps) +
                         ") must be divisible by n_envs * sync_interval (" +
                         std::to_string(per_epoch) + ")");
    }
    if (!(learner_compute_time >= 0.0)) {
        throw UsageError("engine: learner compute_time must be >= 0");
    }
    hyperparams.validate();
    envs::validate(env);
}

std::int64_t EngineConfig::steps_per_epoch() const {
    return static_cast<std::int64_t>(n_envs * sync_interval);
}

std::int64_t EngineConfig::epochs() const { return total_steps / steps_per_epoch(); }

void EpisodeTracker::add(double episode_return) {
    if (ring_.size() < kWindow) {
        ring_.push_back(episode_return);
    } else {
        ring_[next_] = episode_return;
    }
    next_ = (next_ + 1) % kWindow;
    ++completed_;
}

double EpisodeTracker::mean() const {
    if (ring_.empty()) return std::numeric_limits<double>::quiet_NaN();
    // Oldest to newest, so the sum is independent of ring position.
    double sum = 0.0;
    const std::size_t n = ring_.size();
    const std::size_t oldest = n < kWindow ? 0 : next_;
    for (std::size_t i = 0; i < n; ++i) sum += ring_[(oldest + i) % n];
    return sum / static_cast<double>(n);
}

std::uint64_t digest(const buffers::ParamSnapshot& params) {
    std::uint64_t h = kFnvOffset;
    h = fnv_word(h, static_cast<std::uint64_t>(params.policy.version));
    for (double w : params.policy.weights) h = fnv_double(h, w);
    for (double w : params.value.weights) h = fnv_double(h, w);
    return fnv_double(h, params.value.bias);
}

std::uint64_t digest_transition(std::uint64_t seed, const buffers::Transition& t) {
    std::uint64_t h = seed == 0 ? kFnvOffset : seed;
    h = fnv_word(h, static_cast<std::uint64_t>(t.env_id));
    h = fnv_word(h, static_cast<std::uint64_t>(t.step_index));
    for (double x : t.features) h = fnv_double(h, x);
    h = fnv_word(h, static_cast<std::uint64_t>(t.action));
    h = fnv_double(h, t.reward);
    return fnv_word(h, t.done ? 1U : 0U);
}

buffers::SnapshotPtr initial_snapshot(const EngineConfig& config) {
    const std::size_t dim = envs::feature_dim(config.env);
    return detail::make_snapshot(policy::PolicyParams::zeros(dim, envs::action_count(config.env)),
                                 policy::ValueParams::zeros(dim));
}

namespace detail {

buffers::SnapshotPtr make_snapshot(policy::PolicyParams policy, policy::ValueParams value) {
    auto snap = std::make_shared<buffers::ParamSnapshot>();
    snap->policy = std::move(policy);
    snap->value = std::move(value);
    return snap;
}

void absorb_epoch(const buffers::RolloutStorage& storage, EpisodeTracker& tracker,
                  RunResult& result, bool keep_transitions) {
    for (const buffers::Transition& t : storage.transitions()) {
        result.trajectory_digest = digest_transition(result.trajectory_digest, t);
        if (keep_transitions) result.all_transitions.push_back(t);
    }
    result.transitions += storage.size();
    for (std::size_t e = 0; e < storage.n_envs(); ++e) {
        for (double r : storage.episode_returns(static_cast<int>(e))) tracker.add(r);
    }
}

}  // namespace detail

namespace {

struct LearnerOutput {
    buffers::SnapshotPtr params;
    std::int64_t lag = 0;
    bool updated = false;
    double learn_begin = -1.0;
    double learn_end = -1.0;
};

}  // namespace

RunResult run_hts(const EngineConfig& config, const RunOptions& options) {
    config.validate();

    const std::size_t n = config.n_envs;
    const std::size_t interval = config.sync_interval;
    const std::int64_t epochs = config.epochs();
    const auto& hp = config.hyperparams;
    const double actor_time = envs::actor_compute_time(config.env);

    buffers::SnapshotPtr theta0 = initial_snapshot(config);
    buffers::StateBuffer state_buffer(n);
    buffers::ActionBuffer action_buffer(n);
    buffers::DoubleStorage storages(n, interval, theta0);
    detail::PublishedParams published(theta0);
    detail::EpochGate gate(0);
    detail::EpochChannel<LearnerOutput> learner_out;
    detail::FirstError error;
    detail::Stopwatch clock;

    auto abort_all = [&] {
        state_buffer.close();
        action_buffer.close();
        storages.cancel();
        gate.cancel();
        learner_out.cancel();
    };
    auto guarded = [&](auto&& body) {
        return [&, body]() mutable {
            try {
                body();
            } catch (...) {
                error.capture(std::current_exception());
                abort_all();
            }
        };
    };

    std::vector<std::jthread> workers;
    workers.reserve(n + config.n_actors + 1);

    for (std::size_t e = 0; e < n; ++e) {
        workers.emplace_back(guarded([&, e] {
            const int env_id = static_cast<int>(e);
            detail::EnvRunner runner(envs::make_environment(config.env, e, config.seed), env_id,
                                     config.seed, hp.discount);
            for (std::int64_t j = 0; j < epochs; ++j) {
                if (j > 0 && !gate.wait(j)) return;
                for (std::size_t t = 0; t < interval; ++t) {
                    const std::int64_t step = j * static_cast<std::int64_t>(interval) +
                                              static_cast<std::int64_t>(t);
                    state_buffer.push(buffers::StateMsg{env_id, runner.state().features, step,
                                                        runner.sample_word(step)});
                    const auto action = action_buffer.take(env_id);
                    if (!action) return;
                    auto outcome = runner.step(action->action, step);
                    auto& write = storages.write();
                    if (outcome.episode_return) {
                        write.record_episode_return(env_id, *outcome.episode_return);
                    }
                    if (t + 1 == interval) write.set_bootstrap(env_id, runner.state().features);
                    storages.append(std::move(outcome.transition));
                }
            }
        }));
    }

    for (std::size_t a = 0; a < config.n_actors; ++a) {
        workers.emplace_back(guarded([&, a] {
            const int actor_id = static_cast<int>(a);
            std::vector<buffers::ActionMsg> replies;
            while (auto batch = state_buffer.wait_take_all(actor_id)) {
                const buffers::SnapshotPtr params = published.get();
                replies.clear();
                for (const buffers::StateMsg& msg : *batch) {
                    // One forward pass per observation: results cannot depend
                    // on how observations were grouped into batches.
                    const auto probs = policy::policy_forward(params->policy, msg.features);
                    replies.push_back(
                        {msg.env_id, policy::sample_action(probs, word_to_unit(msg.sample_word))});
                }
                detail::sleep_seconds(actor_time);
                for (const auto& reply : replies) action_buffer.push(reply);
            }
        }));
    }

    workers.emplace_back(guarded([&] {
        // Epoch 0 has no read data; the coordinator publishes theta_1 = theta_0.
        buffers::SnapshotPtr current = detail::make_snapshot(theta0->policy, theta0->value);
        {
            auto bootstrap = std::make_shared<buffers::ParamSnapshot>(*current);
            bootstrap->policy.version = 1;
            bootstrap->value.version = 1;
            current = bootstrap;
        }
        for (std::int64_t j = 1; j < epochs; ++j) {
            if (!gate.wait(j)) return;
            const buffers::RolloutStorage& batch = storages.read();
            const buffers::SnapshotPtr behavior = batch.snapshot();
            LearnerOutput out;
            out.learn_begin = clock.seconds();
            try {
                const auto grad = policy::actor_critic_gradient(behavior->policy, behavior->value,
                                                                batch, hp);
                out.params = detail::make_snapshot(
                    policy::apply_update(current->policy, grad.policy, hp.learning_rate),
                    policy::apply_update(current->value, grad.value, hp.learning_rate));
            } catch (const NumericError& e) {
                throw NumericError("epoch " + std::to_string(j) + ": " + e.what());
            }
            detail::sleep_seconds(config.learner_compute_time);
            out.learn_end = clock.seconds();
            out.lag = current->version() - behavior->version();
            out.updated = true;
            current = out.params;
            learner_out.post(j, std::move(out));
            storages.mark_read_exhausted();
        }
    }));

    RunResult result;
    EpisodeTracker tracker;
    try {
        double epoch_begin = 0.0;
        buffers::SnapshotPtr latest = theta0;
        for (std::int64_t j = 0; j < epochs; ++j) {
            LearnerOutput out;
            if (j == 0) {
                auto bootstrap = std::make_shared<buffers::ParamSnapshot>(*theta0);
                bootstrap->policy.version = 1;
                bootstrap->value.version = 1;
                out.params = bootstrap;
            } else {
                auto posted = learner_out.wait(j);
                if (!posted) break;
                out = std::move(*posted);
            }
            if (!storages.swap(out.params)) break;
            const double now = clock.seconds();

            const buffers::RolloutStorage& done = storages.read();
            detail::absorb_epoch(done, tracker, result, options.keep_transitions);

            MetricsRecord rec;
            rec.epoch = j;
            rec.env_steps = (j + 1) * config.steps_per_epoch();
            rec.wall_time = now;
            rec.sps = static_cast<double>(config.steps_per_epoch()) /
                      std::max(now - epoch_begin, 1e-9);
            rec.avg_episode_return = tracker.mean();
            rec.policy_lag = out.updated ? out.lag : 0;
            result.metrics.push_back(rec);
            result.traces.push_back({epoch_begin, now, out.learn_begin, out.learn_end});
            if (out.updated) {
                result.lags.push_back({static_cast<std::int64_t>(result.lags.size()), out.lag});
                result.param_digests.push_back(digest(*out.params));
            }
            if (options.on_metrics) options.on_metrics(rec);

            latest = out.params;
            published.set(out.params);
            epoch_begin = now;
            if (j + 1 < epochs) gate.open(j + 1);
        }
        result.final_params = *latest;
    } catch (...) {
        error.capture(std::current_exception());
    }
    abort_all();
    workers.clear();
    error.rethrow_if_any();

    result.wall_time = clock.seconds();
    return result;
}

}  // namespace htsrl::engine
