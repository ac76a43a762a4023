#include "htsrl/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

#include "detail/accounting.hpp"
#include "detail/env_runner.hpp"
#include "detail/sync.hpp"
#include "htsrl/errors.hpp"

namespace htsrl::baselines {

using engine::EngineConfig;
using engine::MetricsRecord;
using engine::RunOptions;
using engine::RunResult;

namespace {

/// n threads that each run task(i) once per round; run() returns when all
/// have finished and rethrows the first worker exception.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t n) : n_(n) {
        threads_.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            threads_.emplace_back([this, i] { loop(i); });
        }
    }

    ~WorkerPool() {
        {
            std::lock_guard lock(mutex_);
            stop_ = true;
        }
        start_.notify_all();
    }

    void run(const std::function<void(std::size_t)>& task) {
        {
            std::lock_guard lock(mutex_);
            task_ = &task;
            remaining_ = n_;
            ++generation_;
        }
        start_.notify_all();
        std::unique_lock lock(mutex_);
        done_.wait(lock, [&] { return remaining_ == 0; });
        task_ = nullptr;
        if (error_) {
            auto e = std::exchange(error_, nullptr);
            std::rethrow_exception(e);
        }
    }

private:
    void loop(std::size_t i) {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(std::size_t)>* task = nullptr;
            {
                std::unique_lock lock(mutex_);
                start_.wait(lock, [&] { return stop_ || generation_ != seen; });
                if (stop_) return;
                seen = generation_;
                task = task_;
            }
            std::exception_ptr failure;
            try {
                (*task)(i);
            } catch (...) {
                failure = std::current_exception();
            }
            {
                std::lock_guard lock(mutex_);
                if (failure && !error_) error_ = failure;
                if (--remaining_ == 0) done_.notify_one();
            }
        }
    }

    std::size_t n_;
    std::mutex mutex_;
    std::condition_variable start_;
    std::condition_variable done_;
    const std::function<void(std::size_t)>* task_ = nullptr;
    std::size_t remaining_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
    std::exception_ptr error_;
    std::vector<std::jthread> threads_;
};

int act(const buffers::ParamSnapshot& params, const std::vector<double>& features,
        std::uint64_t word) {
    const auto probs = policy::policy_forward(params.policy, features);
    return policy::sample_action(probs, word_to_unit(word));
}

buffers::SnapshotPtr updated(const buffers::ParamSnapshot& target,
                             const policy::ActorCriticGradient& grad, double lr) {
    return engine::detail::make_snapshot(policy::apply_update(target.policy, grad.policy, lr),
                                         policy::apply_update(target.value, grad.value, lr));
}

}  // namespace

void AsyncQueueConfig::validate() const {
    base.validate();
    if (queue_capacity < 1) {
        throw UsageError("async: queue_capacity must be >= 1");
    }
}

RunResult run_lockstep(const EngineConfig& config, const RunOptions& options) {
    config.validate();
    const std::size_t n = config.n_envs;
    const std::size_t interval = config.sync_interval;
    const std::int64_t epochs = config.epochs();
    const auto& hp = config.hyperparams;
    const double actor_time = envs::actor_compute_time(config.env);

    std::vector<engine::detail::EnvRunner> runners;
    runners.reserve(n);
    for (std::size_t e = 0; e < n; ++e) {
        runners.emplace_back(envs::make_environment(config.env, e, config.seed),
                             static_cast<int>(e), config.seed, hp.discount);
    }

    WorkerPool pool(n);
    buffers::RolloutStorage storage(n, interval);
    buffers::SnapshotPtr params = engine::initial_snapshot(config);
    engine::EpisodeTracker tracker;
    engine::detail::Stopwatch clock;
    RunResult result;

    std::vector<int> actions(n);
    std::vector<engine::detail::EnvRunner::Outcome> outcomes(n);

    // Records the outcome of env e's step at window offset t.
    auto store = [&](std::size_t e, std::size_t t, engine::detail::EnvRunner::Outcome& outcome) {
        const int env_id = static_cast<int>(e);
        if (outcome.episode_return) storage.record_episode_return(env_id, *outcome.episode_return);
        if (t + 1 == interval) storage.set_bootstrap(env_id, runners[e].state().features);
        storage.append(std::move(outcome.transition));
    };

    double epoch_begin = 0.0;
    for (std::int64_t j = 0; j < epochs; ++j) {
        storage.set_role(buffers::StorageRole::Write);
        storage.reset(j, params);
        const std::int64_t base = j * static_cast<std::int64_t>(interval);

        if (config.lockstep_barrier == engine::LockstepBarrier::Step) {
            for (std::size_t t = 0; t < interval; ++t) {
                const std::int64_t step = base + static_cast<std::int64_t>(t);
                for (std::size_t e = 0; e < n; ++e) {
                    actions[e] = act(*params, runners[e].state().features,
                                     runners[e].sample_word(step));
                }
                engine::detail::sleep_seconds(actor_time);
                pool.run([&](std::size_t e) { outcomes[e] = runners[e].step(actions[e], step); });
                for (std::size_t e = 0; e < n; ++e) store(e, t, outcomes[e]);
            }
        } else {
            pool.run([&](std::size_t e) {
                for (std::size_t t = 0; t < interval; ++t) {
                    const std::int64_t step = base + static_cast<std::int64_t>(t);
                    const int a = act(*params, runners[e].state().features,
                                      runners[e].sample_word(step));
                    engine::detail::sleep_seconds(actor_time);
                    auto outcome = runners[e].step(a, step);
                    store(e, t, outcome);
                }
            });
        }
        const double rollout_end = clock.seconds();
        storage.set_role(buffers::StorageRole::Read);
        engine::detail::absorb_epoch(storage, tracker, result, options.keep_transitions);

        const double learn_begin = clock.seconds();
        buffers::SnapshotPtr next;
        try {
            const auto grad = policy::actor_critic_gradient(params->policy, params->value, storage, hp);
            next = updated(*params, grad, hp.learning_rate);
        } catch (const NumericError& e) {
            throw NumericError("epoch " + std::to_string(j) + ": " + e.what());
        }
        engine::detail::sleep_seconds(config.learner_compute_time);
        const double now = clock.seconds();
        const std::int64_t lag = params->version() - storage.snapshot()->version();

        MetricsRecord rec;
        rec.epoch = j;
        rec.env_steps = (j + 1) * config.steps_per_epoch();
        rec.wall_time = now;
        rec.sps = static_cast<double>(config.steps_per_epoch()) / std::max(now - epoch_begin, 1e-9);
        rec.avg_episode_return = tracker.mean();
        rec.policy_lag = lag;
        result.metrics.push_back(rec);
        result.traces.push_back({epoch_begin, rollout_end, learn_begin, now});
        result.lags.push_back({j, lag});
        result.param_digests.push_back(engine::digest(*next));
        if (options.on_metrics) options.on_metrics(rec);

        params = next;
        epoch_begin = now;
    }
    result.final_params = *params;
    result.wall_time = clock.seconds();
    return result;
}

namespace {

using FragmentPtr = std::unique_ptr<buffers::RolloutStorage>;

/// Bounded non-blocking (for producers) fragment queue with drop-oldest.
class FragmentQueue {
public:
    FragmentQueue(std::size_t capacity, std::size_t producers)
        : capacity_(capacity), producers_(producers) {}

    void push(FragmentPtr fragment) {
        {
            std::lock_guard lock(mutex_);
            if (queue_.size() >= capacity_) {
                queue_.pop_front();
                ++dropped_;
            }
            queue_.push_back(std::move(fragment));
        }
        cv_.notify_one();
    }

    void producer_done() {
        {
            std::lock_guard lock(mutex_);
            --producers_;
        }
        cv_.notify_all();
    }

    /// nullptr once every producer is done and the queue is drained.
    FragmentPtr pop() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return cancelled_ || !queue_.empty() || producers_ == 0; });
        if (cancelled_ || queue_.empty()) return nullptr;
        FragmentPtr out = std::move(queue_.front());
        queue_.pop_front();
        return out;
    }

    void cancel() {
        {
            std::lock_guard lock(mutex_);
            cancelled_ = true;
        }
        cv_.notify_all();
    }

    std::uint64_t dropped() const {
        std::lock_guard lock(mutex_);
        return dropped_;
    }

private:
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<FragmentPtr> queue_;
    std::size_t capacity_;
    std::size_t producers_;
    std::uint64_t dropped_ = 0;
    bool cancelled_ = false;
};

}  // namespace

RunResult run_async(const AsyncQueueConfig& config, const RunOptions& options) {
    config.validate();
    const EngineConfig& base = config.base;
    const std::size_t interval = base.sync_interval;
    const std::size_t actors = base.n_actors;
    const auto& hp = base.hyperparams;
    const double actor_time = envs::actor_compute_time(base.env);
    const auto total = static_cast<std::uint64_t>(base.total_steps);

    buffers::SnapshotPtr theta0 = engine::initial_snapshot(base);
    engine::detail::PublishedParams published(theta0);
    FragmentQueue queue(config.queue_capacity, actors);
    engine::detail::FirstError error;
    engine::detail::Stopwatch clock;
    std::atomic<std::uint64_t> claimed{0};
    std::atomic<bool> stop{false};

    std::mutex tracker_mutex;
    engine::EpisodeTracker tracker;

    std::vector<std::jthread> workers;
    for (std::size_t a = 0; a < actors; ++a) {
        workers.emplace_back([&, a] {
            try {
                engine::detail::EnvRunner runner(envs::make_environment(base.env, a, base.seed),
                                                 static_cast<int>(a), base.seed, hp.discount);
                std::int64_t step = 0;
                while (!stop.load(std::memory_order_relaxed) &&
                       claimed.fetch_add(interval) < total) {
                    const buffers::SnapshotPtr params = published.get();
                    auto fragment = std::make_unique<buffers::RolloutStorage>(1, interval);
                    fragment->reset(params->version(), params);
                    std::vector<double> returns;
                    for (std::size_t t = 0; t < interval; ++t, ++step) {
                        const int action =
                            act(*params, runner.state().features, runner.sample_word(step));
                        engine::detail::sleep_seconds(actor_time);
                        auto outcome = runner.step(action, step, 0);
                        if (outcome.episode_return) returns.push_back(*outcome.episode_return);
                        if (t + 1 == interval) fragment->set_bootstrap(0, runner.state().features);
                        fragment->append(std::move(outcome.transition));
                    }
                    {
                        std::lock_guard lock(tracker_mutex);
                        for (double r : returns) tracker.add(r);
                    }
                    queue.push(std::move(fragment));
                }
            } catch (...) {
                error.capture(std::current_exception());
                stop = true;
                queue.cancel();
            }
            queue.producer_done();
        });
    }

    RunResult result;
    try {
        buffers::SnapshotPtr current = theta0;
        double last = 0.0;
        std::int64_t update = 0;
        while (FragmentPtr fragment = queue.pop()) {
            const std::int64_t lag = current->version() - fragment->snapshot()->version();
            buffers::SnapshotPtr next;
            try {
                const auto grad =
                    policy::stale_gradient(current->policy, current->value, *fragment, hp);
                next = updated(*current, grad, hp.learning_rate);
            } catch (const NumericError& e) {
                throw NumericError("update " + std::to_string(update) + ": " + e.what());
            }
            engine::detail::sleep_seconds(base.learner_compute_time);
            published.set(next);
            current = next;

            engine::EpisodeTracker scratch;
            engine::detail::absorb_epoch(*fragment, scratch, result, options.keep_transitions);

            const double now = clock.seconds();
            MetricsRecord rec;
            rec.epoch = update;
            rec.env_steps = static_cast<std::int64_t>(result.transitions);
            rec.wall_time = now;
            rec.sps = static_cast<double>(interval) / std::max(now - last, 1e-9);
            {
                std::lock_guard lock(tracker_mutex);
                rec.avg_episode_return = tracker.mean();
            }
            rec.policy_lag = lag;
            result.metrics.push_back(rec);
            result.lags.push_back({update, lag});
            result.param_digests.push_back(engine::digest(*next));
            if (options.on_metrics) options.on_metrics(rec);
            last = now;
            ++update;
        }
        result.final_params = *current;
    } catch (...) {
        error.capture(std::current_exception());
        stop = true;
        queue.cancel();
    }
    workers.clear();
    error.rethrow_if_any();
    result.dropped_fragments = queue.dropped();
    result.wall_time = clock.seconds();
    return result;
}

LagSummary measure_lag(std::span<const LagSample> samples) {
    if (samples.empty()) {
        throw UsageError("measure_lag: no samples");
    }
    std::vector<std::int64_t> lags;
    lags.reserve(samples.size());
    double sum = 0.0;
    for (const auto& s : samples) {
        lags.push_back(s.lag);
        sum += static_cast<double>(s.lag);
    }
    std::sort(lags.begin(), lags.end());
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(lags.size())));
    LagSummary out;
    out.mean = sum / static_cast<double>(lags.size());
    out.p95 = static_cast<double>(lags[std::max<std::size_t>(rank, 1) - 1]);
    return out;
}

}  // namespace htsrl::baselines
