#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "htsrl/policy.hpp"

namespace htsrl::buffers {

/// Parameters an actor samples from; immutable once published.
struct ParamSnapshot {
    policy::PolicyParams policy;
    policy::ValueParams value;

    std::int64_t version() const { return policy.version; }
};
using SnapshotPtr = std::shared_ptr<const ParamSnapshot>;

/// Executor -> actor. sample_word is the executor-generated randomness.
struct StateMsg {
    int env_id = 0;
    std::vector<double> features;
    std::int64_t step_index = 0;
    std::uint64_t sample_word = 0;
};

/// Actor -> executor.
struct ActionMsg {
    int env_id = 0;
    int action = 0;
};

struct Transition {
    int env_id = 0;
    std::int64_t step_index = 0;
    std::vector<double> features;
    int action = 0;
    double reward = 0.0;
    bool done = false;
};

/// Observation buffer. Bounded at one pending message per environment;
/// many producers and many consumers.
class StateBuffer {
public:
    explicit StateBuffer(std::size_t n_envs);

    void push(StateMsg msg);

    /// Removes and returns everything currently available (possibly nothing).
    std::vector<StateMsg> take_all(int actor_id);

    /// Blocks until at least one message is available. nullopt once the
    /// buffer is closed and drained.
    std::optional<std::vector<StateMsg>> wait_take_all(int actor_id);

    void close();
    bool closed() const;
    std::size_t pending() const;
    std::uint64_t pushed_count() const;
    std::uint64_t drained_count() const;

private:
    std::size_t n_envs_;
    mutable std::mutex mutex_;
    std::condition_variable available_;
    std::deque<StateMsg> queue_;
    bool closed_ = false;
    std::uint64_t pushed_ = 0;
    std::uint64_t drained_ = 0;
};

/// Per-environment rendezvous slots for sampled actions.
class ActionBuffer {
public:
    explicit ActionBuffer(std::size_t n_envs);
    ~ActionBuffer();

    /// UsageError if an action for msg.env_id is already pending.
    void push(ActionMsg msg);

    /// Blocks until the action for env_id arrives; nullopt if closed first.
    std::optional<ActionMsg> take(int env_id);

    void close();
    std::uint64_t pushed_count() const;
    std::uint64_t taken_count() const;

private:
    struct Slot;
    Slot& slot(int env_id);

    std::size_t n_envs_;
    std::unique_ptr<Slot[]> slots_;
    std::atomic<bool> closed_{false};
    std::atomic<std::uint64_t> pushed_{0};
    std::atomic<std::uint64_t> taken_{0};
};

enum class StorageRole { Write, Read };

/// Fixed-capacity batch of n_envs x interval transitions addressed by the
/// canonical slot (env_id, step_index mod interval). Concurrent appends to
/// distinct slots are safe; contents are read only after the swap barrier.
class RolloutStorage {
public:
    RolloutStorage(std::size_t n_envs, std::size_t interval);
    RolloutStorage(const RolloutStorage&) = delete;
    RolloutStorage& operator=(const RolloutStorage&) = delete;

    /// Returns true if this append completed the storage.
    bool append(Transition t);

    /// Features of the state observed after the env's last transition.
    /// Executors set this before appending their final transition.
    void set_bootstrap(int env_id, std::vector<double> features);
    bool has_bootstrap(int env_id) const;
    std::span<const double> bootstrap(int env_id) const;

    /// Discounted return of an episode that ended inside this window.
    void record_episode_return(int env_id, double episode_return);
    const std::vector<double>& episode_returns(int env_id) const;

    bool complete() const;
    std::size_t size() const;
    std::size_t capacity() const { return slots_.size(); }
    std::size_t n_envs() const { return n_envs_; }
    std::size_t interval() const { return interval_; }

    /// Canonical order: env ascending, then step ascending.
    std::span<const Transition> transitions() const { return slots_; }
    const Transition& at(int env_id, std::size_t offset) const;

    /// Clears contents and tags the storage with a new epoch and snapshot.
    void reset(std::int64_t epoch, SnapshotPtr snapshot);

    std::int64_t epoch() const { return epoch_; }
    const SnapshotPtr& snapshot() const { return snapshot_; }
    StorageRole role() const { return role_; }
    void set_role(StorageRole role) { role_ = role; }

private:
    std::size_t n_envs_;
    std::size_t interval_;
    std::vector<Transition> slots_;
    std::unique_ptr<std::atomic<bool>[]> filled_;
    std::atomic<std::size_t> count_{0};
    std::vector<std::vector<double>> bootstrap_;
    std::vector<std::vector<double>> episode_returns_;
    std::int64_t epoch_ = 0;
    SnapshotPtr snapshot_;
    StorageRole role_ = StorageRole::Write;
};

/// The two swap-role storages. swap() is the synchronization barrier: it
/// waits until the write storage is complete and the read storage has been
/// exhausted by the learner.
class DoubleStorage {
public:
    DoubleStorage(std::size_t n_envs, std::size_t interval, SnapshotPtr initial);

    RolloutStorage& write() { return *storages_[write_index_]; }
    const RolloutStorage& read() const { return *storages_[1 - write_index_]; }
    int write_index() const { return write_index_; }

    /// Appends to the write storage and wakes a pending swap on completion.
    void append(Transition t);

    void mark_read_exhausted();
    bool read_exhausted() const;

    /// Blocks until both swap conditions hold, then exchanges roles. The
    /// fresh write storage is cleared, its epoch advanced and tagged with
    /// `next` (whose version must equal the new epoch). Returns false if
    /// cancelled while waiting.
    bool swap(SnapshotPtr next);

    void cancel();
    std::uint64_t swap_count() const;
    bool swap_waiting() const;

private:
    std::unique_ptr<RolloutStorage> storages_[2];
    int write_index_ = 0;
    mutable std::mutex mutex_;
    std::condition_variable cv_;
    bool read_exhausted_ = true;
    bool cancelled_ = false;
    bool waiting_ = false;
    std::uint64_t swaps_ = 0;
};

}  // namespace htsrl::buffers
