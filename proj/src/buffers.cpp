#include "htsrl/buffers.hpp"

#include <string>

#include "htsrl/errors.hpp"

namespace htsrl::buffers {

namespace {

void check_env(int env_id, std::size_t n_envs, const char* where) {
    if (env_id < 0 || static_cast<std::size_t>(env_id) >= n_envs) {
        throw UsageError(std::string(where) + ": env_id " + std::to_string(env_id) +
                         " outside [0, " + std::to_string(n_envs) + ")");
    }
}

}  // namespace

// --- StateBuffer -------------------------------------------------------------

StateBuffer::StateBuffer(std::size_t n_envs) : n_envs_(n_envs) {}

void StateBuffer::push(StateMsg msg) {
    check_env(msg.env_id, n_envs_, "state buffer push");
    {
        std::lock_guard lock(mutex_);
        if (closed_) {
            throw UsageError("state buffer push after close");
        }
        if (queue_.size() >= n_envs_) {
            throw UsageError("state buffer overflow: more pending messages than environments");
        }
        queue_.push_back(std::move(msg));
        ++pushed_;
    }
    available_.notify_one();
}

std::vector<StateMsg> StateBuffer::take_all(int /*actor_id*/) {
    std::lock_guard lock(mutex_);
    std::vector<StateMsg> out(std::make_move_iterator(queue_.begin()),
                              std::make_move_iterator(queue_.end()));
    queue_.clear();
    drained_ += out.size();
    return out;
}

std::optional<std::vector<StateMsg>> StateBuffer::wait_take_all(int /*actor_id*/) {
    std::unique_lock lock(mutex_);
    available_.wait(lock, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) {
        return std::nullopt;
    }
    std::vector<StateMsg> out(std::make_move_iterator(queue_.begin()),
                              std::make_move_iterator(queue_.end()));
    queue_.clear();
    drained_ += out.size();
    return out;
}

void StateBuffer::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    available_.notify_all();
}

bool StateBuffer::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

std::size_t StateBuffer::pending() const {
    std::lock_guard lock(mutex_);
    return queue_.size();
}

std::uint64_t StateBuffer::pushed_count() const {
    std::lock_guard lock(mutex_);
    return pushed_;
}

std::uint64_t StateBuffer::drained_count() const {
    std::lock_guard lock(mutex_);
    return drained_;
}

// --- ActionBuffer ------------------------------------------------------------

struct ActionBuffer::Slot {
    std::mutex mutex;
    std::condition_variable cv;
    std::optional<int> action;
};

ActionBuffer::ActionBuffer(std::size_t n_envs)
    : n_envs_(n_envs), slots_(std::make_unique<Slot[]>(n_envs)) {}

ActionBuffer::~ActionBuffer() = default;

ActionBuffer::Slot& ActionBuffer::slot(int env_id) {
    return slots_[static_cast<std::size_t>(env_id)];
}

void ActionBuffer::push(ActionMsg msg) {
    check_env(msg.env_id, n_envs_, "action buffer push");
    Slot& s = slot(msg.env_id);
    {
        std::lock_guard lock(s.mutex);
        if (s.action.has_value()) {
            throw UsageError("action buffer: two pending actions for env " +
                             std::to_string(msg.env_id));
        }
        s.action = msg.action;
    }
    pushed_.fetch_add(1, std::memory_order_relaxed);
    s.cv.notify_one();
}

std::optional<ActionMsg> ActionBuffer::take(int env_id) {
    check_env(env_id, n_envs_, "action buffer take");
    Slot& s = slot(env_id);
    std::unique_lock lock(s.mutex);
    s.cv.wait(lock, [&] { return s.action.has_value() || closed_.load(); });
    if (!s.action) {
        return std::nullopt;
    }
    const int action = *s.action;
    s.action.reset();
    taken_.fetch_add(1, std::memory_order_relaxed);
    return ActionMsg{env_id, action};
}

void ActionBuffer::close() {
    closed_.store(true);
    for (std::size_t i = 0; i < n_envs_; ++i) {
        // Taking the lock orders the flag store before any waiter's recheck.
        std::lock_guard lock(slots_[i].mutex);
        slots_[i].cv.notify_all();
    }
}

std::uint64_t ActionBuffer::pushed_count() const { return pushed_.load(); }
std::uint64_t ActionBuffer::taken_count() const { return taken_.load(); }

// --- RolloutStorage ----------------------------------------------------------

RolloutStorage::RolloutStorage(std::size_t n_envs, std::size_t interval)
    : n_envs_(n_envs),
      interval_(interval),
      slots_(n_envs * interval),
      filled_(std::make_unique<std::atomic<bool>[]>(n_envs * interval)),
      bootstrap_(n_envs),
      episode_returns_(n_envs) {
    if (n_envs == 0 || interval == 0) {
        throw UsageError("rollout storage: n_envs and interval must be >= 1");
    }
}

bool RolloutStorage::append(Transition t) {
    if (role_ != StorageRole::Write) {
        throw UsageError("rollout storage: append to a read-role storage");
    }
    check_env(t.env_id, n_envs_, "rollout storage append");
    if (t.step_index < 0) {
        throw UsageError("rollout storage: negative step_index");
    }
    const std::size_t slot = static_cast<std::size_t>(t.env_id) * interval_ +
                             static_cast<std::size_t>(t.step_index) % interval_;
    if (filled_[slot].exchange(true, std::memory_order_relaxed)) {
        throw UsageError("rollout storage: slot (env " + std::to_string(t.env_id) + ", step " +
                         std::to_string(t.step_index) + ") filled twice");
    }
    slots_[slot] = std::move(t);
    return count_.fetch_add(1, std::memory_order_acq_rel) + 1 == slots_.size();
}

void RolloutStorage::set_bootstrap(int env_id, std::vector<double> features) {
    check_env(env_id, n_envs_, "rollout storage bootstrap");
    bootstrap_[static_cast<std::size_t>(env_id)] = std::move(features);
}

bool RolloutStorage::has_bootstrap(int env_id) const {
    check_env(env_id, n_envs_, "rollout storage bootstrap");
    return !bootstrap_[static_cast<std::size_t>(env_id)].empty();
}

std::span<const double> RolloutStorage::bootstrap(int env_id) const {
    check_env(env_id, n_envs_, "rollout storage bootstrap");
    return bootstrap_[static_cast<std::size_t>(env_id)];
}

void RolloutStorage::record_episode_return(int env_id, double episode_return) {
    check_env(env_id, n_envs_, "rollout storage episode return");
    episode_returns_[static_cast<std::size_t>(env_id)].push_back(episode_return);
}

const std::vector<double>& RolloutStorage::episode_returns(int env_id) const {
    check_env(env_id, n_envs_, "rollout storage episode return");
    return episode_returns_[static_cast<std::size_t>(env_id)];
}

bool RolloutStorage::complete() const {
    return count_.load(std::memory_order_acquire) == slots_.size();
}

std::size_t RolloutStorage::size() const { return count_.load(std::memory_order_acquire); }

const Transition& RolloutStorage::at(int env_id, std::size_t offset) const {
    check_env(env_id, n_envs_, "rollout storage at");
    if (offset >= interval_) {
        throw UsageError("rollout storage at: offset outside the window");
    }
    return slots_[static_cast<std::size_t>(env_id) * interval_ + offset];
}

void RolloutStorage::reset(std::int64_t epoch, SnapshotPtr snapshot) {
    for (std::size_t i = 0; i < slots_.size(); ++i) {
        filled_[i].store(false, std::memory_order_relaxed);
        slots_[i] = Transition{};
    }
    for (auto& b : bootstrap_) b.clear();
    for (auto& r : episode_returns_) r.clear();
    count_.store(0, std::memory_order_release);
    epoch_ = epoch;
    snapshot_ = std::move(snapshot);
}

// --- DoubleStorage -----------------------------------------------------------

DoubleStorage::DoubleStorage(std::size_t n_envs, std::size_t interval, SnapshotPtr initial) {
    if (!initial) {
        throw UsageError("double storage: initial snapshot required");
    }
    storages_[0] = std::make_unique<RolloutStorage>(n_envs, interval);
    storages_[1] = std::make_unique<RolloutStorage>(n_envs, interval);
    const std::int64_t epoch = initial->version();
    storages_[0]->reset(epoch, std::move(initial));
    storages_[0]->set_role(StorageRole::Write);
    storages_[1]->reset(epoch - 1, nullptr);
    storages_[1]->set_role(StorageRole::Read);
}

void DoubleStorage::append(Transition t) {
    if (write().append(std::move(t))) {
        std::lock_guard lock(mutex_);
        cv_.notify_all();
    }
}

void DoubleStorage::mark_read_exhausted() {
    {
        std::lock_guard lock(mutex_);
        read_exhausted_ = true;
    }
    cv_.notify_all();
}

bool DoubleStorage::read_exhausted() const {
    std::lock_guard lock(mutex_);
    return read_exhausted_;
}

bool DoubleStorage::swap(SnapshotPtr next) {
    if (!next) {
        throw UsageError("double storage swap: snapshot required");
    }
    std::unique_lock lock(mutex_);
    waiting_ = true;
    cv_.wait(lock, [&] { return cancelled_ || (write().complete() && read_exhausted_); });
    waiting_ = false;
    if (cancelled_) {
        return false;
    }
    const std::int64_t next_epoch = write().epoch() + 1;
    if (next->version() != next_epoch) {
        throw UsageError("double storage swap: snapshot version " +
                         std::to_string(next->version()) + " does not match epoch " +
                         std::to_string(next_epoch));
    }
    write().set_role(StorageRole::Read);
    write_index_ = 1 - write_index_;
    write().reset(next_epoch, std::move(next));
    write().set_role(StorageRole::Write);
    read_exhausted_ = false;
    ++swaps_;
    return true;
}

void DoubleStorage::cancel() {
    {
        std::lock_guard lock(mutex_);
        cancelled_ = true;
    }
    cv_.notify_all();
}

std::uint64_t DoubleStorage::swap_count() const {
    std::lock_guard lock(mutex_);
    return swaps_;
}

bool DoubleStorage::swap_waiting() const {
    std::lock_guard lock(mutex_);
    return waiting_;
}

}  // namespace htsrl::buffers
