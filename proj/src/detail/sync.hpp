#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "htsrl/buffers.hpp"

namespace htsrl::engine::detail {

/// Broadcast "epoch j may start". Waiters return false once cancelled.
class EpochGate {
public:
    explicit EpochGate(std::int64_t opened = 0) : opened_(opened) {}

    void open(std::int64_t epoch) {
        {
            std::lock_guard lock(mutex_);
            opened_ = epoch;
        }
        cv_.notify_all();
    }

    bool wait(std::int64_t epoch) {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return cancelled_ || opened_ >= epoch; });
        return !cancelled_;
    }

    void cancel() {
        {
            std::lock_guard lock(mutex_);
            cancelled_ = true;
        }
        cv_.notify_all();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::int64_t opened_;
    bool cancelled_ = false;
};

/// Single-slot handoff keyed by epoch.
template <typename T>
class EpochChannel {
public:
    void post(std::int64_t epoch, T value) {
        {
            std::lock_guard lock(mutex_);
            epoch_ = epoch;
            value_ = std::move(value);
        }
        cv_.notify_all();
    }

    std::optional<T> wait(std::int64_t epoch) {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return cancelled_ || (value_ && epoch_ == epoch); });
        if (cancelled_) return std::nullopt;
        std::optional<T> out = std::move(value_);
        value_.reset();
        return out;
    }

    void cancel() {
        {
            std::lock_guard lock(mutex_);
            cancelled_ = true;
        }
        cv_.notify_all();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::int64_t epoch_ = -1;
    std::optional<T> value_;
    bool cancelled_ = false;
};

/// The published-parameters cell read by actors.
class PublishedParams {
public:
    explicit PublishedParams(buffers::SnapshotPtr initial) : current_(std::move(initial)) {}

    buffers::SnapshotPtr get() const {
        std::lock_guard lock(mutex_);
        return current_;
    }

    void set(buffers::SnapshotPtr next) {
        std::lock_guard lock(mutex_);
        current_ = std::move(next);
    }

private:
    mutable std::mutex mutex_;
    buffers::SnapshotPtr current_;
};

/// Keeps the first exception raised by any worker.
class FirstError {
public:
    bool capture(std::exception_ptr e) {
        std::lock_guard lock(mutex_);
        if (error_) return false;
        error_ = std::move(e);
        return true;
    }

    void rethrow_if_any() {
        std::lock_guard lock(mutex_);
        if (error_) std::rethrow_exception(error_);
    }

    bool has_error() const {
        std::lock_guard lock(mutex_);
        return static_cast<bool>(error_);
    }

private:
    mutable std::mutex mutex_;
    std::exception_ptr error_;
};

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}

    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void sleep_seconds(double seconds) {
    if (seconds > 0.0) {
        std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
    }
}

}  // namespace htsrl::engine::detail
