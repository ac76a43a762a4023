#pragma once

#include <cstdint>

namespace htsrl {

/// Stateless per-step randomness for executors.
///
/// The result is a keyed bijective mix of the packed counter
/// (env_id << 40 | step_index), so for a fixed run seed two distinct
/// (env_id, step_index) pairs never collide. env_id must be < 2^24 and
/// step_index < 2^40.
std::uint64_t derive_step_seed(std::uint64_t run_seed, std::uint64_t env_id,
                               std::uint64_t step_index);

/// Top 53 bits of `word` as a double in [0, 1).
constexpr double word_to_unit(std::uint64_t word) noexcept {
    return static_cast<double>(word >> 11) * 0x1.0p-53;
}

/// Murmur3 64-bit finalizer (a bijection on 64-bit words).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

// Stream separators so that action sampling, step delays and episode resets
// never share words even when keyed by the same (env, step).
inline constexpr std::uint64_t kActionStream = 0x0;
inline constexpr std::uint64_t kDelayStream = 0xd1b54a32d192ed03ULL;
inline constexpr std::uint64_t kResetStream = 0x8bb84b93962eacc9ULL;

/// SplitMix64: small sequential generator used to expand one word into
/// several uniforms (e.g. for multi-draw gamma sampling).
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit constexpr SplitMix64(std::uint64_t state) noexcept : state_(state) {}

    constexpr result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    /// Uniform in [0, 1).
    constexpr double uniform() noexcept { return word_to_unit((*this)()); }

private:
    std::uint64_t state_;
};

}  // namespace htsrl
