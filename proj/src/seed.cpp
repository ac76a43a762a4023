#include "htsrl/seed.hpp"

#include <string>

#include "htsrl/errors.hpp"

namespace htsrl {

namespace {
constexpr std::uint64_t kEnvLimit = std::uint64_t{1} << 24;
constexpr std::uint64_t kStepLimit = std::uint64_t{1} << 40;
}  // namespace

std::uint64_t derive_step_seed(std::uint64_t run_seed, std::uint64_t env_id,
                               std::uint64_t step_index) {
    if (env_id >= kEnvLimit) {
        throw UsageError("derive_step_seed: env_id " + std::to_string(env_id) +
                         " exceeds 2^24");
    }
    if (step_index >= kStepLimit) {
        throw UsageError("derive_step_seed: step_index " + std::to_string(step_index) +
                         " exceeds 2^40");
    }
    const std::uint64_t counter = (env_id << 40) | step_index;
    const std::uint64_t key = mix64(run_seed ^ 0x9e3779b97f4a7c15ULL);
    const std::uint64_t key2 = mix64(key + 0x632be59bd9b4e019ULL);
    return mix64(mix64(counter ^ key) ^ key2);
}

}  // namespace htsrl
