#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "htsrl/buffers.hpp"

namespace htsrl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;   // I/O and other runtime failures
inline constexpr int kExitUsage = 2;     // bad flags or config
inline constexpr int kExitNumeric = 3;   // numeric abort during a run

/// Environment variable consulted when no config path is given.
inline constexpr const char* kConfigEnvVar = "HTSRL_CONFIG";

/// Entry point for the htsrl tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// JSON document with both parameter blocks and their versions.
std::string params_to_json(const buffers::ParamSnapshot& params);

}  // namespace htsrl::cli
