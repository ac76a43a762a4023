#pragma once

#include <stdexcept>
#include <string>

namespace htsrl {

// Caller broke a precondition or a protocol (bad config, double slot fill, etc).
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// A computation produced or met a non-finite value, or failed to converge.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace htsrl
