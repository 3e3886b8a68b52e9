#pragma once

#include <stdexcept>
#include <string>

namespace retra {

// Validation problems: bad config keys, missing files, shape mismatches
// detectable before any arithmetic runs. CLI maps these to exit code 1.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failures mid-run: non-finite values, singular matrices, divergence.
// CLI maps these to exit code 2.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

struct dimension_error : config_error {
    explicit dimension_error(const std::string& msg) : config_error(msg) {}
};

}
