#pragma once

#include <stdexcept>
#include <string>

namespace hwnn {

// Invalid or inconsistent experiment configuration (exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

// Training diverged or refused to continue (exit code 3).
struct TrainAbort : std::runtime_error {
    explicit TrainAbort(const std::string &msg) : std::runtime_error(msg) {}
};

// File could not be read/written/parsed (exit code 4).
struct IoError : std::runtime_error {
    explicit IoError(const std::string &msg) : std::runtime_error(msg) {}
};

} // namespace hwnn
