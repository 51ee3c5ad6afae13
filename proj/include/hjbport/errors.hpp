#pragma once

#include <stdexcept>
#include <string>

namespace hjbport {

/// Invalid user input: malformed config, out-of-range parameters.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure: non-PD covariance, QP non-convergence, the PDE
/// solution leaving the tabulated phi range, non-finite paths.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File system and parse failures.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hjbport
