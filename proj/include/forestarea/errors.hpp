#pragma once

#include <stdexcept>
#include <string>

namespace forestarea {

// Bad or inconsistent input data (unknown stratum, missing label, ...).
// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
  explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric or degenerate-model failures (singular kriging system,
// single-class training data, variance undefined). CLI exit code 3.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace forestarea
