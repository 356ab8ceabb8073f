#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace graphnf {

// Violated precondition of an operation (bad shape, bad argument).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input data that cannot be used: malformed files, missing subjects, degenerate
// measurements.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite value encountered while training.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t parameter_index)
      : std::runtime_error(what), parameter_index_(parameter_index) {}

  std::size_t parameter_index() const noexcept { return parameter_index_; }

 private:
  std::size_t parameter_index_;
};

// Invalid experiment configuration or command-line usage.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace graphnf
