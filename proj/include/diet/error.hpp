#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace diet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatches between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A result or input carried NaN/Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid construction parameters (dataset specs, layer dims, batch sizes).
class SpecError : public Error {
 public:
  using Error::Error;
};

class PolicyError : public Error {
 public:
  using Error::Error;
};

class TargetError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ReportError : public Error {
 public:
  using Error::Error;
};

// Bad magic, schema version or truncated payload in a binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss. `step()` is the global optimizer step
// at which it happened.
class DivergenceError : public Error {
 public:
  DivergenceError(std::uint64_t step, const std::string& what)
      : Error("diverged at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

}  // namespace diet
