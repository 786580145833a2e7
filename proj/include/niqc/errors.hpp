#pragma once

#include <stdexcept>
#include <string>

namespace niqc {

// Base type for every exception the library throws deliberately.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Invalid construction of a model or constraint: bad dimensions, unstable
// transfer-function denominator, non-Hermitian constraint matrix, and so on.
class ModelError : public Error {
public:
  using Error::Error;
};

// Numerical failure during integration or evaluation (NaN, overflow, division
// by zero inside a dynamics expression). Carries the first failing time.
class SimulationError : public Error {
public:
  SimulationError(const std::string& what, double time)
      : Error(what + " at t=" + std::to_string(time)), time_(time) {}
  double time() const { return time_; }

private:
  double time_;
};

// Analysis preconditions not met: empty battery, no informative inputs, ...
class AnalysisError : public Error {
public:
  using Error::Error;
};

// Problems with user-supplied configuration (JSON schema, CLI arguments).
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace niqc
