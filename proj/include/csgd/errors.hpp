#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace csgd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise unusable numeric result.
class NumericDomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Requested operation exceeds what the implementation can do (e.g. enumeration size).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedSchemeError : public Error {
 public:
  using Error::Error;
};

class ConditioningError : public Error {
 public:
  using Error::Error;
};

class TuningError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::int64_t iteration, Eigen::VectorXd last_finite)
      : Error("iterate diverged at t=" + std::to_string(iteration)),
        iteration_(iteration),
        last_finite_(std::move(last_finite)) {}

  std::int64_t iteration() const noexcept { return iteration_; }
  const Eigen::VectorXd& last_finite() const noexcept { return last_finite_; }

 private:
  std::int64_t iteration_;
  Eigen::VectorXd last_finite_;
};

}  // namespace csgd
