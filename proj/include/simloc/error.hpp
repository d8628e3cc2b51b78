#pragma once

#include <stdexcept>
#include <string>

#include "simloc/types.hpp"

namespace simloc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent user-supplied configuration. `key` names the
/// offending entry when one exists.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Singular or near-singular linear system. Carries the phase vector that
/// produced it when the failure comes from a SIM network.
class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, double rcond, RVec eta = {})
      : Error(what), rcond_(rcond), eta_(std::move(eta)) {}
  double rcond() const noexcept { return rcond_; }
  const RVec& eta() const noexcept { return eta_; }

 private:
  double rcond_;
  RVec eta_;
};

class OptimizationError : public Error {
 public:
  using Error::Error;
};

class EstimationError : public Error {
 public:
  using Error::Error;
};

}  // namespace simloc
