#pragma once

#include <stdexcept>
#include <string>

namespace mctm {

/// Bad caller input: out-of-range covariates, malformed files, unknown species.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter vector that violates a model constraint (e.g. non-monotone theta).
class ParameterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A likelihood or integral that cannot be evaluated at the requested point.
class EvaluationError : public std::runtime_error {
 public:
  EvaluationError(const std::string& what, long observation = -1, int species = -1)
      : std::runtime_error(what), observation_(observation), species_(species) {}

  long observation() const noexcept { return observation_; }
  int species() const noexcept { return species_; }

 private:
  long observation_;
  int species_;
};

class UnsupportedLinkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mctm
