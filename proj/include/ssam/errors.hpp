#ifndef SSAM_ERRORS_HPP
#define SSAM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ssam {

/// Caller broke a documented precondition (shape mismatch, out-of-range argument).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Request exceeds what the implementation is willing to enumerate or evaluate.
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A certified bound or cap is undefined for this model (typically eta == 0).
class NotApplicable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two routes to the same quantity disagree beyond their statistical tolerance.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateFit : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A trajectory left the finite region. Carries the offending step index.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, long long step)
      : std::runtime_error(what), step_(step) {}
  long long step() const noexcept { return step_; }

 private:
  long long step_;
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field_path, const std::string& message)
      : std::runtime_error(field_path + ": " + message), field_(field_path) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace ssam

#endif  // SSAM_ERRORS_HPP
