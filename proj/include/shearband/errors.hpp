#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace shearband {

struct RangeError : std::runtime_error {
  explicit RangeError(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateError : std::runtime_error {
  explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

struct SingularGraphError : std::runtime_error {
  explicit SingularGraphError(const std::string& what) : std::runtime_error(what) {}
};

struct IntegratorError : std::runtime_error {
  explicit IntegratorError(const std::string& what) : std::runtime_error(what) {}
};

struct ConvergenceError : std::runtime_error {
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

struct NewtonDivergence : std::runtime_error {
  std::vector<double> residual_history;
  NewtonDivergence(const std::string& what, std::vector<double> hist)
      : std::runtime_error(what), residual_history(std::move(hist)) {}
};

struct MeshError : std::runtime_error {
  explicit MeshError(const std::string& what) : std::runtime_error(what) {}
};

struct TangencyFailure : std::runtime_error {
  explicit TangencyFailure(const std::string& what) : std::runtime_error(what) {}
};

struct DomainError : std::runtime_error {
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

struct ExtrapolationError : std::runtime_error {
  explicit ExtrapolationError(const std::string& what) : std::runtime_error(what) {}
};

struct WindowError : std::runtime_error {
  explicit WindowError(const std::string& what) : std::runtime_error(what) {}
};

struct InvarianceViolation : std::runtime_error {
  explicit InvarianceViolation(const std::string& what) : std::runtime_error(what) {}
};

struct MissingArtifact : std::runtime_error {
  explicit MissingArtifact(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace shearband
