#pragma once

#include <stdexcept>
#include <string>

namespace lpsim {

/// Base type for all library errors. `kind()` is stable across messages so
/// callers (and the CLI exit-code mapping) can dispatch without string checks.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    invalid_input,
    chart_singularity,
    config,
    step_failure,
    training_failure,
    version,
    io,
  };

  Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct InvalidInput : Error {
  explicit InvalidInput(const std::string& msg) : Error(Kind::invalid_input, msg) {}
};

/// Chart-based operation evaluated outside its chart (rotation angle at or
/// beyond pi). Callers that sample data are expected to reject the sample.
struct ChartSingularity : Error {
  explicit ChartSingularity(const std::string& msg) : Error(Kind::chart_singularity, msg) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(Kind::config, msg) {}
};

/// Implicit step did not converge. Carries the last Newton residual so the
/// caller can decide whether to halve the step and retry.
struct StepFailure : Error {
  StepFailure(const std::string& msg, double residual, long step_index = -1)
      : Error(Kind::step_failure, msg), last_residual(residual), step_index(step_index) {}
  double last_residual;
  long step_index;
};

struct TrainingFailure : Error {
  TrainingFailure(const std::string& msg, long step)
      : Error(Kind::training_failure, msg), step_index(step) {}
  long step_index;
};

struct VersionError : Error {
  explicit VersionError(const std::string& msg) : Error(Kind::version, msg) {}
};

struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(Kind::io, msg) {}
};

}  // namespace lpsim
