#pragma once

#include <stdexcept>
#include <string>

namespace eaaslab {

// Bad user-supplied configuration (unknown dataset/arch name, invalid knob).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller violated an operation precondition.
struct PreconditionError : std::invalid_argument {
  explicit PreconditionError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Missing or corrupted on-disk artifact (dataset files, checkpoints).
struct LoadError : std::runtime_error {
  explicit LoadError(const std::string& msg) : std::runtime_error(msg) {}
};

// Unknown account token on the service API.
struct AuthError : std::runtime_error {
  explicit AuthError(const std::string& msg) : std::runtime_error(msg) {}
};

// Account budget cap would be exceeded; the request was not served.
struct QuotaError : std::runtime_error {
  QuotaError(const std::string& msg, long long completed_rows = 0)
      : std::runtime_error(msg), completed(completed_rows) {}
  long long completed;  // rows already served before the cap hit (partial results)
};

// Numerical divergence during training (NaN/Inf loss).
struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// A pipeline stage failed; carries the stage name for diagnostics.
struct PipelineError : std::runtime_error {
  PipelineError(const std::string& stage_name, const std::string& msg)
      : std::runtime_error("stage '" + stage_name + "': " + msg), stage(stage_name) {}
  std::string stage;
};

}  // namespace eaaslab
