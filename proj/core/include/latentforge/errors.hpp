#pragma once

#include <stdexcept>
#include <string>

namespace latentforge {

// Caller violated a precondition (bad shape, bad argument, bad state).
struct ContractViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A computation produced NaN/Inf or otherwise diverged.
struct NumericFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A generator ran out of raw material (name pools, object pools, ...).
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A lookup by name or id found nothing.
struct LookupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed config or serialized artifact. Carries a 1-based line number
// when the source is line-oriented (0 otherwise).
struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, int line_no = 0)
      : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
        line(line_no) {}
  int line;
};

// Filesystem-level failure (open, read, write).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A pipeline stage failed; the message names the stage and the cause.
struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace latentforge
