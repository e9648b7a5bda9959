#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fracprodi {

enum class ErrorCode {
  invalid_bounds,
  too_few_nodes,
  out_of_range,
  grid_mismatch,
  eigenvalue_precondition_failed,
  singular_system,
  precondition_not_met,
  no_convergence,
  positivity_violation,
  ordering_precondition_failed,
  containment_precondition_failed,
  insufficient_survivors,
  empty_interval,
  subsolution_inequality_violated,
  monotonicity_violated,
  max_iter_exceeded,
  bracket_invalid,
  predicate_inconsistent,
  parse_error,
  schema_error,
  range_error,
  io_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_bounds: return "invalid-bounds";
    case ErrorCode::too_few_nodes: return "too-few-nodes";
    case ErrorCode::out_of_range: return "out-of-range";
    case ErrorCode::grid_mismatch: return "grid-mismatch";
    case ErrorCode::eigenvalue_precondition_failed: return "eigenvalue-precondition-failed";
    case ErrorCode::singular_system: return "singular-system";
    case ErrorCode::precondition_not_met: return "precondition-not-met";
    case ErrorCode::no_convergence: return "no-convergence";
    case ErrorCode::positivity_violation: return "positivity-violation";
    case ErrorCode::ordering_precondition_failed: return "ordering-precondition-failed";
    case ErrorCode::containment_precondition_failed: return "containment-precondition-failed";
    case ErrorCode::insufficient_survivors: return "insufficient-survivors";
    case ErrorCode::empty_interval: return "empty-interval";
    case ErrorCode::subsolution_inequality_violated: return "subsolution-inequality-violated";
    case ErrorCode::monotonicity_violated: return "monotonicity-violated";
    case ErrorCode::max_iter_exceeded: return "max-iter-exceeded";
    case ErrorCode::bracket_invalid: return "bracket-invalid";
    case ErrorCode::predicate_inconsistent: return "predicate-inconsistent";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::schema_error: return "schema-error";
    case ErrorCode::range_error: return "range-error";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

/// Exception carrying one of the named failure kinds.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fracprodi
