#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rmg {

enum class ErrorCode {
  OutOfWindow,
  ShapeMismatch,
  EmptySequence,
  ChannelCountError,
  NyquistError,
  DegenerateSeries,
  AnnotationOverlap,
  RangeError,
  WindowTooLong,
  UnknownWavelet,
  NonFiniteInput,
  LabelError,
  DivergenceError,
  StratifyError,
  NotEnoughRoutines,
  SubjectError,
  SelectorError,
  PlanError,
  EmptySeries,
  NoPeak,
  NoEvents,
  CorruptDataset,
  SizeError,
  FormatError,
  IoError,
  InvariantViolation,
};

std::string_view to_string(ErrorCode code);

// Numeric failures map to CLI exit code 3, everything else data-related to 2.
bool is_numeric(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rmg
