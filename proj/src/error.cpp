#include "rmg/error.hpp"

namespace rmg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfWindow: return "OutOfWindow";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::ChannelCountError: return "ChannelCountError";
    case ErrorCode::NyquistError: return "NyquistError";
    case ErrorCode::DegenerateSeries: return "DegenerateSeries";
    case ErrorCode::AnnotationOverlap: return "AnnotationOverlap";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::WindowTooLong: return "WindowTooLong";
    case ErrorCode::UnknownWavelet: return "UnknownWavelet";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::LabelError: return "LabelError";
    case ErrorCode::DivergenceError: return "DivergenceError";
    case ErrorCode::StratifyError: return "StratifyError";
    case ErrorCode::NotEnoughRoutines: return "NotEnoughRoutines";
    case ErrorCode::SubjectError: return "SubjectError";
    case ErrorCode::SelectorError: return "SelectorError";
    case ErrorCode::PlanError: return "PlanError";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::NoPeak: return "NoPeak";
    case ErrorCode::NoEvents: return "NoEvents";
    case ErrorCode::CorruptDataset: return "CorruptDataset";
    case ErrorCode::SizeError: return "SizeError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

bool is_numeric(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteInput:
    case ErrorCode::DivergenceError:
    case ErrorCode::DegenerateSeries:
    case ErrorCode::NoPeak:
    case ErrorCode::NoEvents:
    case ErrorCode::InvariantViolation:
      return true;
    default:
      return false;
  }
}

}  // namespace rmg
