#include "simproto/error.hpp"

namespace simproto {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfRange: return "out-of-range";
    case ErrorCode::EmptyClass: return "empty-class";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::Ingestion: return "ingestion";
    case ErrorCode::DegenerateRepresentation: return "degenerate-representation";
    case ErrorCode::DegenerateRow: return "degenerate-row";
    case ErrorCode::InvalidConfidence: return "invalid-confidence";
    case ErrorCode::InvalidEpoch: return "invalid-epoch";
    case ErrorCode::Numeric: return "numeric";
    case ErrorCode::Spec: return "spec";
    case ErrorCode::Geometry: return "geometry";
    case ErrorCode::UnsupportedModel: return "unsupported-model";
    case ErrorCode::Config: return "config";
    case ErrorCode::EmptyDataset: return "empty-dataset";
  }
  return "unknown";
}

}  // namespace simproto
