#include "pwrgram/geometry.hpp"

namespace pwrgram {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::coincident_sites: return "CoincidentSites";
    case ErrorCode::site_outside_box: return "SiteOutsideBox";
    case ErrorCode::topology_corruption: return "TopologyCorruption";
    case ErrorCode::empty_input: return "EmptyInput";
    case ErrorCode::non_finite_input: return "NonFiniteInput";
    case ErrorCode::bad_magic: return "BadMagic";
    case ErrorCode::truncated_payload: return "TruncatedPayload";
    case ErrorCode::io_failure: return "IoFailure";
    case ErrorCode::missing_geometry: return "MissingGeometry";
    case ErrorCode::size_mismatch: return "SizeMismatch";
    case ErrorCode::too_few_sites: return "TooFewSites";
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::timeout: return "Timeout";
  }
  return "Unknown";
}

const char* to_string(PrecisionMode mode) {
  return mode == PrecisionMode::single ? "single" : "double";
}

}  // namespace pwrgram
