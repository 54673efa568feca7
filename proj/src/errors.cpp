#include "toolpose/errors.hpp"

namespace toolpose {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::BehindCamera: return "BehindCamera";
        case ErrorCode::JointOutOfRange: return "JointOutOfRange";
        case ErrorCode::StaleCache: return "StaleCache";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::EmptyMask: return "EmptyMask";
        case ErrorCode::AllCandidatesDiverged: return "AllCandidatesDiverged";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorCode::RenderFailure: return "RenderFailure";
        case ErrorCode::InsufficientViews: return "InsufficientViews";
        case ErrorCode::InvalidSpec: return "InvalidSpec";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::IndexMismatch: return "IndexMismatch";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace toolpose
