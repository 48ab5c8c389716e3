#include "nestlab/error.hpp"

namespace nestlab {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::AtCriticalPoint: return "AtCriticalPoint";
    case ErrorCode::EscapedDomain: return "EscapedDomain";
    case ErrorCode::NoFixedPoint: return "NoFixedPoint";
    case ErrorCode::CriticalOrbitPeriodic: return "CriticalOrbitPeriodic";
    case ErrorCode::ZeroDerivative: return "ZeroDerivative";
    case ErrorCode::NotSummable: return "NotSummable";
    case ErrorCode::BumpInfeasible: return "BumpInfeasible";
    case ErrorCode::NoSegments: return "NoSegments";
    case ErrorCode::InsufficientDepth: return "InsufficientDepth";
    case ErrorCode::InsufficientBranches: return "InsufficientBranches";
    case ErrorCode::SignatureUnstable: return "SignatureUnstable";
    case ErrorCode::NeutralSuspected: return "NeutralSuspected";
    case ErrorCode::TruncatedByC: return "TruncatedByC";
    case ErrorCode::UnsupportedPrecision: return "UnsupportedPrecision";
    case ErrorCode::IOFailure: return "IOFailure";
    case ErrorCode::ParseError: return "ParseError";
    }
    return "Unknown";
}

} // namespace nestlab
