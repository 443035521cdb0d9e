#pragma once

#include <stdexcept>
#include <string>

namespace cwkb {

enum class ErrorCode {
    Syntax,
    UnknownIdentifier,
    UnboundVariable,
    NonFinite,
    Schema,
    PoleDetected,
    SingularLeadingMatrix,
    AmbiguousLabeling,
    NonRealMode,
    DegenerateAsymptotic,
    TangentialCrossing,
    LeftStrip,
    NoConvergence,
    CollapsedToRealAxis,
    MatchingAmbiguity,
    GapTooSmall,
    TransportResidual,
    RouteDiscrepancy,
    ParallelismResidual,
    ThetaInconsistent,
    TailBound,
    StepUnderflow,
    MissingBranchPoint,
    FitResidual,
    QuadratureNonConvergence,
    GridMismatch,
    GroupVelocity,
    MinimizerAtBoundary,
    NonPositiveLambda2,
    FlagAbsent,
    GridCoverage,
    Validation,
};

inline const char* to_string(ErrorCode c) {
    switch (c) {
    case ErrorCode::Syntax: return "Syntax";
    case ErrorCode::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorCode::UnboundVariable: return "UnboundVariable";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::Schema: return "Schema";
    case ErrorCode::PoleDetected: return "PoleDetected";
    case ErrorCode::SingularLeadingMatrix: return "SingularLeadingMatrix";
    case ErrorCode::AmbiguousLabeling: return "AmbiguousLabeling";
    case ErrorCode::NonRealMode: return "NonRealMode";
    case ErrorCode::DegenerateAsymptotic: return "DegenerateAsymptotic";
    case ErrorCode::TangentialCrossing: return "TangentialCrossing";
    case ErrorCode::LeftStrip: return "LeftStrip";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::CollapsedToRealAxis: return "CollapsedToRealAxis";
    case ErrorCode::MatchingAmbiguity: return "MatchingAmbiguity";
    case ErrorCode::GapTooSmall: return "GapTooSmall";
    case ErrorCode::TransportResidual: return "TransportResidual";
    case ErrorCode::RouteDiscrepancy: return "RouteDiscrepancy";
    case ErrorCode::ParallelismResidual: return "ParallelismResidual";
    case ErrorCode::ThetaInconsistent: return "ThetaInconsistent";
    case ErrorCode::TailBound: return "TailBound";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::MissingBranchPoint: return "MissingBranchPoint";
    case ErrorCode::FitResidual: return "FitResidual";
    case ErrorCode::QuadratureNonConvergence: return "QuadratureNonConvergence";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::GroupVelocity: return "GroupVelocity";
    case ErrorCode::MinimizerAtBoundary: return "MinimizerAtBoundary";
    case ErrorCode::NonPositiveLambda2: return "NonPositiveLambda2";
    case ErrorCode::FlagAbsent: return "FlagAbsent";
    case ErrorCode::GridCoverage: return "GridCoverage";
    case ErrorCode::Validation: return "Validation";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

    /// True for failures that stem from the model file rather than numerics.
    bool is_validation() const noexcept {
        switch (code_) {
        case ErrorCode::Syntax:
        case ErrorCode::UnknownIdentifier:
        case ErrorCode::UnboundVariable:
        case ErrorCode::Schema:
        case ErrorCode::PoleDetected:
        case ErrorCode::Validation:
        case ErrorCode::FlagAbsent:
            return true;
        default:
            return false;
        }
    }

private:
    ErrorCode code_;
};

class ParseError : public Error {
public:
    ParseError(ErrorCode code, std::size_t offset, const std::string& what)
        : Error(code, what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

}  // namespace cwkb
