#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hazdiff {

enum class ErrorCode {
    MalformedHeader,
    NonBinaryColumn,
    NonFiniteValue,
    EmptyDataset,
    InvalidArgument,
    DegenerateDesign,
    NoConvergence,
    FoldTooSmall,
    SingleClassFold,
    NoOverlapInArm,
    Overflow,
    NoRootInBracket,
    ZeroDenominator,
    ZeroSlope,
    TruthRequired,
    ZeroWeightMass,
    RejectionStall,
    NonpositiveRate,
    CalibrationInfeasible,
    IoError,
};

inline constexpr std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedHeader: return "MalformedHeader";
        case ErrorCode::NonBinaryColumn: return "NonBinaryColumn";
        case ErrorCode::NonFiniteValue: return "NonFiniteValue";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DegenerateDesign: return "DegenerateDesign";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::FoldTooSmall: return "FoldTooSmall";
        case ErrorCode::SingleClassFold: return "SingleClassFold";
        case ErrorCode::NoOverlapInArm: return "NoOverlapInArm";
        case ErrorCode::Overflow: return "Overflow";
        case ErrorCode::NoRootInBracket: return "NoRootInBracket";
        case ErrorCode::ZeroDenominator: return "ZeroDenominator";
        case ErrorCode::ZeroSlope: return "ZeroSlope";
        case ErrorCode::TruthRequired: return "TruthRequired";
        case ErrorCode::ZeroWeightMass: return "ZeroWeightMass";
        case ErrorCode::RejectionStall: return "RejectionStall";
        case ErrorCode::NonpositiveRate: return "NonpositiveRate";
        case ErrorCode::CalibrationInfeasible: return "CalibrationInfeasible";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

/// Data errors are the caller's input; everything else is raised by an estimator.
inline constexpr bool is_data_error(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedHeader:
        case ErrorCode::NonBinaryColumn:
        case ErrorCode::NonFiniteValue:
        case ErrorCode::EmptyDataset:
        case ErrorCode::InvalidArgument:
        case ErrorCode::IoError:
            return true;
        default:
            return false;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace hazdiff
