#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ledvlc {

enum class ErrorKind {
    InvalidGeometry,
    InvalidFocus,
    DegenerateDistortion,
    InvalidPattern,
    InvalidParams,
    CalibrationFailure,
    IllConditionedFit,
    AmbiguousCorner,
    ConstraintInfeasible,
    UndefinedBer,
    SizeMismatch,
    Io,
    Parse,
    Validation,
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidGeometry: return "invalid-geometry";
        case ErrorKind::InvalidFocus: return "invalid-focus";
        case ErrorKind::DegenerateDistortion: return "degenerate-distortion";
        case ErrorKind::InvalidPattern: return "invalid-pattern";
        case ErrorKind::InvalidParams: return "invalid-params";
        case ErrorKind::CalibrationFailure: return "calibration-failure";
        case ErrorKind::IllConditionedFit: return "ill-conditioned-fit";
        case ErrorKind::AmbiguousCorner: return "ambiguous-corner";
        case ErrorKind::ConstraintInfeasible: return "constraint-infeasible";
        case ErrorKind::UndefinedBer: return "undefined-ber";
        case ErrorKind::SizeMismatch: return "size-mismatch";
        case ErrorKind::Io: return "io";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Validation: return "validation";
    }
    return "unknown";
}

/// Single exception type for the library. `stage()` names the pipeline
/// stage that raised it when the error crossed a composite operation.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what, std::string stage = {})
        : std::runtime_error(what), kind_(kind), stage_(std::move(stage)) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& stage() const noexcept { return stage_; }

    Error with_stage(std::string stage) const { return Error(kind_, what(), std::move(stage)); }

private:
    ErrorKind kind_;
    std::string stage_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace ledvlc
