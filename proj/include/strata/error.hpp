#pragma once

#include <stdexcept>
#include <string>

namespace strata {

enum class ErrorKind {
    DimensionMismatch,
    NegativeEntry,
    NonFinite,
    EmptyTeam,
    InvalidGraph,
    UnknownEdge,
    RateAboveCeiling,
    NegativeRate,
    IndexOutOfRange,
    NumericalFailure,
    DefectiveMatrix,
    BoundTooLarge,
    ZeroMeanTrait,
    ZeroTarget,
    InvalidScenario,
    InvalidArgument,
    ParseError,
    SchemaVersionMismatch,
    InvariantViolation,
    Io,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NegativeEntry: return "NegativeEntry";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::EmptyTeam: return "EmptyTeam";
    case ErrorKind::InvalidGraph: return "InvalidGraph";
    case ErrorKind::UnknownEdge: return "UnknownEdge";
    case ErrorKind::RateAboveCeiling: return "RateAboveCeiling";
    case ErrorKind::NegativeRate: return "NegativeRate";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::DefectiveMatrix: return "DefectiveMatrix";
    case ErrorKind::BoundTooLarge: return "BoundTooLarge";
    case ErrorKind::ZeroMeanTrait: return "ZeroMeanTrait";
    case ErrorKind::ZeroTarget: return "ZeroTarget";
    case ErrorKind::InvalidScenario: return "InvalidScenario";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

/// Single exception type for the library; `kind()` tells callers what went wrong.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
    if (!condition) fail(kind, what);
}

} // namespace strata
