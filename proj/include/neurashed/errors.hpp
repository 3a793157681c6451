#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace neurashed {

// Every failure mode in the library maps to one of these named codes.
// Violations found by validators are reported with the same codes.
enum class ErrorCode {
    MalformedDocument,
    EdgeSkipsLevel,
    ThresholdOutOfRange,
    DuplicateNodeId,
    NoClassNodes,
    InputNodeNotLevelOne,
    EmptyBatch,
    EmptyDataset,
    LabelOutOfRange,
    NonFiniteLogit,
    InvalidConfig,
    NonPositiveSigma,
    ZeroDenominator,
    EmptyGroup,
    LevelOutOfRange,
    UnknownScenario,
    IoError,
    EmptySeries,
};

inline std::string_view error_name(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::EdgeSkipsLevel: return "EdgeSkipsLevel";
    case ErrorCode::ThresholdOutOfRange: return "ThresholdOutOfRange";
    case ErrorCode::DuplicateNodeId: return "DuplicateNodeId";
    case ErrorCode::NoClassNodes: return "NoClassNodes";
    case ErrorCode::InputNodeNotLevelOne: return "InputNodeNotLevelOne";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::NonFiniteLogit: return "NonFiniteLogit";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::LevelOutOfRange: return "LevelOutOfRange";
    case ErrorCode::UnknownScenario: return "UnknownScenario";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptySeries: return "EmptySeries";
    }
    return "UnknownError";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace neurashed
