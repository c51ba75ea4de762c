#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reponav {

enum class ErrorCode {
    RootNotFound,
    UnreadableFile,
    UnknownUnit,
    PathOutsideSnapshot,
    PathNotFound,
    InvalidPattern,
    ProviderUnavailable,
    ReasonerUnavailable,
    MalformedAfterRetry,
    ScriptExhausted,
    InvalidRequest,
    IndexMissing,
    StaleIndex,
    CorruptIndex,
    ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the engine; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::RootNotFound: return "RootNotFound";
        case ErrorCode::UnreadableFile: return "UnreadableFile";
        case ErrorCode::UnknownUnit: return "UnknownUnit";
        case ErrorCode::PathOutsideSnapshot: return "PathOutsideSnapshot";
        case ErrorCode::PathNotFound: return "PathNotFound";
        case ErrorCode::InvalidPattern: return "InvalidPattern";
        case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
        case ErrorCode::ReasonerUnavailable: return "ReasonerUnavailable";
        case ErrorCode::MalformedAfterRetry: return "MalformedAfterRetry";
        case ErrorCode::ScriptExhausted: return "ScriptExhausted";
        case ErrorCode::InvalidRequest: return "InvalidRequest";
        case ErrorCode::IndexMissing: return "IndexMissing";
        case ErrorCode::StaleIndex: return "StaleIndex";
        case ErrorCode::CorruptIndex: return "CorruptIndex";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

}  // namespace reponav
