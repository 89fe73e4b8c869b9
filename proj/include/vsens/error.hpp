#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vsens {

enum class ErrorCode {
    InvalidStep,
    InvalidArgument,
    // BVH / OBJ parsing
    MissingSection,
    ChannelMismatch,
    FrameCountMismatch,
    MalformedNumber,
    UnbalancedBraces,
    Syntax,
    MalformedRecord,
    IndexOutOfRange,
    EmptyMesh,
    // runtime
    TimeOutOfRange,
    UnknownJoint,
    UnknownSensor,
    HistorySpacingMismatch,
    SessionFinished,
    // config / service
    InvalidConfig,
    FileNotFound,
    RateViolation,
    DuplicateId,
    InvalidState,
    SeekOutOfRange,
    EmptyRecording,
    UnknownSession,
    Io,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the engine. Parse failures
/// carry the 1-based source line; everything else reports line 0.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message, int line = 0);

    ErrorCode code() const noexcept { return code_; }
    int line() const noexcept { return line_; }

private:
    ErrorCode code_;
    int line_;
};

struct Issue {
    ErrorCode code;
    std::string path;  // JSON-pointer-ish location, e.g. "sensors[2].sample_rate"
    std::string message;
};

/// Aggregated validation failure; holds every problem found, not just the first.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<Issue> issues);

    const std::vector<Issue>& issues() const noexcept { return issues_; }

private:
    std::vector<Issue> issues_;
};

}  // namespace vsens
