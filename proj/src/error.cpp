#include "vsens/error.hpp"

namespace vsens {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidStep: return "InvalidStep";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::MissingSection: return "MissingSection";
        case ErrorCode::ChannelMismatch: return "ChannelMismatch";
        case ErrorCode::FrameCountMismatch: return "FrameCountMismatch";
        case ErrorCode::MalformedNumber: return "MalformedNumber";
        case ErrorCode::UnbalancedBraces: return "UnbalancedBraces";
        case ErrorCode::Syntax: return "Syntax";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::EmptyMesh: return "EmptyMesh";
        case ErrorCode::TimeOutOfRange: return "TimeOutOfRange";
        case ErrorCode::UnknownJoint: return "UnknownJoint";
        case ErrorCode::UnknownSensor: return "UnknownSensor";
        case ErrorCode::HistorySpacingMismatch: return "HistorySpacingMismatch";
        case ErrorCode::SessionFinished: return "SessionFinished";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::FileNotFound: return "FileNotFound";
        case ErrorCode::RateViolation: return "RateViolation";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::InvalidState: return "InvalidState";
        case ErrorCode::SeekOutOfRange: return "SeekOutOfRange";
        case ErrorCode::EmptyRecording: return "EmptyRecording";
        case ErrorCode::UnknownSession: return "UnknownSession";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

namespace {

std::string format_message(ErrorCode code, const std::string& message, int line) {
    std::string out(to_string(code));
    if (line > 0) {
        out += " (line " + std::to_string(line) + ")";
    }
    out += ": ";
    out += message;
    return out;
}

std::string summarize(const std::vector<Issue>& issues) {
    std::string out = std::to_string(issues.size()) + " validation error(s)";
    for (const auto& issue : issues) {
        out += "\n  ";
        out += to_string(issue.code);
        if (!issue.path.empty()) {
            out += " at " + issue.path;
        }
        out += ": " + issue.message;
    }
    return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, int line)
    : std::runtime_error(format_message(code, message, line)), code_(code), line_(line) {}

ValidationError::ValidationError(std::vector<Issue> issues)
    : Error(ErrorCode::InvalidConfig, summarize(issues)), issues_(std::move(issues)) {}

}  // namespace vsens
