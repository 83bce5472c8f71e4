#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace karyoseg {

enum class ErrorCode {
    InvalidArgument,
    DegenerateHistogram,
    DanglingIntersection,
    UnfillableGap,
    MissingScore,
    LayoutFailure,
    Decode,
    Io,
    NotFound,
    Conflict,
};

/// Stable machine-readable name, used in `{code, message}` payloads.
std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition) fail(ErrorCode::InvalidArgument, message);
}

}  // namespace karyoseg
