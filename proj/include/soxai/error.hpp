#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace soxai {

enum class ErrorCode {
    Io,
    BadMagic,
    UnsupportedVersion,
    UnsupportedDtype,
    MalformedHeader,
    SizeMismatch,
    UnsupportedImage,
    MalformedJson,
    UnknownSchemaVersion,
    InvalidArgument,
    ZeroMass,
    NoSamples,
    Degenerate,
    SearchFailed,
    NonFinite,
    UnknownCluster,
    Undefined,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries a classification so callers
/// (and the CLI) can tell a truncated file from an unsupported one.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace soxai
