#include "soxai/fileio.hpp"

#include <fstream>
#include <iterator>

#include "soxai/error.hpp"

namespace soxai {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::Io: return "io";
    case ErrorCode::BadMagic: return "bad-magic";
    case ErrorCode::UnsupportedVersion: return "unsupported-version";
    case ErrorCode::UnsupportedDtype: return "unsupported-dtype";
    case ErrorCode::MalformedHeader: return "malformed-header";
    case ErrorCode::SizeMismatch: return "size-mismatch";
    case ErrorCode::UnsupportedImage: return "unsupported-image";
    case ErrorCode::MalformedJson: return "malformed-json";
    case ErrorCode::UnknownSchemaVersion: return "unknown-schema-version";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::ZeroMass: return "zero-mass";
    case ErrorCode::NoSamples: return "no-samples";
    case ErrorCode::Degenerate: return "degenerate";
    case ErrorCode::SearchFailed: return "search-failed";
    case ErrorCode::NonFinite: return "non-finite";
    case ErrorCode::UnknownCluster: return "unknown-cluster";
    case ErrorCode::Undefined: return "undefined";
    }
    return "unknown";
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_file_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::Io, "cannot write " + path.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            throw Error(ErrorCode::Io, "write failed for " + path.string());
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::Io, "cannot replace " + path.string());
    }
}

std::string relative_to(const std::filesystem::path& path, const std::filesystem::path& base) {
    std::error_code ec;
    const auto abs_path = std::filesystem::weakly_canonical(std::filesystem::absolute(path), ec);
    const auto abs_base = std::filesystem::weakly_canonical(std::filesystem::absolute(base), ec);
    return abs_path.lexically_relative(abs_base).generic_string();
}

} // namespace soxai
