#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace soxai {

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Generic form of `path` relative to `base`, used for provenance records.
std::string relative_to(const std::filesystem::path& path, const std::filesystem::path& base);

} // namespace soxai
