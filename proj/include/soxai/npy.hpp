#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "soxai/tensor.hpp"

namespace soxai::npy {

/// Parses an NPY v1.0 byte stream. Accepts little-endian f4/f8 and u1, in
/// C or Fortran order; the result is always row-major.
///
/// Errors are classified: BadMagic, UnsupportedVersion, UnsupportedDtype,
/// MalformedHeader (unparseable dict or bad shape) and SizeMismatch.
Tensor parse(std::span<const unsigned char> bytes);

/// Serializes as NPY v1.0, C order, preamble padded to 64 bytes.
std::string serialize(const Tensor& t);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& t, const std::filesystem::path& path);

} // namespace soxai::npy
