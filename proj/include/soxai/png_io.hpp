#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "soxai/tensor.hpp"

namespace soxai::png {

/// Decodes an 8-bit grayscale, RGB or RGBA PNG into an H x W x C u8 tensor.
/// Other bit depths and color types raise UnsupportedImage.
Tensor decode(std::span<const unsigned char> bytes);

/// Encodes an H x W x {1,3,4} u8 tensor (rank 2 is treated as grayscale).
std::string encode(const Tensor& image);

Tensor read_image(const std::filesystem::path& path);
void write_image(const Tensor& image, const std::filesystem::path& path);

/// Image dimensions from the IHDR chunk without decoding pixels.
struct ImageInfo {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
};
ImageInfo read_info(const std::filesystem::path& path);

} // namespace soxai::png
