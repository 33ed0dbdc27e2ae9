#include "soxai/png_io.hpp"

#include <csetjmp>
#include <cstring>
#include <string>

#include <png.h>

#include "soxai/error.hpp"
#include "soxai/fileio.hpp"

namespace soxai::png {
namespace {

struct ReadCursor {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos;
};

struct ErrorSlot {
    char message[256];
};

void on_error(png_structp png_ptr, png_const_charp msg) {
    auto* slot = static_cast<ErrorSlot*>(png_get_error_ptr(png_ptr));
    std::snprintf(slot->message, sizeof slot->message, "%s", msg);
    png_longjmp(png_ptr, 1);
}

void on_warning(png_structp, png_const_charp) {}

void read_chunk(png_structp png_ptr, png_bytep out, png_size_t length) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png_ptr));
    if (cur->pos + length > cur->size) {
        png_error(png_ptr, "unexpected end of data");
    }
    std::memcpy(out, cur->data + cur->pos, length);
    cur->pos += length;
}

void write_chunk(png_structp png_ptr, png_bytep in, png_size_t length) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png_ptr));
    out->append(reinterpret_cast<const char*>(in), length);
}

void flush_noop(png_structp) {}

// Raw pass over the decoder; depth/color limits are checked by the caller.
// Keeps C++ objects with destructors out of the setjmp frame.
bool decode_raw(const unsigned char* data, std::size_t size, ErrorSlot& err, png_uint_32& width, png_uint_32& height,
                int& bit_depth, int& color_type, unsigned char* pixels, std::size_t capacity, bool header_only) {
    png_structp png_ptr = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
    if (!png_ptr) {
        std::snprintf(err.message, sizeof err.message, "out of memory");
        return false;
    }
    png_infop info_ptr = png_create_info_struct(png_ptr);
    if (!info_ptr) {
        png_destroy_read_struct(&png_ptr, nullptr, nullptr);
        std::snprintf(err.message, sizeof err.message, "out of memory");
        return false;
    }
    ReadCursor cursor{data, size, 0};
    if (setjmp(png_jmpbuf(png_ptr))) {
        png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
        return false;
    }
    png_set_read_fn(png_ptr, &cursor, read_chunk);
    png_read_info(png_ptr, info_ptr);
    width = png_get_image_width(png_ptr, info_ptr);
    height = png_get_image_height(png_ptr, info_ptr);
    bit_depth = png_get_bit_depth(png_ptr, info_ptr);
    color_type = png_get_color_type(png_ptr, info_ptr);
    if (header_only || pixels == nullptr) {
        png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
        return true;
    }
    const std::size_t rowbytes = png_get_rowbytes(png_ptr, info_ptr);
    if (rowbytes * height > capacity) {
        png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
        std::snprintf(err.message, sizeof err.message, "row size mismatch");
        return false;
    }
    const int passes = png_set_interlace_handling(png_ptr);
    png_read_update_info(png_ptr, info_ptr);
    for (int pass = 0; pass < passes; ++pass) {
        for (png_uint_32 y = 0; y < height; ++y) {
            png_read_row(png_ptr, pixels + y * rowbytes, nullptr);
        }
    }
    png_read_end(png_ptr, nullptr);
    png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
    return true;
}

std::size_t channels_for(int color_type) {
    switch (color_type) {
    case PNG_COLOR_TYPE_GRAY: return 1;
    case PNG_COLOR_TYPE_RGB: return 3;
    case PNG_COLOR_TYPE_RGB_ALPHA: return 4;
    default: return 0;
    }
}

constexpr png_uint_32 kMaxSide = 1u << 15;

} // namespace

Tensor decode(std::span<const unsigned char> bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw Error(ErrorCode::BadMagic, "not a PNG file");
    }
    ErrorSlot err{};
    png_uint_32 width = 0, height = 0;
    int depth = 0, color = 0;
    if (!decode_raw(bytes.data(), bytes.size(), err, width, height, depth, color, nullptr, 0, true)) {
        throw Error(ErrorCode::MalformedHeader, std::string("png: ") + err.message);
    }
    if (depth != 8) {
        throw Error(ErrorCode::UnsupportedImage, "unsupported PNG bit depth " + std::to_string(depth));
    }
    const std::size_t channels = channels_for(color);
    if (channels == 0) {
        throw Error(ErrorCode::UnsupportedImage, "unsupported PNG color type " + std::to_string(color));
    }
    if (width == 0 || height == 0 || width > kMaxSide || height > kMaxSide) {
        throw Error(ErrorCode::UnsupportedImage, "unsupported PNG dimensions");
    }
    std::vector<unsigned char> pixels(static_cast<std::size_t>(width) * height * channels);
    if (!decode_raw(bytes.data(), bytes.size(), err, width, height, depth, color, pixels.data(), pixels.size(),
                    false)) {
        throw Error(ErrorCode::SizeMismatch, std::string("png: ") + err.message);
    }
    Tensor t(DType::U8, {height, width, channels});
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        t.data[i] = pixels[i];
    }
    return t;
}

std::string encode(const Tensor& image) {
    check_invariants(image);
    if (image.dtype != DType::U8 || (image.rank() != 2 && image.rank() != 3)) {
        throw Error(ErrorCode::UnsupportedImage, "PNG encoding needs an H x W x C u8 tensor");
    }
    const std::size_t channels = image.rank() == 2 ? 1 : image.dim(2);
    int color = 0;
    switch (channels) {
    case 1: color = PNG_COLOR_TYPE_GRAY; break;
    case 3: color = PNG_COLOR_TYPE_RGB; break;
    case 4: color = PNG_COLOR_TYPE_RGB_ALPHA; break;
    default: throw Error(ErrorCode::UnsupportedImage, "PNG encoding needs 1, 3 or 4 channels");
    }
    const std::size_t height = image.dim(0);
    const std::size_t width = image.dim(1);
    std::vector<unsigned char> pixels(image.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = static_cast<unsigned char>(image.data[i]);
    }

    std::string out;
    ErrorSlot err{};
    png_structp png_ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_error, on_warning);
    png_infop info_ptr = png_ptr ? png_create_info_struct(png_ptr) : nullptr;
    if (!png_ptr || !info_ptr) {
        png_destroy_write_struct(&png_ptr, &info_ptr);
        throw Error(ErrorCode::Io, "png: out of memory");
    }
    if (setjmp(png_jmpbuf(png_ptr))) {
        png_destroy_write_struct(&png_ptr, &info_ptr);
        throw Error(ErrorCode::Io, std::string("png: ") + err.message);
    }
    png_set_write_fn(png_ptr, &out, write_chunk, flush_noop);
    png_set_compression_level(png_ptr, 6);
    png_set_IHDR(png_ptr, info_ptr, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png_ptr, info_ptr);
    const std::size_t stride = width * channels;
    for (std::size_t y = 0; y < height; ++y) {
        png_write_row(png_ptr, pixels.data() + y * stride);
    }
    png_write_end(png_ptr, nullptr);
    png_destroy_write_struct(&png_ptr, &info_ptr);
    return out;
}

Tensor read_image(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return decode(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

void write_image(const Tensor& image, const std::filesystem::path& path) { write_file(path, encode(image)); }

ImageInfo read_info(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
        throw Error(ErrorCode::BadMagic, path.string() + ": not a PNG file");
    }
    ErrorSlot err{};
    png_uint_32 width = 0, height = 0;
    int depth = 0, color = 0;
    if (!decode_raw(bytes.data(), bytes.size(), err, width, height, depth, color, nullptr, 0, true)) {
        throw Error(ErrorCode::MalformedHeader, path.string() + ": " + err.message);
    }
    return {height, width, channels_for(color)};
}

} // namespace soxai::png
