#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace soxai {

enum class DType : std::uint8_t { F32, F64, U8 };

std::string_view to_string(DType dtype) noexcept;
std::size_t dtype_size(DType dtype) noexcept;

/// Dense row-major tensor with 1-4 dimensions.
///
/// Elements are held as doubles regardless of dtype; every f32 and u8 value
/// is exactly representable, so narrowing back on write is lossless.
struct Tensor {
    DType dtype = DType::F64;
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(DType dt, std::vector<std::size_t> shp);
    Tensor(DType dt, std::vector<std::size_t> shp, std::vector<double> values);

    std::size_t rank() const noexcept { return shape.size(); }
    std::size_t size() const noexcept { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t shape_product(std::span<const std::size_t> shape) noexcept;

/// Throws InvalidArgument when shape/data disagree or a dimension is zero.
void check_invariants(const Tensor& t);

} // namespace soxai
