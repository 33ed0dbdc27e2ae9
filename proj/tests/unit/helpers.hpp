#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "soxai/manifest.hpp"
#include "soxai/matrix.hpp"
#include "soxai/npy.hpp"
#include "soxai/png_io.hpp"
#include "soxai/rng.hpp"
#include "soxai/tensor.hpp"

namespace testutil {

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("soxai_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline soxai::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double sigma = 1.0) {
    soxai::Rng rng(seed);
    soxai::Matrix m(rows, cols);
    for (auto& v : m.values()) v = rng.normal(0.0, sigma);
    return m;
}

inline soxai::Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double lo = -1.0,
                                   double hi = 1.0, soxai::DType dt = soxai::DType::F64) {
    soxai::Rng rng(seed);
    soxai::Tensor t(dt, std::move(shape));
    for (auto& v : t.data) {
        v = rng.uniform(lo, hi);
        if (dt == soxai::DType::F32) v = static_cast<double>(static_cast<float>(v));
    }
    return t;
}

/// Adds a sample to `m`, writing its tensors (and image when given) under `root`.
inline void add_sample(soxai::DatasetManifest& m, const std::filesystem::path& root, const std::string& id,
                       const soxai::Tensor& features, const soxai::Tensor& explanation, const std::string& label,
                       const std::optional<soxai::Tensor>& image = std::nullopt) {
    soxai::SampleRecord s;
    s.id = id;
    s.label = label;
    s.features = "features/" + id + ".npy";
    s.explanation = "explanations/" + id + ".npy";
    soxai::npy::write_tensor(features, root / s.features);
    soxai::npy::write_tensor(explanation, root / s.explanation);
    if (image) {
        s.image = "images/" + id + ".png";
        soxai::png::write_image(*image, root / *s.image);
    }
    m.samples.push_back(s);
}

} // namespace testutil
