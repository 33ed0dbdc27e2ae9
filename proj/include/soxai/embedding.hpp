#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "soxai/manifest.hpp"
#include "soxai/matrix.hpp"
#include "soxai/parallel.hpp"
#include "soxai/tensor.hpp"

namespace soxai {

/// Truncated-model activations, H x W x N, channel-fastest.
struct FeatureMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<double> values;

    double at(std::size_t i, std::size_t j, std::size_t n) const { return values[(i * width + j) * channels + n]; }

    static FeatureMap from_tensor(const Tensor& t);
};

/// Non-negative first-order explanation weights, row-major.
struct ExplanationMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> weights;

    double at(std::size_t i, std::size_t j) const { return weights[i * width + j]; }

    /// Accepts H x W or H x W x 1.
    static ExplanationMap from_tensor(const Tensor& t);
    Tensor to_tensor(DType dtype = DType::F32) const;

    friend bool operator==(const ExplanationMap&, const ExplanationMap&) = default;
};

enum class ResizeMethod { Bilinear, Nearest };
enum class ZeroMassPolicy { Skip, Uniform };

/// Resamples onto a target grid using half-pixel cell centers. Same-size
/// input is returned unchanged.
ExplanationMap resize_explanation(const ExplanationMap& a, std::size_t target_h, std::size_t target_w,
                                  ResizeMethod method = ResizeMethod::Bilinear);

struct EmbedOptions {
    ZeroMassPolicy zero_mass = ZeroMassPolicy::Skip;
    ResizeMethod resize = ResizeMethod::Bilinear;
};

struct Embedding {
    std::vector<double> values;
    std::string sample_id;
    double mass = 0.0;
    bool uniform_fallback = false;
};

/// Explanation-weighted average of the feature map over its spatial cells:
///   values[n] = sum_ij m[i,j,n] * a[i,j] / sum_ij a[i,j]
/// `a` is resized to the feature grid first when shapes differ. Zero mass
/// raises ZeroMass under the Skip policy and falls back to plain average
/// pooling under Uniform.
Embedding embed(const FeatureMap& m, const ExplanationMap& a, const EmbedOptions& opts = {});

struct EmbeddingMatrix {
    Matrix data;
    std::vector<std::string> ids;
    std::vector<double> mass;
    std::vector<std::pair<std::string, std::string>> skipped;
    std::vector<std::string> uniform_fallback;  // ids embedded by plain average pooling
};

/// Embeds every sample of a manifest. Rows follow manifest order with skipped
/// samples removed; per-sample failures are recorded, never thrown, unless
/// no sample survives.
EmbeddingMatrix embed_dataset(const DatasetManifest& manifest, const EmbedOptions& opts = {},
                              const Exec& exec = Exec::serial());

} // namespace soxai
