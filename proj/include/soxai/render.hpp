#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "soxai/cluster_report.hpp"
#include "soxai/curation.hpp"
#include "soxai/dbscan.hpp"
#include "soxai/manifest.hpp"
#include "soxai/matrix.hpp"
#include "soxai/parallel.hpp"
#include "soxai/tensor.hpp"

namespace soxai {

inline constexpr std::array<std::string_view, 12> kClusterPalette = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#bcbd22", "#17becf", "#393b79", "#637939", "#843c39"};
inline constexpr std::string_view kNoiseColor = "#9e9e9e";

std::string_view cluster_color(int cluster);

/// Square crop around the explanation's high-weight box (alpha >= 0.5 max,
/// padded 10% per side); the central square when alpha is constant.
PixelRect thumbnail_crop(std::size_t image_h, std::size_t image_w, const Tensor& explanation);

/// Crops per thumbnail_crop and resamples bilinearly to size x size.
Tensor thumbnail(const Tensor& image, const Tensor& explanation, std::size_t size);

enum class ScatterFormat { Svg, Html };

/// Fig.-1 style scatter: one cluster-colored marker per point, or an image
/// chip with a colored frame when `thumbs` maps the id to a chip path.
/// Output bytes depend only on the inputs.
std::string render_scatter(const Matrix& coords, const std::vector<std::string>& ids, const ClusterLabels& labels,
                           const DatasetManifest& manifest, ScatterFormat format,
                           const std::map<std::string, std::string>& thumbs = {});

struct ViewPoint {
    std::string id;
    double x = 0, y = 0;
    int cluster = kNoise;
    std::string label;
    std::optional<std::string> thumb;
    double mass = 0.0;

    friend bool operator==(const ViewPoint&, const ViewPoint&) = default;
};

struct ViewBundle {
    int version = 1;
    std::vector<ViewPoint> points;
    nlohmann::json clusters = nlohmann::json::array();
    std::array<double, 4> bounds{};  // min_x, min_y, max_x, max_y

    friend bool operator==(const ViewBundle&, const ViewBundle&) = default;
};

nlohmann::json to_json(const ViewBundle& b);
ViewBundle view_bundle_from_json(const nlohmann::json& j);

constexpr std::size_t kThumbSize = 64;

/// Writes bundle.json and thumbs/ under `out_dir` for the analyst viewer.
ViewBundle export_view_bundle(const Matrix& coords, const std::vector<std::string>& ids, const ClusterLabels& labels,
                              const DatasetManifest& manifest, const std::vector<double>& mass,
                              const ClusterReport& report, const std::filesystem::path& out_dir,
                              const Exec& exec = Exec::serial());

} // namespace soxai
