#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "soxai/dbscan.hpp"
#include "soxai/manifest.hpp"
#include "soxai/parallel.hpp"
#include "soxai/tensor.hpp"

namespace soxai {

enum class MarkAction { Exclude, Mask };
enum class OverrideAction { Keep, Exclude, Mask };

struct ClusterMark {
    int cluster = 0;
    MarkAction action = MarkAction::Exclude;
    std::string note;
};

struct SampleOverride {
    std::string id;
    OverrideAction action = OverrideAction::Keep;
};

/// Analyst decisions on clusters, as exchanged through marks.json.
struct BiasMarks {
    int version = 1;
    std::vector<ClusterMark> marks;
    std::vector<SampleOverride> sample_overrides;
};

BiasMarks marks_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BiasMarks& m);
BiasMarks load_marks(const std::filesystem::path& path);

/// Half-open pixel rectangle [row0, row1) x [col0, col1).
struct PixelRect {
    std::size_t row0 = 0, col0 = 0, row1 = 0, col1 = 0;

    std::size_t area() const { return row1 > row0 && col1 > col0 ? (row1 - row0) * (col1 - col0) : 0; }
    friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

double iou(const PixelRect& a, const PixelRect& b);

struct Fill {
    enum class Kind { Mean, Constant };
    Kind kind = Kind::Mean;
    double value = 0.0;

    static Fill mean() { return {}; }
    static Fill constant(double v) { return {Kind::Constant, v}; }
};

struct MaskJob {
    std::string id;
    PixelRect region;
    Fill fill;
};

struct CurationPlan {
    std::vector<std::string> excluded;  // manifest order
    std::vector<MaskJob> mask_jobs;     // manifest order
    std::vector<std::string> warnings;
    std::string output_manifest = "manifest.json";
};

nlohmann::json to_json(const CurationPlan& p);

/// Bounding box of cells with weight >= 0.5 * max, scaled to image pixels.
/// Empty when the map has no positive weight.
std::optional<PixelRect> explanation_region(const Tensor& explanation, std::size_t image_h, std::size_t image_w);

/// Expands cluster marks into per-sample actions; overrides are applied last.
/// `ids` are row-aligned with `labels`. Mask jobs whose sample has no image
/// (or no usable explanation region) are downgraded to exclusions with a
/// warning. Throws UnknownCluster for marks naming a missing cluster.
CurationPlan plan(const BiasMarks& marks, const ClusterLabels& labels, const std::vector<std::string>& ids,
                  const DatasetManifest& manifest, Fill fill = Fill::mean());

struct MaskResult {
    Tensor image;
    bool clamped = false;
};

/// Replaces pixels inside `region` (clamped to the image) by the fill; the
/// mean fill is the per-channel mean of pixels outside the region.
MaskResult mask_region(const Tensor& image, const PixelRect& region, Fill fill);

struct ApplyResult {
    DatasetManifest manifest;
    std::vector<std::string> errors;
};

/// Materializes the cleaned dataset under `out_dir`: kept samples are copied
/// with their relative layout, masked images are rewritten, and a manifest
/// without the excluded samples is emitted. Never writes under the source root.
ApplyResult apply(const CurationPlan& plan, const DatasetManifest& manifest, const std::filesystem::path& out_dir,
                  const Exec& exec = Exec::serial());

} // namespace soxai
