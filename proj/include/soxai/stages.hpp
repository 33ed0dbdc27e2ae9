#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "soxai/cluster_report.hpp"
#include "soxai/curation.hpp"
#include "soxai/dbscan.hpp"
#include "soxai/embedding.hpp"
#include "soxai/parallel.hpp"
#include "soxai/render.hpp"
#include "soxai/tsne.hpp"

/// File-based pipeline stages. Each stage reads the previous stage's
/// artifacts, writes its own, and echoes its effective settings into the
/// JSON it emits. Paths recorded in artifacts are relative to the artifact.
namespace soxai::stages {

inline constexpr const char* kEmbeddingsNpy = "embeddings.npy";
inline constexpr const char* kEmbeddingsJson = "embeddings.json";
inline constexpr const char* kProjectionJson = "projection.json";
inline constexpr const char* kClustersJson = "clusters.json";
inline constexpr const char* kScatterSvg = "scatter.svg";
inline constexpr const char* kScatterHtml = "scatter.html";
inline constexpr const char* kBundleJson = "bundle.json";
inline constexpr const char* kPlanJson = "plan.json";

struct EmbedStageOptions {
    EmbedOptions embed;
    std::optional<std::string> class_filter;
};

struct ReduceStageOptions {
    std::size_t pca_dims = 50;
    TsneConfig tsne;
};

struct ClusterStageOptions {
    std::optional<double> eps;
    std::size_t min_pts = 10;
};

struct PipelineOptions {
    EmbedStageOptions embed;
    ReduceStageOptions reduce;
    ClusterStageOptions cluster;
    bool html = true;
};

/// Loaded embedding artifact plus the manifest it was computed from.
struct EmbeddingArtifact {
    EmbeddingMatrix matrix;
    std::filesystem::path manifest_path;
};

struct ProjectionArtifact {
    Projection projection;
    std::vector<std::string> ids;
    std::filesystem::path embeddings_path;
    std::filesystem::path manifest_path;
};

struct ClusterArtifact {
    ClusterLabels labels;
    std::vector<std::string> ids;
    std::filesystem::path projection_path;
    std::filesystem::path manifest_path;
};

/// Issues that break row alignment (duplicate ids, channel mismatch).
bool is_blocking(const Issue& issue);

void log(const std::string& message);

EmbeddingMatrix embed_stage(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                            const EmbedStageOptions& opts, const Exec& exec);
EmbeddingArtifact load_embeddings(const std::filesystem::path& npy_path);

Projection reduce_stage(const std::filesystem::path& embeddings_npy, const std::filesystem::path& out_dir,
                        const ReduceStageOptions& opts, const Exec& exec);
ProjectionArtifact load_projection(const std::filesystem::path& path);

ClusterLabels cluster_stage(const std::filesystem::path& projection_json, const std::filesystem::path& out_dir,
                            const ClusterStageOptions& opts, const Exec& exec);
ClusterArtifact load_clusters(const std::filesystem::path& path);

void render_stage(const std::filesystem::path& projection_json, const std::filesystem::path& clusters_json,
                  const std::filesystem::path& out_file, ScatterFormat format, bool with_thumbs);

ViewBundle bundle_stage(const std::filesystem::path& projection_json, const std::filesystem::path& clusters_json,
                        const std::filesystem::path& out_dir, const Exec& exec);

struct CurateResult {
    CurationPlan plan;
    ApplyResult applied;
};

CurateResult curate_stage(const std::filesystem::path& marks_json, const std::filesystem::path& clusters_json,
                          const std::optional<std::filesystem::path>& manifest_override,
                          const std::filesystem::path& out_dir, Fill fill, const Exec& exec);

/// embed -> reduce -> cluster -> bundle -> render (svg, and html when asked).
void run_pipeline(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir,
                  const PipelineOptions& opts, const Exec& exec);

} // namespace soxai::stages
