#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "soxai/dbscan.hpp"
#include "soxai/manifest.hpp"
#include "soxai/matrix.hpp"

namespace soxai {

struct ClusterSummary {
    int id = 0;
    std::size_t size = 0;
    std::vector<std::string> member_ids;
    std::map<std::string, std::size_t> label_histogram;
    double mean_mass = 0.0;
    double centroid_x = 0.0;
    double centroid_y = 0.0;
    std::vector<std::string> exemplar_ids;  // up to 5, nearest the centroid first
};

struct ClusterReport {
    std::vector<ClusterSummary> clusters;
    std::size_t noise_count = 0;
};

constexpr std::size_t kExemplarCount = 5;

/// Per-cluster summary. `ids` and `mass` are row-aligned with `coords`;
/// class labels are looked up in `manifest` by id.
ClusterReport cluster_report(const ClusterLabels& labels, const Matrix& coords, const std::vector<std::string>& ids,
                             const DatasetManifest& manifest, const std::vector<double>& mass);

nlohmann::json to_json(const ClusterSummary& c);
nlohmann::json to_json(const ClusterReport& r);
ClusterSummary cluster_summary_from_json(const nlohmann::json& j);

} // namespace soxai
