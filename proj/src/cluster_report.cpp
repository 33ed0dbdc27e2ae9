#include "soxai/cluster_report.hpp"

#include <algorithm>
#include <unordered_map>

#include "soxai/error.hpp"

namespace soxai {

using nlohmann::json;

ClusterReport cluster_report(const ClusterLabels& labels, const Matrix& coords, const std::vector<std::string>& ids,
                             const DatasetManifest& manifest, const std::vector<double>& mass) {
    const std::size_t n = labels.labels.size();
    if (coords.rows() != n || ids.size() != n || mass.size() != n) {
        throw Error(ErrorCode::InvalidArgument, "cluster_report: inputs are not row-aligned");
    }
    std::unordered_map<std::string, const SampleRecord*> by_id;
    for (const auto& s : manifest.samples) by_id.emplace(s.id, &s);

    ClusterReport report;
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(std::max(labels.cluster_count, 0)));
    for (std::size_t i = 0; i < n; ++i) {
        const int c = labels.labels[i];
        if (c == kNoise) {
            ++report.noise_count;
            continue;
        }
        if (c < 0 || static_cast<std::size_t>(c) >= members.size()) {
            throw Error(ErrorCode::InvalidArgument, "cluster_report: label out of range");
        }
        members[static_cast<std::size_t>(c)].push_back(i);
    }

    for (std::size_t c = 0; c < members.size(); ++c) {
        const auto& rows = members[c];
        ClusterSummary s;
        s.id = static_cast<int>(c);
        s.size = rows.size();
        double mass_sum = 0.0;
        for (const auto r : rows) {
            s.member_ids.push_back(ids[r]);
            const auto it = by_id.find(ids[r]);
            ++s.label_histogram[it != by_id.end() ? it->second->label : std::string{}];
            mass_sum += mass[r];
            s.centroid_x += coords(r, 0);
            s.centroid_y += coords(r, 1);
        }
        if (!rows.empty()) {
            const double count = static_cast<double>(rows.size());
            s.mean_mass = mass_sum / count;
            s.centroid_x /= count;
            s.centroid_y /= count;
        }
        std::vector<std::pair<double, std::size_t>> dist;
        for (const auto r : rows) {
            const double dx = coords(r, 0) - s.centroid_x;
            const double dy = coords(r, 1) - s.centroid_y;
            dist.emplace_back(dx * dx + dy * dy, r);
        }
        std::sort(dist.begin(), dist.end());
        for (std::size_t e = 0; e < std::min(kExemplarCount, dist.size()); ++e) {
            s.exemplar_ids.push_back(ids[dist[e].second]);
        }
        report.clusters.push_back(std::move(s));
    }
    return report;
}

json to_json(const ClusterSummary& c) {
    return {{"id", c.id},
            {"size", c.size},
            {"members", c.member_ids},
            {"label_histogram", c.label_histogram},
            {"mean_mass", c.mean_mass},
            {"centroid", {c.centroid_x, c.centroid_y}},
            {"exemplars", c.exemplar_ids}};
}

json to_json(const ClusterReport& r) {
    json clusters = json::array();
    for (const auto& c : r.clusters) clusters.push_back(to_json(c));
    return clusters;
}

ClusterSummary cluster_summary_from_json(const json& j) {
    ClusterSummary c;
    c.id = j.at("id").get<int>();
    c.size = j.at("size").get<std::size_t>();
    c.member_ids = j.at("members").get<std::vector<std::string>>();
    c.label_histogram = j.at("label_histogram").get<std::map<std::string, std::size_t>>();
    c.mean_mass = j.at("mean_mass").get<double>();
    c.centroid_x = j.at("centroid").at(0).get<double>();
    c.centroid_y = j.at("centroid").at(1).get<double>();
    c.exemplar_ids = j.at("exemplars").get<std::vector<std::string>>();
    return c;
}

} // namespace soxai
