#include "soxai/dbscan.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <unordered_map>

#include "soxai/error.hpp"

namespace soxai {

std::size_t ClusterLabels::noise_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNoise));
}

std::vector<int> canonical_labels(const std::vector<int>& labels) {
    std::unordered_map<int, int> remap;
    std::vector<int> out(labels.size(), kNoise);
    int next = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kNoise) continue;
        auto [it, inserted] = remap.emplace(labels[i], next);
        if (inserted) ++next;
        out[i] = it->second;
    }
    return out;
}

namespace {

using NeighborLists = std::vector<std::vector<std::uint32_t>>;

NeighborLists brute_neighbors(const Matrix& pts, double eps2, const Exec& exec) {
    const std::size_t n = pts.rows();
    NeighborLists out(n);
    parallel_for(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        auto& nb = out[i];
        for (std::size_t j = 0; j < n; ++j) {
            if (squared_distance(pts.row(i), pts.row(j)) <= eps2) nb.push_back(static_cast<std::uint32_t>(j));
        }
    });
    return out;
}

NeighborLists grid_neighbors(const Matrix& pts, double eps, const Exec& exec) {
    const std::size_t n = pts.rows();
    const double eps2 = eps * eps;
    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    for (std::size_t i = 0; i < n; ++i) {
        min_x = std::min(min_x, pts(i, 0));
        min_y = std::min(min_y, pts(i, 1));
    }
    auto cell_of = [&](std::size_t i) {
        return std::pair<std::int64_t, std::int64_t>{static_cast<std::int64_t>(std::floor((pts(i, 0) - min_x) / eps)),
                                                     static_cast<std::int64_t>(std::floor((pts(i, 1) - min_y) / eps))};
    };
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::uint32_t>> grid;
    for (std::size_t i = 0; i < n; ++i) grid[cell_of(i)].push_back(static_cast<std::uint32_t>(i));

    NeighborLists out(n);
    parallel_for(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        const auto [cx, cy] = cell_of(i);
        auto& nb = out[i];
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                const auto it = grid.find({cx + dx, cy + dy});
                if (it == grid.end()) continue;
                for (const auto j : it->second) {
                    if (squared_distance(pts.row(i), pts.row(j)) <= eps2) nb.push_back(j);
                }
            }
        }
        std::sort(nb.begin(), nb.end());
    });
    return out;
}

} // namespace

ClusterLabels dbscan(const Matrix& coords, double eps, std::size_t min_pts, const Exec& exec,
                     std::size_t grid_threshold) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw Error(ErrorCode::InvalidArgument, "dbscan: eps must be positive");
    }
    if (min_pts < 2) {
        throw Error(ErrorCode::InvalidArgument, "dbscan: min_pts must be >= 2");
    }
    const std::size_t n = coords.rows();
    const auto neighbors = (n > grid_threshold && coords.cols() == 2) ? grid_neighbors(coords, eps, exec)
                                                                      : brute_neighbors(coords, eps * eps, exec);

    std::vector<char> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) core[i] = neighbors[i].size() >= min_pts;

    std::vector<int> raw(n, kNoise);
    int clusters = 0;
    std::deque<std::uint32_t> frontier;
    for (std::size_t seed = 0; seed < n; ++seed) {
        if (!core[seed] || raw[seed] != kNoise) continue;
        raw[seed] = clusters;
        frontier.push_back(static_cast<std::uint32_t>(seed));
        while (!frontier.empty()) {
            const auto p = frontier.front();
            frontier.pop_front();
            for (const auto q : neighbors[p]) {
                if (core[q] && raw[q] == kNoise) {
                    raw[q] = clusters;
                    frontier.push_back(q);
                }
            }
        }
        ++clusters;
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        double best = std::numeric_limits<double>::infinity();
        for (const auto j : neighbors[i]) {
            if (!core[j]) continue;
            const double d = squared_distance(coords.row(i), coords.row(j));
            if (d < best) {  // neighbor lists are index-sorted, so ties keep the lower index
                best = d;
                raw[i] = raw[j];
            }
        }
    }

    ClusterLabels out;
    out.labels = canonical_labels(raw);
    out.eps = eps;
    out.min_pts = min_pts;
    out.cluster_count = clusters;
    return out;
}

EpsEstimate estimate_eps(const Matrix& coords, std::size_t k, const Exec& exec) {
    const std::size_t n = coords.rows();
    if (k == 0 || k >= n) {
        throw Error(ErrorCode::InvalidArgument, "estimate_eps needs 1 <= k < S");
    }
    EpsEstimate est;
    est.k_distances.assign(n, 0.0);
    parallel_for(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        std::vector<double> d;
        d.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) d.push_back(squared_distance(coords.row(i), coords.row(j)));
        }
        std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
        est.k_distances[i] = std::sqrt(d[k - 1]);
    });
    std::sort(est.k_distances.begin(), est.k_distances.end());

    const double lo = est.k_distances.front();
    const double hi = est.k_distances.back();
    if (!(hi > 0.0)) {
        throw Error(ErrorCode::Degenerate, "all points coincide; eps is undefined");
    }
    if (hi == lo || n < 3) {
        est.knee = n - 1;
        est.eps = hi;
        return est;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(n - 1);
        const double y = (est.k_distances[i] - lo) / (hi - lo);
        if (x - y > best) {
            best = x - y;
            est.knee = i;
        }
    }
    est.eps = est.k_distances[est.knee];
    if (!(est.eps > 0.0)) {
        // Knee sits on exact duplicates; fall back to the first positive distance.
        const auto it = std::upper_bound(est.k_distances.begin(), est.k_distances.end(), 0.0);
        est.knee = static_cast<std::size_t>(it - est.k_distances.begin());
        est.eps = *it;
    }
    return est;
}

double purity(const ClusterLabels& labels, const std::vector<int>& truth) {
    if (labels.labels.size() != truth.size()) {
        throw Error(ErrorCode::InvalidArgument, "purity: label and truth lengths differ");
    }
    std::map<int, std::map<int, std::size_t>> counts;
    std::size_t members = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (labels.labels[i] == kNoise) continue;
        ++counts[labels.labels[i]][truth[i]];
        ++members;
    }
    if (members == 0) {
        throw Error(ErrorCode::Undefined, "purity is undefined when every point is noise");
    }
    std::size_t majority_total = 0;
    for (const auto& [cluster, hist] : counts) {
        std::size_t best = 0;
        for (const auto& [concept_id, c] : hist) best = std::max(best, c);
        majority_total += best;
    }
    return static_cast<double>(majority_total) / static_cast<double>(members);
}

} // namespace soxai
