#pragma once

#include <cstddef>
#include <vector>

#include "soxai/matrix.hpp"
#include "soxai/parallel.hpp"

namespace soxai {

constexpr int kNoise = -1;

struct ClusterLabels {
    std::vector<int> labels;  // kNoise or 0..cluster_count-1
    double eps = 0.0;
    std::size_t min_pts = 0;
    int cluster_count = 0;

    std::size_t noise_count() const;
};

/// Density clustering. A point is core when at least `min_pts` points
/// (itself included) lie within `eps`. Clusters are the connected components
/// of cores under eps-adjacency; a non-core point within eps of some core
/// joins the cluster of its nearest such core (ties to the lower index), else
/// it is noise. Clusters are numbered by their smallest member index, so the
/// partition does not depend on input order.
///
/// Neighbor queries are brute force, switching to a uniform grid of cell
/// size eps above `grid_threshold` points (2-D input only).
ClusterLabels dbscan(const Matrix& coords, double eps, std::size_t min_pts, const Exec& exec = Exec::serial(),
                     std::size_t grid_threshold = 5000);

struct EpsEstimate {
    double eps = 0.0;
    std::vector<double> k_distances;  // sorted ascending
    std::size_t knee = 0;
};

/// k-distance elbow: sorts every point's distance to its k-th nearest
/// neighbor and picks the point of the normalized curve farthest below the
/// chord joining its ends.
EpsEstimate estimate_eps(const Matrix& coords, std::size_t k, const Exec& exec = Exec::serial());

/// Fraction of non-noise points whose cluster's majority concept equals their
/// own concept. Throws Undefined when every point is noise.
double purity(const ClusterLabels& labels, const std::vector<int>& truth);

/// Relabels clusters by smallest member index; noise stays -1.
std::vector<int> canonical_labels(const std::vector<int>& labels);

} // namespace soxai
