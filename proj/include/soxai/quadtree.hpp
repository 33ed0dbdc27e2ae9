#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "soxai/matrix.hpp"

namespace soxai {

/// Region quadtree over 2-D points for Barnes-Hut far-field sums.
///
/// Nodes live in a flat pool; leaves hold one point except at the depth
/// limit, where coincident points pile up in the same leaf.
class QuadTree {
public:
    static constexpr int kMaxDepth = 48;

    /// `points` is S x 2.
    explicit QuadTree(const Matrix& points);

    /// Repulsive Student-t sums for point `i` against every other point:
    ///   z   += sum_j w_ij
    ///   f   += sum_j w_ij^2 (y_i - y_j),  w_ij = 1 / (1 + |y_i - y_j|^2)
    /// Any cell not containing y_i with width / distance < theta is replaced
    /// by its center of mass.
    void repulsion(std::size_t i, double theta, double& z, double& fx, double& fy) const;

    std::size_t node_count() const noexcept { return nodes_.size(); }

private:
    struct Node {
        double min_x = 0, min_y = 0, width = 0;
        double com_x = 0, com_y = 0;
        std::uint32_t count = 0;
        std::int32_t first_child = -1;  // four consecutive children
        std::vector<std::uint32_t> points;  // leaf payload
        int depth = 0;
    };

    void insert(std::uint32_t idx);
    void subdivide(std::size_t node);
    std::size_t child_for(const Node& n, double x, double y) const;

    const Matrix& pts_;
    std::vector<Node> nodes_;
};

} // namespace soxai
