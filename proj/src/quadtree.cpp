#include "soxai/quadtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace soxai {

QuadTree::QuadTree(const Matrix& points) : pts_(points) {
    const std::size_t n = points.rows();
    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    double max_x = -min_x, max_y = -min_x;
    for (std::size_t i = 0; i < n; ++i) {
        min_x = std::min(min_x, points(i, 0));
        max_x = std::max(max_x, points(i, 0));
        min_y = std::min(min_y, points(i, 1));
        max_y = std::max(max_y, points(i, 1));
    }
    Node root;
    if (n > 0) {
        const double span = std::max(max_x - min_x, max_y - min_y);
        const double pad = std::max(span * 1e-6, 1e-12);
        root.min_x = min_x - pad;
        root.min_y = min_y - pad;
        root.width = span + 2 * pad;
    }
    nodes_.reserve(2 * n + 1);
    nodes_.push_back(std::move(root));
    for (std::size_t i = 0; i < n; ++i) {
        insert(static_cast<std::uint32_t>(i));
    }
}

std::size_t QuadTree::child_for(const Node& n, double x, double y) const {
    const double half = n.width * 0.5;
    const std::size_t east = x >= n.min_x + half ? 1 : 0;
    const std::size_t north = y >= n.min_y + half ? 2 : 0;
    return static_cast<std::size_t>(n.first_child) + east + north;
}

void QuadTree::subdivide(std::size_t node) {
    const Node parent = nodes_[node];
    const double half = parent.width * 0.5;
    const auto first = static_cast<std::int32_t>(nodes_.size());
    for (int q = 0; q < 4; ++q) {
        Node c;
        c.min_x = parent.min_x + ((q & 1) ? half : 0.0);
        c.min_y = parent.min_y + ((q & 2) ? half : 0.0);
        c.width = half;
        c.depth = parent.depth + 1;
        nodes_.push_back(std::move(c));
    }
    nodes_[node].first_child = first;
}

void QuadTree::insert(std::uint32_t idx) {
    const double x = pts_(idx, 0);
    const double y = pts_(idx, 1);
    std::size_t cur = 0;
    while (true) {
        Node& n = nodes_[cur];
        const double c = n.count;
        n.com_x = (n.com_x * c + x) / (c + 1);
        n.com_y = (n.com_y * c + y) / (c + 1);
        ++n.count;
        if (n.first_child >= 0) {
            cur = child_for(n, x, y);
            continue;
        }
        if (n.points.empty() || n.depth >= kMaxDepth) {
            n.points.push_back(idx);
            return;
        }
        // Occupied leaf: push the resident point one level down, then retry.
        const std::uint32_t resident = n.points.front();
        n.points.clear();
        subdivide(cur);
        Node& split = nodes_[cur];
        const std::size_t dst = child_for(split, pts_(resident, 0), pts_(resident, 1));
        Node& child = nodes_[dst];
        child.com_x = pts_(resident, 0);
        child.com_y = pts_(resident, 1);
        child.count = 1;
        child.points.push_back(resident);
        cur = child_for(nodes_[cur], x, y);
    }
}

void QuadTree::repulsion(std::size_t i, double theta, double& z, double& fx, double& fy) const {
    const double yx = pts_(i, 0);
    const double yy = pts_(i, 1);
    std::size_t stack[4 * kMaxDepth + 8];
    std::size_t top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& n = nodes_[stack[--top]];
        if (n.count == 0) continue;
        if (n.first_child < 0) {
            for (const auto j : n.points) {
                if (j == i) continue;
                const double dx = yx - pts_(j, 0);
                const double dy = yy - pts_(j, 1);
                const double w = 1.0 / (1.0 + dx * dx + dy * dy);
                z += w;
                fx += w * w * dx;
                fy += w * w * dy;
            }
            continue;
        }
        const bool inside = yx >= n.min_x && yx < n.min_x + n.width && yy >= n.min_y && yy < n.min_y + n.width;
        const double dx = yx - n.com_x;
        const double dy = yy - n.com_y;
        const double d2 = dx * dx + dy * dy;
        if (!inside && d2 > 0.0 && n.width < theta * std::sqrt(d2)) {
            const double w = 1.0 / (1.0 + d2);
            const double mult = n.count * w;
            z += mult;
            fx += mult * w * dx;
            fy += mult * w * dy;
            continue;
        }
        // Reverse push keeps the traversal order fixed: quadrants 0..3.
        for (int q = 3; q >= 0; --q) {
            stack[top++] = static_cast<std::size_t>(n.first_child + q);
        }
    }
}

} // namespace soxai
