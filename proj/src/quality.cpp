#include "soxai/quality.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "soxai/error.hpp"

namespace soxai {

double trustworthiness(const Matrix& high, const Matrix& low, std::size_t k, const Exec& exec) {
    const std::size_t n = high.rows();
    if (low.rows() != n) {
        throw Error(ErrorCode::InvalidArgument, "trustworthiness: row counts differ");
    }
    if (k == 0 || 2 * k >= n) {
        throw Error(ErrorCode::InvalidArgument, "trustworthiness needs 1 <= k < S/2");
    }
    std::vector<double> penalty(n, 0.0);
    parallel_for(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        std::vector<std::pair<double, std::size_t>> order;
        order.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) order.emplace_back(squared_distance(high.row(i), high.row(j)), j);
        }
        std::sort(order.begin(), order.end());
        std::vector<std::size_t> rank(n, 0);
        for (std::size_t r = 0; r < order.size(); ++r) rank[order[r].second] = r + 1;

        order.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) order.emplace_back(squared_distance(low.row(i), low.row(j)), j);
        }
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
        double acc = 0.0;
        for (std::size_t m = 0; m < k; ++m) {
            const std::size_t r = rank[order[m].second];
            if (r > k) acc += static_cast<double>(r - k);
        }
        penalty[i] = acc;
    });
    double total = 0.0;
    for (double v : penalty) total += v;
    const double s = static_cast<double>(n);
    const double kk = static_cast<double>(k);
    return 1.0 - 2.0 / (s * kk * (2.0 * s - 3.0 * kk - 1.0)) * total;
}

double one_nn_accuracy(const Matrix& coords, const std::vector<int>& labels) {
    const std::size_t n = coords.rows();
    if (labels.size() != n || n < 2) {
        throw Error(ErrorCode::InvalidArgument, "1-NN accuracy: need >= 2 labelled points");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = i;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double d = squared_distance(coords.row(i), coords.row(j));
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        if (labels[arg] == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

} // namespace soxai
