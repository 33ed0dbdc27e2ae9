#pragma once

#include <cstddef>

#include "soxai/matrix.hpp"
#include "soxai/parallel.hpp"

namespace soxai {

/// Trustworthiness of a low-dimensional layout at neighborhood size k:
///   T = 1 - 2 / (S k (2S - 3k - 1)) * sum_i sum_{j in U_i} (r(i, j) - k)
/// where U_i holds the low-D k nearest neighbors of i that are not among its
/// high-D k nearest, and r(i, j) is the 1-based high-D rank of j from i.
/// Distance ties are broken by point index. Requires k < S / 2.
double trustworthiness(const Matrix& high, const Matrix& low, std::size_t k, const Exec& exec = Exec::serial());

/// Fraction of points whose 2-D nearest neighbor shares their label.
double one_nn_accuracy(const Matrix& coords, const std::vector<int>& labels);

} // namespace soxai
