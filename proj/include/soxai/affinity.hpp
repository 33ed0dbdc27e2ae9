#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "soxai/matrix.hpp"
#include "soxai/parallel.hpp"

namespace soxai {

enum class AffinityMode { Exact, Knn };

/// Row-wise conditional distributions P(j | i) over each point's neighbor set.
struct ConditionalAffinities {
    std::size_t n = 0;
    std::vector<std::vector<std::uint32_t>> neighbors;
    std::vector<std::vector<double>> probs;
    std::vector<double> beta;  // precision of each row's Gaussian (1 / 2 sigma^2)
    bool jittered = false;
};

/// Symmetric joint affinities in CSR form (columns sorted, no diagonal).
struct SparseAffinity {
    std::size_t n = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<double> val;
    bool jittered = false;

    std::size_t nnz() const noexcept { return val.size(); }
    double sum() const;
    /// Entry (i, j), 0 when not stored.
    double at(std::size_t i, std::size_t j) const;
};

/// Number of neighbors kept per point in knn mode.
std::size_t knn_neighbor_count(std::size_t n, double perplexity);

/// Finds beta so that the Gaussian over `sq_dists` has entropy log2(perplexity)
/// bits; writes the normalized distribution to `probs`. Throws SearchFailed
/// when 200 bisection steps do not reach the target.
double calibrate_row(std::span<const double> sq_dists, double perplexity, std::span<double> probs);

/// Gaussian conditionals with per-point bandwidths. Exact points (zero
/// distance) are separated with seeded uniform +-1e-9 jitter first.
ConditionalAffinities calibrate_conditionals(const Matrix& x, double perplexity, AffinityMode mode,
                                             const Exec& exec = Exec::serial(), std::uint64_t jitter_seed = 0);

/// P_ij = (P(j|i) + P(i|j)) / (2S).
SparseAffinity symmetrize(const ConditionalAffinities& cond);

SparseAffinity compute_affinities(const Matrix& x, double perplexity, AffinityMode mode,
                                  const Exec& exec = Exec::serial(), std::uint64_t jitter_seed = 0);

} // namespace soxai
