#pragma once

#include <cstddef>
#include <vector>

#include "soxai/matrix.hpp"
#include "soxai/parallel.hpp"

namespace soxai {

struct PcaModel {
    std::vector<double> mean;
    Matrix components;  // k x N, orthonormal rows
    std::vector<double> eigenvalues;  // non-increasing, >= 0
    std::size_t k = 0;
    std::size_t requested_k = 0;
    bool clamped = false;  // requested_k exceeded min(S, N)

    double captured_variance() const;
};

/// Principal axes of the rows of `x` (sample covariance, S - 1 denominator).
/// Uses the N x N covariance when N <= S and the S x S Gram matrix otherwise.
/// Each component is sign-fixed so its first nonzero coordinate is positive.
PcaModel fit_pca(const Matrix& x, std::size_t k, const Exec& exec = Exec::serial());

Matrix pca_transform(const PcaModel& model, const Matrix& x, const Exec& exec = Exec::serial());

} // namespace soxai
