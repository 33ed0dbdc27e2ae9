#include "soxai/pca.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "soxai/error.hpp"

namespace soxai {
namespace {

constexpr double kEigenFloor = -1e-9;
constexpr double kSignEps = 1e-12;

void fix_sign(std::span<double> v) {
    for (double c : v) {
        if (std::abs(c) > kSignEps) {
            if (c < 0) {
                for (auto& x : v) x = -x;
            }
            return;
        }
    }
}

// Fills rows [valid, k) with unit vectors orthogonal to everything above,
// drawn from the standard basis by modified Gram-Schmidt.
void complete_basis(Matrix& comps, std::size_t valid) {
    const std::size_t k = comps.rows();
    const std::size_t n = comps.cols();
    std::size_t next_axis = 0;
    for (std::size_t r = valid; r < k; ++r) {
        while (next_axis < n) {
            std::vector<double> v(n, 0.0);
            v[next_axis++] = 1.0;
            for (std::size_t p = 0; p < r; ++p) {
                auto prev = comps.row(p);
                double dot = 0.0;
                for (std::size_t d = 0; d < n; ++d) dot += prev[d] * v[d];
                for (std::size_t d = 0; d < n; ++d) v[d] -= dot * prev[d];
            }
            double norm = 0.0;
            for (double x : v) norm += x * x;
            norm = std::sqrt(norm);
            if (norm > 1e-6) {
                auto dst = comps.row(r);
                for (std::size_t d = 0; d < n; ++d) dst[d] = v[d] / norm;
                break;
            }
        }
    }
}

} // namespace

double PcaModel::captured_variance() const {
    double acc = 0.0;
    for (double e : eigenvalues) acc += e;
    return acc;
}

PcaModel fit_pca(const Matrix& x, std::size_t k, const Exec& exec) {
    const std::size_t s = x.rows();
    const std::size_t n = x.cols();
    if (s < 2) {
        throw Error(ErrorCode::InvalidArgument, "PCA needs at least 2 samples");
    }
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "PCA target dimension must be >= 1");
    }
    PcaModel model;
    model.requested_k = k;
    model.k = std::min({k, s, n});
    model.clamped = model.k != k;

    model.mean.assign(n, 0.0);
    for (std::size_t r = 0; r < s; ++r) {
        auto row = x.row(r);
        for (std::size_t d = 0; d < n; ++d) model.mean[d] += row[d];
    }
    for (auto& m : model.mean) m /= static_cast<double>(s);

    Matrix centered(s, n);
    parallel_for(exec, static_cast<std::ptrdiff_t>(s), [&](std::ptrdiff_t r) {
        auto src = x.row(static_cast<std::size_t>(r));
        auto dst = centered.row(static_cast<std::size_t>(r));
        for (std::size_t d = 0; d < n; ++d) dst[d] = src[d] - model.mean[d];
    });
    const double denom = static_cast<double>(s - 1);

    model.components = Matrix(model.k, n);
    model.eigenvalues.assign(model.k, 0.0);

    if (n <= s) {
        Eigen::MatrixXd cov(n, n);
        parallel_for(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t a) {
            for (std::size_t b = static_cast<std::size_t>(a); b < n; ++b) {
                double acc = 0.0;
                for (std::size_t r = 0; r < s; ++r) acc += centered(r, a) * centered(r, b);
                cov(a, b) = acc / denom;
                cov(b, a) = acc / denom;
            }
        });
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
        if (solver.info() != Eigen::Success) {
            throw Error(ErrorCode::Degenerate, "covariance eigendecomposition failed");
        }
        for (std::size_t c = 0; c < model.k; ++c) {
            const auto col = static_cast<Eigen::Index>(n - 1 - c);
            double ev = solver.eigenvalues()(col);
            model.eigenvalues[c] = ev < kEigenFloor ? 0.0 : std::max(ev, 0.0);
            auto dst = model.components.row(c);
            for (std::size_t d = 0; d < n; ++d) dst[d] = solver.eigenvectors()(static_cast<Eigen::Index>(d), col);
            fix_sign(dst);
        }
    } else {
        Eigen::MatrixXd gram(s, s);
        parallel_for(exec, static_cast<std::ptrdiff_t>(s), [&](std::ptrdiff_t a) {
            auto ra = centered.row(static_cast<std::size_t>(a));
            for (std::size_t b = static_cast<std::size_t>(a); b < s; ++b) {
                auto rb = centered.row(b);
                double acc = 0.0;
                for (std::size_t d = 0; d < n; ++d) acc += ra[d] * rb[d];
                gram(a, b) = acc / denom;
                gram(b, a) = acc / denom;
            }
        });
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
        if (solver.info() != Eigen::Success) {
            throw Error(ErrorCode::Degenerate, "Gram eigendecomposition failed");
        }
        // X^T u / sqrt((S-1) * lambda) maps Gram eigenvectors to unit principal axes.
        const double scale_floor = 1e-12 * std::max(1.0, solver.eigenvalues().cwiseAbs().maxCoeff());
        std::size_t valid = 0;
        for (std::size_t c = 0; c < model.k; ++c) {
            const auto col = static_cast<Eigen::Index>(s - 1 - c);
            const double ev = solver.eigenvalues()(col);
            if (ev <= scale_floor) break;
            model.eigenvalues[c] = ev;
            auto dst = model.components.row(c);
            std::fill(dst.begin(), dst.end(), 0.0);
            for (std::size_t r = 0; r < s; ++r) {
                const double u = solver.eigenvectors()(static_cast<Eigen::Index>(r), col);
                auto xr = centered.row(r);
                for (std::size_t d = 0; d < n; ++d) dst[d] += xr[d] * u;
            }
            double norm = 0.0;
            for (double v : dst) norm += v * v;
            norm = std::sqrt(norm);
            for (auto& v : dst) v /= norm;
            fix_sign(dst);
            valid = c + 1;
        }
        complete_basis(model.components, valid);
        for (std::size_t c = valid; c < model.k; ++c) fix_sign(model.components.row(c));
    }
    return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& x, const Exec& exec) {
    if (x.cols() != model.mean.size()) {
        throw Error(ErrorCode::InvalidArgument, "PCA transform: column count does not match model");
    }
    const std::size_t n = x.cols();
    Matrix out(x.rows(), model.k);
    parallel_for(exec, static_cast<std::ptrdiff_t>(x.rows()), [&](std::ptrdiff_t r) {
        auto src = x.row(static_cast<std::size_t>(r));
        auto dst = out.row(static_cast<std::size_t>(r));
        for (std::size_t c = 0; c < model.k; ++c) {
            auto comp = model.components.row(c);
            double acc = 0.0;
            for (std::size_t d = 0; d < n; ++d) acc += (src[d] - model.mean[d]) * comp[d];
            dst[c] = acc;
        }
    });
    return out;
}

} // namespace soxai
