#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../oracles/oracles.hpp"
#include "helpers.hpp"
#include "soxai/affinity.hpp"
#include "soxai/error.hpp"
#include "soxai/pca.hpp"
#include "soxai/quadtree.hpp"
#include "soxai/quality.hpp"
#include "soxai/tsne.hpp"

using namespace soxai;

namespace {

Matrix diag_gaussian(std::size_t s, const std::vector<double>& var, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(s, var.size());
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t d = 0; d < var.size(); ++d) x(i, d) = rng.normal(0.0, std::sqrt(var[d]));
    return x;
}

Matrix blobs(std::size_t per, std::size_t dims, std::size_t count, double sep, std::uint64_t seed,
             std::vector<int>* labels) {
    Rng rng(seed);
    Matrix x(per * count, dims);
    for (std::size_t c = 0; c < count; ++c)
        for (std::size_t i = 0; i < per; ++i) {
            for (std::size_t d = 0; d < dims; ++d) x(c * per + i, d) = rng.normal() + (d == c ? sep : 0.0);
            if (labels) labels->push_back(static_cast<int>(c));
        }
    return x;
}

oracle::Dense dense(const SparseAffinity& p) {
    oracle::Dense d(p.n, std::vector<double>(p.n, 0.0));
    for (std::size_t i = 0; i < p.n; ++i)
        for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) d[i][p.col[k]] = p.val[k];
    return d;
}

double rel_l2(const Matrix& a, const Matrix& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        num += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
        den += b.values()[i] * b.values()[i];
    }
    return std::sqrt(num / den);
}

} // namespace

TEST_SUITE("dimreduce") {

TEST_CASE("pca: line along e1") {
    Matrix x(5, 3);
    const double t[] = {-2, -1, 0, 1, 2};
    for (int i = 0; i < 5; ++i) x(i, 0) = t[i];
    const auto model = fit_pca(x, 3);
    CHECK(std::abs(model.components(0, 0)) == doctest::Approx(1.0));
    CHECK(model.components(0, 0) > 0);
    CHECK(model.eigenvalues[0] == doctest::Approx(2.5));
    CHECK(model.eigenvalues[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(model.eigenvalues[2] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pca: diag(9,1,0.01) against the Jacobi oracle") {
    const auto x = diag_gaussian(5000, {9, 1, 0.01}, 11);
    const auto model = fit_pca(x, 3);
    const auto ref = oracle::jacobi(oracle::covariance(x));
    const double truth[] = {9, 1, 0.01};
    for (int k = 0; k < 3; ++k) {
        CHECK(model.eigenvalues[k] == doctest::Approx(ref.values[k]).epsilon(1e-8));
        CHECK(std::abs(model.eigenvalues[k] - truth[k]) / truth[k] < 0.15);
        double dot = 0.0;
        for (int d = 0; d < 3; ++d) dot += model.components(k, d) * ref.vectors[k][d];
        CHECK(std::abs(dot) == doctest::Approx(1.0).epsilon(1e-8));
        const double angle = std::acos(std::min(1.0, std::abs(model.components(k, k)))) * 180.0 / std::numbers::pi;
        CHECK(angle < 5.0);
    }
}

TEST_CASE("pca: k = N is an isometry") {
    const auto x = testutil::random_matrix(40, 6, 12);
    const auto model = fit_pca(x, 6);
    const auto y = pca_transform(model, x);
    for (std::size_t i = 0; i < 40; ++i)
        for (std::size_t j = i + 1; j < 40; ++j)
            CHECK(std::sqrt(squared_distance(y.row(i), y.row(j))) ==
                  doctest::Approx(std::sqrt(squared_distance(x.row(i), x.row(j)))).epsilon(1e-9));
}

TEST_CASE("pca: gram route agrees with covariance route, orthonormal rows") {
    const auto wide = testutil::random_matrix(20, 60, 13);
    const auto model = fit_pca(wide, 10);
    REQUIRE(model.k == 10);
    for (std::size_t a = 0; a < 10; ++a)
        for (std::size_t b = 0; b < 10; ++b) {
            double dot = 0.0;
            for (std::size_t d = 0; d < 60; ++d) dot += model.components(a, d) * model.components(b, d);
            CHECK(dot == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
        }
    const auto ref = oracle::jacobi(oracle::covariance(wide), 1e-13, 200);
    for (std::size_t k = 0; k < 10; ++k) CHECK(model.eigenvalues[k] == doctest::Approx(ref.values[k]).epsilon(1e-7));
    const auto full = fit_pca(wide, 25);
    CHECK(full.clamped);
    CHECK(full.k == 20);
}

TEST_CASE("pca: identical rows give zeros") {
    Matrix x(6, 3, 2.5);
    const auto model = fit_pca(x, 2);
    for (double e : model.eigenvalues) CHECK(e == 0.0);
    const auto y = pca_transform(model, x);
    for (double v : y.values()) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("pca: thread count does not change the result") {
    const auto x = testutil::random_matrix(300, 40, 14);
    const auto a = fit_pca(x, 10, Exec{1});
    const auto b = fit_pca(x, 10, Exec{4});
    CHECK(a.components == b.components);
    CHECK(pca_transform(a, x, Exec{1}) == pca_transform(b, x, Exec{4}));
}

TEST_CASE("affinity: S = 2 symmetrizes to one half") {
    ConditionalAffinities c;
    c.n = 2;
    c.neighbors = {{1}, {0}};
    c.probs = {{1.0}, {1.0}};
    c.beta = {1.0, 1.0};
    const auto p = symmetrize(c);
    CHECK(p.at(0, 1) == 0.5);
    CHECK(p.at(1, 0) == 0.5);
    CHECK(p.at(0, 0) == 0.0);
}

TEST_CASE("affinity: calibrated entropy, symmetry and unit sum") {
    const auto x = testutil::random_matrix(200, 5, 21);
    for (auto mode : {AffinityMode::Exact, AffinityMode::Knn}) {
        for (double perp : {5.0, 30.0}) {
            const auto cond = calibrate_conditionals(x, perp, mode);
            for (std::size_t i = 0; i < cond.n; ++i)
                REQUIRE(std::abs(oracle::entropy_bits(cond.probs[i]) - std::log2(perp)) <= 1e-5);
            const auto p = symmetrize(cond);
            CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-9));
            for (std::size_t i = 0; i < p.n; ++i)
                for (std::size_t k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) {
                    CHECK(p.val[k] >= 0.0);
                    CHECK(p.at(p.col[k], i) == p.val[k]);
                }
            if (mode == AffinityMode::Knn) {
                for (const auto& nb : cond.neighbors) CHECK(nb.size() == knn_neighbor_count(200, perp));
            }
        }
    }
}

TEST_CASE("affinity: exact-mode rows match the Gaussian formula at the found beta") {
    const auto x = testutil::random_matrix(60, 3, 22);
    const auto cond = calibrate_conditionals(x, 10.0, AffinityMode::Exact);
    for (std::size_t i = 0; i < 60; i += 7) {
        const auto ref = oracle::gaussian_row(x, i, cond.beta[i]);
        for (std::size_t k = 0; k < ref.size(); ++k) CHECK(cond.probs[i][k] == doctest::Approx(ref[k]).epsilon(1e-9));
    }
}

TEST_CASE("affinity: simplex gives equal off-diagonal entries") {
    Matrix x(10, 10);
    for (int i = 0; i < 10; ++i) x(i, i) = 1.0;
    const auto p = compute_affinities(x, 3.0, AffinityMode::Exact);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j)
            if (i != j) CHECK(p.at(i, j) == doctest::Approx(1.0 / 90.0).epsilon(1e-12));
}

TEST_CASE("affinity: duplicates are jittered and reported") {
    auto x = testutil::random_matrix(30, 2, 23);
    for (std::size_t d = 0; d < 2; ++d) x(5, d) = x(4, d);
    const auto p = compute_affinities(x, 5.0, AffinityMode::Exact);
    CHECK(p.jittered);
    CHECK(p.sum() == doctest::Approx(1.0));
    CHECK_FALSE(compute_affinities(testutil::random_matrix(30, 2, 24), 5.0, AffinityMode::Exact).jittered);
}

TEST_CASE("affinity: thread invariance") {
    const auto x = testutil::random_matrix(150, 4, 25);
    const auto a = compute_affinities(x, 20.0, AffinityMode::Knn, Exec{1});
    const auto b = compute_affinities(x, 20.0, AffinityMode::Knn, Exec{4});
    CHECK(a.val == b.val);
    CHECK(a.col == b.col);
}

TEST_CASE("gradient: two points are equal and opposite") {
    ConditionalAffinities c;
    c.n = 2;
    c.neighbors = {{1}, {0}};
    c.probs = {{1.0}, {1.0}};
    c.beta = {1.0, 1.0};
    const auto p = symmetrize(c);
    Matrix y(2, 2, std::vector<double>{0.3, -0.1, -0.4, 0.9});
    const auto g = tsne_gradient_exact(p, y);
    CHECK(g(0, 0) == doctest::Approx(-g(1, 0)));
    CHECK(g(0, 1) == doctest::Approx(-g(1, 1)));
    const auto bh = tsne_gradient_bh(p, y, 0.5);
    CHECK(bh(0, 0) == doctest::Approx(-bh(1, 0)));
}

TEST_CASE("gradient: exact matches finite differences of KL") {
    const auto x = testutil::random_matrix(20, 4, 31);
    const auto p = compute_affinities(x, 5.0, AffinityMode::Exact);
    const auto y = testutil::random_matrix(20, 2, 32);
    const auto g = tsne_gradient_exact(p, y);
    const auto fd = oracle::kl_gradient_fd(dense(p), y, 1e-5);
    CHECK(rel_l2(g, fd) <= 1e-4);
    CHECK(kl_divergence(p, y) == doctest::Approx(oracle::kl(dense(p), y)).epsilon(1e-10));
}

TEST_CASE("gradient: Barnes-Hut converges to exact") {
    const auto x = testutil::random_matrix(500, 5, 41);
    const auto p = compute_affinities(x, 30.0, AffinityMode::Knn);
    const auto y = testutil::random_matrix(500, 2, 42, 5.0);
    const auto exact = tsne_gradient_exact(p, y);
    CHECK(rel_l2(tsne_gradient_bh(p, y, 0.0), exact) <= 1e-10);
    CHECK(rel_l2(tsne_gradient_bh(p, y, 0.2), exact) <= 1e-2);
    CHECK(rel_l2(tsne_gradient_bh(p, y, 0.2, Exec{1}), tsne_gradient_bh(p, y, 0.2, Exec{4})) == 0.0);
    CHECK(tsne_gradient_exact(p, y, Exec{1}) == tsne_gradient_exact(p, y, Exec{4}));
}

TEST_CASE("quadtree: coincident points do not recurse forever") {
    Matrix y(50, 2, 1.0);
    y(0, 0) = 2.0;
    QuadTree tree(y);
    double z = 0, fx = 0, fy = 0;
    tree.repulsion(0, 0.5, z, fx, fy);
    CHECK(z == doctest::Approx(49.0 / 2.0));
    CHECK(fx > 0.0);
}

TEST_CASE("tsne: validation of parameters") {
    const auto x = testutil::random_matrix(40, 3, 51);
    TsneConfig cfg;
    cfg.perplexity = 30;
    CHECK_THROWS_AS(run_tsne(x, cfg), Error);
    cfg.perplexity = 5;
    cfg.theta = 1.5;
    CHECK_THROWS_AS(run_tsne(x, cfg), Error);
    cfg.theta = 0.5;
    CHECK(uses_exact(cfg, 40));
    CHECK_FALSE(uses_exact(cfg, 5000));
    cfg.theta = 0.0;
    CHECK(uses_exact(cfg, 5000));
}

TEST_CASE("tsne: config json round trip") {
    TsneConfig cfg;
    cfg.perplexity = 12.5;
    cfg.seed = 99;
    cfg.init = TsneInit::Pca2d;
    cfg.method = TsneMethod::BarnesHut;
    const auto back = TsneConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("tsne: blobs separate, KL decreases, deterministic") {
    std::vector<int> labels;
    const auto x = blobs(100, 10, 3, 8.0, 61, &labels);
    TsneConfig cfg;
    cfg.max_iter = 500;
    const auto a = run_tsne(x, cfg);
    CHECK(one_nn_accuracy(a.coords, labels) >= 0.95);
    CHECK(trustworthiness(x, a.coords, 12) >= 0.9);
    CHECK(a.kl_trace.back() < a.kl_trace.front());
    CHECK(a.kl_iters.front() == 0);
    CHECK(a.kl_iters.back() == 500);
    const auto b = run_tsne(x, cfg, Exec{4});
    CHECK(a.coords == b.coords);
    cfg.method = TsneMethod::BarnesHut;
    const auto bh = run_tsne(x, cfg, Exec{3});
    CHECK_FALSE(bh.exact);
    CHECK(one_nn_accuracy(bh.coords, labels) >= 0.95);
    CHECK(bh.coords == run_tsne(x, cfg, Exec{1}).coords);
}

TEST_CASE("trustworthiness: identity layout and oracle agreement") {
    const auto x = testutil::random_matrix(60, 2, 71);
    CHECK(trustworthiness(x, x, 5) == doctest::Approx(1.0));
    const auto high = testutil::random_matrix(100, 6, 72);
    Matrix shuffled(100, 2);
    Rng rng(73);
    for (auto& v : shuffled.values()) v = rng.uniform();
    const double t = trustworthiness(high, shuffled, 10);
    CHECK(t < 0.8);
    CHECK(t == doctest::Approx(oracle::trustworthiness(high, shuffled, 10)).epsilon(1e-12));
    const auto low = testutil::random_matrix(100, 2, 74);
    CHECK(trustworthiness(high, low, 7, Exec{4}) == doctest::Approx(oracle::trustworthiness(high, low, 7)));
    CHECK_THROWS_AS(trustworthiness(high, low, 50), Error);
}

}
