// Naive oracle vs serial vs OpenMP kernels. The thread count is the second
// benchmark argument; 1 is the serial path.

#include <benchmark/benchmark.h>

#include <omp.h>

#include "oracles.hpp"
#include "soxai/affinity.hpp"
#include "soxai/dbscan.hpp"
#include "soxai/embedding.hpp"
#include "soxai/pca.hpp"
#include "soxai/quality.hpp"
#include "soxai/rng.hpp"
#include "soxai/tsne.hpp"

using namespace soxai;

namespace {

Matrix gaussian(std::size_t s, std::size_t d, std::uint64_t seed, double sigma = 1.0) {
    Rng rng(seed);
    Matrix x(s, d);
    for (auto& v : x.values()) v = rng.normal(0.0, sigma);
    return x;
}

Exec exec_of(const benchmark::State& state) { return Exec{static_cast<int>(state.range(1))}; }

void thread_args(benchmark::internal::Benchmark* b, std::initializer_list<std::int64_t> sizes) {
    const int max_threads = omp_get_max_threads();
    for (auto s : sizes) {
        b->Args({s, 1});
        if (max_threads > 1) b->Args({s, max_threads});
    }
}

void BM_EmbedNaive(benchmark::State& state) {
    Rng rng(1);
    const std::size_t h = 16, w = 16, n = static_cast<std::size_t>(state.range(0));
    std::vector<oracle::Dense> m(h, oracle::Dense(w, std::vector<double>(n)));
    oracle::Dense a(h, std::vector<double>(w));
    for (auto& plane : m)
        for (auto& row : plane)
            for (auto& v : row) v = rng.normal();
    for (auto& row : a)
        for (auto& v : row) v = rng.uniform();
    for (auto _ : state) benchmark::DoNotOptimize(oracle::embed_double_loop(m, a));
}
BENCHMARK(BM_EmbedNaive)->Arg(64)->Arg(512);

void BM_Embed(benchmark::State& state) {
    Rng rng(1);
    const std::size_t h = 16, w = 16, n = static_cast<std::size_t>(state.range(0));
    FeatureMap m{h, w, n, std::vector<double>(h * w * n)};
    ExplanationMap a{h, w, std::vector<double>(h * w)};
    for (auto& v : m.values) v = rng.normal();
    for (auto& v : a.weights) v = rng.uniform();
    for (auto _ : state) benchmark::DoNotOptimize(embed(m, a));
}
BENCHMARK(BM_Embed)->Arg(64)->Arg(512);

void BM_Pca(benchmark::State& state) {
    const auto x = gaussian(static_cast<std::size_t>(state.range(0)), 64, 2);
    const auto exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(fit_pca(x, 50, exec));
}
BENCHMARK(BM_Pca)->Apply([](auto* b) { thread_args(b, {1000, 5000}); })->Unit(benchmark::kMillisecond);

void BM_CovarianceJacobiNaive(benchmark::State& state) {
    const auto x = gaussian(static_cast<std::size_t>(state.range(0)), 64, 2);
    for (auto _ : state) benchmark::DoNotOptimize(oracle::jacobi(oracle::covariance(x)));
}
BENCHMARK(BM_CovarianceJacobiNaive)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Affinities(benchmark::State& state) {
    const auto x = gaussian(static_cast<std::size_t>(state.range(0)), 50, 3);
    const auto exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(compute_affinities(x, 30.0, AffinityMode::Knn, exec));
}
BENCHMARK(BM_Affinities)->Apply([](auto* b) { thread_args(b, {1000, 4000}); })->Unit(benchmark::kMillisecond);

void BM_GradientExact(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto p = compute_affinities(gaussian(n, 10, 4), 30.0, AffinityMode::Knn);
    const auto y = gaussian(n, 2, 5, 5.0);
    const auto exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(tsne_gradient_exact(p, y, exec));
}
BENCHMARK(BM_GradientExact)->Apply([](auto* b) { thread_args(b, {1000, 4000}); })->Unit(benchmark::kMillisecond);

void BM_GradientBarnesHut(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto p = compute_affinities(gaussian(n, 10, 4), 30.0, AffinityMode::Knn);
    const auto y = gaussian(n, 2, 5, 5.0);
    const auto exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(tsne_gradient_bh(p, y, 0.5, exec));
}
BENCHMARK(BM_GradientBarnesHut)->Apply([](auto* b) { thread_args(b, {1000, 4000}); })->Unit(benchmark::kMillisecond);

void BM_DbscanNaive(benchmark::State& state) {
    const auto x = gaussian(static_cast<std::size_t>(state.range(0)), 2, 6, 5.0);
    for (auto _ : state) benchmark::DoNotOptimize(oracle::dbscan(x, 0.5, 10));
}
BENCHMARK(BM_DbscanNaive)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_Dbscan(benchmark::State& state) {
    const auto x = gaussian(static_cast<std::size_t>(state.range(0)), 2, 6, 5.0);
    const auto exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(dbscan(x, 0.5, 10, exec));
}
BENCHMARK(BM_Dbscan)->Apply([](auto* b) { thread_args(b, {2000, 20000}); })->Unit(benchmark::kMillisecond);

void BM_TrustworthinessNaive(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto hi = gaussian(n, 20, 7), lo = gaussian(n, 2, 8);
    for (auto _ : state) benchmark::DoNotOptimize(oracle::trustworthiness(hi, lo, 12));
}
BENCHMARK(BM_TrustworthinessNaive)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_Trustworthiness(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto hi = gaussian(n, 20, 7), lo = gaussian(n, 2, 8);
    const auto exec = exec_of(state);
    for (auto _ : state) benchmark::DoNotOptimize(trustworthiness(hi, lo, 12, exec));
}
BENCHMARK(BM_Trustworthiness)->Apply([](auto* b) { thread_args(b, {500, 2000}); })->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
