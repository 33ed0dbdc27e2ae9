#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "soxai/affinity.hpp"
#include "soxai/matrix.hpp"
#include "soxai/parallel.hpp"

namespace soxai {

enum class TsneInit { RandomGaussian, Pca2d };
enum class TsneMethod { Auto, Exact, BarnesHut };

struct TsneConfig {
    double perplexity = 30.0;
    double theta = 0.5;
    int max_iter = 1000;
    double exaggeration = 12.0;
    int exaggeration_iters = 250;
    double learning_rate = 200.0;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    int momentum_switch = 250;
    std::uint64_t seed = 0;
    TsneInit init = TsneInit::RandomGaussian;
    double init_sigma = 1e-4;
    TsneMethod method = TsneMethod::Auto;
    std::size_t exact_threshold = 1000;  // Auto picks exact at or below this S
    int kl_every = 50;

    nlohmann::json to_json() const;
    static TsneConfig from_json(const nlohmann::json& j);
};

struct Projection {
    Matrix coords;  // S x 2
    std::vector<double> kl_trace;
    std::vector<int> kl_iters;
    TsneConfig config;
    bool exact = true;
    bool jittered = false;
};

/// Exact gradient of KL(P || Q) with Student-t Q:
///   dC/dy_i = 4 sum_j (p_ij - q_ij) (y_i - y_j) / (1 + |y_i - y_j|^2)
/// `p_scale` multiplies every P entry (early exaggeration).
Matrix tsne_gradient_exact(const SparseAffinity& p, const Matrix& y, const Exec& exec = Exec::serial(),
                           double p_scale = 1.0);

/// Same gradient with the repulsive term summed over a quadtree; theta = 0
/// reduces to the exact sum.
Matrix tsne_gradient_bh(const SparseAffinity& p, const Matrix& y, double theta, const Exec& exec = Exec::serial(),
                        double p_scale = 1.0);

/// KL(P || Q) over stored P entries, Q normalized over all pairs.
double kl_divergence(const SparseAffinity& p, const Matrix& y, const Exec& exec = Exec::serial());

/// Resolves Auto and theta = 0 into a concrete choice for S points.
bool uses_exact(const TsneConfig& cfg, std::size_t n);

/// Throws InvalidArgument unless 1 < perplexity < (S - 1) / 3 and 0 <= theta <= 1.
void validate(const TsneConfig& cfg, std::size_t n);

Projection run_tsne(const Matrix& x, const TsneConfig& cfg, const Exec& exec = Exec::serial());

} // namespace soxai
