#include "soxai/tsne.hpp"

#include <algorithm>
#include <cmath>

#include "soxai/error.hpp"
#include "soxai/pca.hpp"
#include "soxai/quadtree.hpp"
#include "soxai/rng.hpp"

namespace soxai {

using nlohmann::json;

json TsneConfig::to_json() const {
    return {{"perplexity", perplexity},
            {"theta", theta},
            {"max_iter", max_iter},
            {"early_exaggeration", {{"factor", exaggeration}, {"iterations", exaggeration_iters}}},
            {"learning_rate", learning_rate},
            {"momentum", {{"initial", momentum_initial}, {"final", momentum_final}, {"switch_iter", momentum_switch}}},
            {"seed", seed},
            {"init", init == TsneInit::Pca2d ? "pca-2d" : "random-gaussian"},
            {"init_sigma", init_sigma},
            {"method", method == TsneMethod::Exact ? "exact" : method == TsneMethod::BarnesHut ? "barnes-hut" : "auto"},
            {"exact_threshold", exact_threshold},
            {"kl_every", kl_every}};
}

TsneConfig TsneConfig::from_json(const json& j) {
    TsneConfig c;
    c.perplexity = j.value("perplexity", c.perplexity);
    c.theta = j.value("theta", c.theta);
    c.max_iter = j.value("max_iter", c.max_iter);
    if (j.contains("early_exaggeration")) {
        c.exaggeration = j["early_exaggeration"].value("factor", c.exaggeration);
        c.exaggeration_iters = j["early_exaggeration"].value("iterations", c.exaggeration_iters);
    }
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    if (j.contains("momentum")) {
        c.momentum_initial = j["momentum"].value("initial", c.momentum_initial);
        c.momentum_final = j["momentum"].value("final", c.momentum_final);
        c.momentum_switch = j["momentum"].value("switch_iter", c.momentum_switch);
    }
    c.seed = j.value("seed", c.seed);
    c.init = j.value("init", std::string("random-gaussian")) == "pca-2d" ? TsneInit::Pca2d : TsneInit::RandomGaussian;
    c.init_sigma = j.value("init_sigma", c.init_sigma);
    const auto method = j.value("method", std::string("auto"));
    c.method = method == "exact" ? TsneMethod::Exact : method == "barnes-hut" ? TsneMethod::BarnesHut : TsneMethod::Auto;
    c.exact_threshold = j.value("exact_threshold", c.exact_threshold);
    c.kl_every = j.value("kl_every", c.kl_every);
    return c;
}

namespace {

// Attractive term for row i over stored P entries.
void attraction(const SparseAffinity& p, const Matrix& y, std::size_t i, double p_scale, double& ax, double& ay) {
    const double yx = y(i, 0), yy = y(i, 1);
    for (std::size_t e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e) {
        const std::size_t j = p.col[e];
        const double dx = yx - y(j, 0);
        const double dy = yy - y(j, 1);
        const double w = p_scale * p.val[e] / (1.0 + dx * dx + dy * dy);
        ax += w * dx;
        ay += w * dy;
    }
}

void check_shapes(const SparseAffinity& p, const Matrix& y) {
    if (y.cols() != 2 || y.rows() != p.n) {
        throw Error(ErrorCode::InvalidArgument, "gradient: layout must be S x 2 matching P");
    }
}

Matrix combine(const Matrix& attract, const Matrix& repulse, const std::vector<double>& z_rows) {
    double z = 0.0;
    for (double v : z_rows) z += v;
    Matrix grad(attract.rows(), 2);
    const double inv_z = z > 0.0 ? 1.0 / z : 0.0;
    for (std::size_t i = 0; i < attract.rows(); ++i) {
        grad(i, 0) = 4.0 * (attract(i, 0) - repulse(i, 0) * inv_z);
        grad(i, 1) = 4.0 * (attract(i, 1) - repulse(i, 1) * inv_z);
    }
    return grad;
}

} // namespace

Matrix tsne_gradient_exact(const SparseAffinity& p, const Matrix& y, const Exec& exec, double p_scale) {
    check_shapes(p, y);
    const std::size_t n = y.rows();
    Matrix attract(n, 2), repulse(n, 2);
    std::vector<double> z_rows(n, 0.0);
    parallel_for(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        double ax = 0, ay = 0, rx = 0, ry = 0, z = 0;
        attraction(p, y, i, p_scale, ax, ay);
        const double yx = y(i, 0), yy = y(i, 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = yx - y(j, 0);
            const double dy = yy - y(j, 1);
            const double w = 1.0 / (1.0 + dx * dx + dy * dy);
            z += w;
            rx += w * w * dx;
            ry += w * w * dy;
        }
        attract(i, 0) = ax;
        attract(i, 1) = ay;
        repulse(i, 0) = rx;
        repulse(i, 1) = ry;
        z_rows[i] = z;
    });
    return combine(attract, repulse, z_rows);
}

Matrix tsne_gradient_bh(const SparseAffinity& p, const Matrix& y, double theta, const Exec& exec, double p_scale) {
    check_shapes(p, y);
    const std::size_t n = y.rows();
    const QuadTree tree(y);
    Matrix attract(n, 2), repulse(n, 2);
    std::vector<double> z_rows(n, 0.0);
    parallel_for_dynamic(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        double ax = 0, ay = 0, rx = 0, ry = 0, z = 0;
        attraction(p, y, i, p_scale, ax, ay);
        tree.repulsion(i, theta, z, rx, ry);
        attract(i, 0) = ax;
        attract(i, 1) = ay;
        repulse(i, 0) = rx;
        repulse(i, 1) = ry;
        z_rows[i] = z;
    });
    return combine(attract, repulse, z_rows);
}

double kl_divergence(const SparseAffinity& p, const Matrix& y, const Exec& exec) {
    check_shapes(p, y);
    const std::size_t n = y.rows();
    std::vector<double> z_rows(n, 0.0), kl_rows(n, 0.0);
    parallel_for(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            z += 1.0 / (1.0 + squared_distance(y.row(i), y.row(j)));
        }
        z_rows[i] = z;
        double acc = 0.0;
        for (std::size_t e = p.row_ptr[i]; e < p.row_ptr[i + 1]; ++e) {
            const double pij = p.val[e];
            if (pij <= 0.0) continue;
            const double w = 1.0 / (1.0 + squared_distance(y.row(i), y.row(p.col[e])));
            acc += pij * std::log(pij / w);
        }
        kl_rows[i] = acc;
    });
    double z = 0.0, kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        z += z_rows[i];
        kl += kl_rows[i];
    }
    // sum p log(p / (w / Z)) = sum p log(p / w) + log Z * sum p
    kl += std::log(z) * p.sum();
    return std::max(0.0, kl);
}

bool uses_exact(const TsneConfig& cfg, std::size_t n) {
    switch (cfg.method) {
    case TsneMethod::Exact: return true;
    case TsneMethod::BarnesHut: return cfg.theta == 0.0;
    case TsneMethod::Auto: return cfg.theta == 0.0 || n <= cfg.exact_threshold;
    }
    return true;
}

void validate(const TsneConfig& cfg, std::size_t n) {
    const double upper = (static_cast<double>(n) - 1.0) / 3.0;
    if (!(cfg.perplexity > 1.0) || !(cfg.perplexity < upper)) {
        throw Error(ErrorCode::InvalidArgument, "perplexity " + std::to_string(cfg.perplexity) +
                                                    " outside (1, (S-1)/3) for S=" + std::to_string(n));
    }
    if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "theta must lie in [0, 1]");
    }
    if (cfg.max_iter < 0 || cfg.kl_every < 1 || !(cfg.learning_rate > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "max_iter, kl_every and learning_rate must be positive");
    }
}

Projection run_tsne(const Matrix& x, const TsneConfig& cfg, const Exec& exec) {
    const std::size_t n = x.rows();
    validate(cfg, n);
    Projection proj;
    proj.config = cfg;
    proj.exact = uses_exact(cfg, n);

    const auto p = compute_affinities(x, cfg.perplexity, proj.exact ? AffinityMode::Exact : AffinityMode::Knn, exec,
                                      cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    proj.jittered = p.jittered;

    Matrix y(n, 2);
    if (cfg.init == TsneInit::Pca2d && x.cols() >= 2) {
        const auto model = fit_pca(x, 2, exec);
        y = pca_transform(model, x, exec);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) var += y(i, 0) * y(i, 0);
        const double sd = std::sqrt(var / static_cast<double>(n));
        const double scale = sd > 0.0 ? cfg.init_sigma / sd : 0.0;
        for (auto& v : y.values()) v *= scale;
    } else {
        Rng rng(cfg.seed);
        for (auto& v : y.values()) v = rng.normal(0.0, cfg.init_sigma);
    }

    auto gradient = [&](double p_scale) {
        return proj.exact ? tsne_gradient_exact(p, y, exec, p_scale) : tsne_gradient_bh(p, y, cfg.theta, exec, p_scale);
    };

    proj.kl_trace.push_back(kl_divergence(p, y, exec));
    proj.kl_iters.push_back(0);

    Matrix velocity(n, 2), gains(n, 2, 1.0);
    double momentum = cfg.momentum_initial;
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        if (iter == cfg.momentum_switch) momentum = cfg.momentum_final;
        const double p_scale = iter < cfg.exaggeration_iters ? cfg.exaggeration : 1.0;
        const Matrix grad = gradient(p_scale);

        auto& g = grad.values();
        auto& v = velocity.values();
        auto& gn = gains.values();
        auto& pos = y.values();
        for (std::size_t k = 0; k < pos.size(); ++k) {
            gn[k] = (std::signbit(g[k]) != std::signbit(v[k])) ? gn[k] + 0.2 : gn[k] * 0.8;
            gn[k] = std::max(gn[k], 0.01);
            v[k] = momentum * v[k] - cfg.learning_rate * gn[k] * g[k];
            pos[k] += v[k];
            if (!std::isfinite(pos[k])) {
                throw Error(ErrorCode::NonFinite, "t-SNE update became non-finite at iteration " + std::to_string(iter) +
                                                      " (point " + std::to_string(k / 2) + ")");
            }
        }
        double mx = 0.0, my = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mx += y(i, 0);
            my += y(i, 1);
        }
        mx /= static_cast<double>(n);
        my /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            y(i, 0) -= mx;
            y(i, 1) -= my;
        }

        const int done = iter + 1;
        if (done % cfg.kl_every == 0 || done == cfg.max_iter) {
            proj.kl_trace.push_back(kl_divergence(p, y, exec));
            proj.kl_iters.push_back(done);
        }
    }
    proj.coords = std::move(y);
    return proj;
}

} // namespace soxai
