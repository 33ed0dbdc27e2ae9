#include "soxai/affinity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <tuple>

#include "soxai/error.hpp"
#include "soxai/rng.hpp"

namespace soxai {
namespace {

constexpr int kMaxSearchSteps = 200;
constexpr double kTargetBits = 1e-8;
constexpr double kAcceptBits = 1e-5;
constexpr double kJitter = 1e-9;

// Entropy in nats of the Gaussian over shifted squared distances; fills probs.
double entropy_at(std::span<const double> shifted, double beta, std::span<double> probs) {
    double z = 0.0;
    for (std::size_t m = 0; m < shifted.size(); ++m) {
        probs[m] = std::exp(-beta * shifted[m]);
        z += probs[m];
    }
    double weighted = 0.0;
    for (std::size_t m = 0; m < shifted.size(); ++m) {
        weighted += shifted[m] * probs[m];
    }
    for (auto& p : probs) p /= z;
    return beta * weighted / z + std::log(z);
}

} // namespace

double SparseAffinity::sum() const {
    double acc = 0.0;
    for (double v : val) acc += v;
    return acc;
}

double SparseAffinity::at(std::size_t i, std::size_t j) const {
    const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(j));
    if (it == last || *it != j) return 0.0;
    return val[static_cast<std::size_t>(it - col.begin())];
}

std::size_t knn_neighbor_count(std::size_t n, double perplexity) {
    return std::min(n - 1, static_cast<std::size_t>(3.0 * perplexity));
}

double calibrate_row(std::span<const double> sq_dists, double perplexity, std::span<double> probs) {
    const std::size_t k = sq_dists.size();
    if (k == 0) {
        throw Error(ErrorCode::InvalidArgument, "calibration needs at least one neighbor");
    }
    const double target = std::log(perplexity);
    const double tol_nats = kTargetBits * std::numbers::ln2;
    const double accept_nats = kAcceptBits * std::numbers::ln2;

    // Shifting by the nearest distance leaves the normalized distribution
    // unchanged and keeps exp() away from underflow.
    const double nearest = *std::min_element(sq_dists.begin(), sq_dists.end());
    std::vector<double> shifted(k);
    double farthest = 0.0;
    for (std::size_t m = 0; m < k; ++m) {
        shifted[m] = sq_dists[m] - nearest;
        farthest = std::max(farthest, shifted[m]);
    }
    if (farthest == 0.0) {
        // All neighbors equidistant: the distribution is uniform for every
        // beta, so uniform is returned whatever the target.
        std::fill(probs.begin(), probs.end(), 1.0 / static_cast<double>(k));
        return 0.0;
    }

    double beta = 1.0 / farthest;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double diff = 0.0;
    for (int step = 0; step < kMaxSearchSteps; ++step) {
        diff = entropy_at(shifted, beta, probs) - target;
        if (std::abs(diff) < tol_nats) {
            return beta;
        }
        if (diff > 0) {
            lo = beta;
            beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
        if (lo == hi || beta == lo || beta == hi) break;
    }
    diff = entropy_at(shifted, beta, probs) - target;
    if (std::abs(diff) > accept_nats) {
        throw Error(ErrorCode::SearchFailed, "perplexity bandwidth search did not converge");
    }
    return beta;
}

ConditionalAffinities calibrate_conditionals(const Matrix& x, double perplexity, AffinityMode mode,
                                             const Exec& exec, std::uint64_t jitter_seed) {
    const std::size_t n = x.rows();
    if (n < 4) {
        throw Error(ErrorCode::InvalidArgument, "affinities need at least 4 points");
    }
    if (!(perplexity > 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "perplexity must exceed 1");
    }
    const std::size_t k = mode == AffinityMode::Exact ? n - 1 : knn_neighbor_count(n, perplexity);
    if (!(perplexity < static_cast<double>(k))) {
        throw Error(ErrorCode::InvalidArgument, "perplexity must be smaller than the neighbor count");
    }

    ConditionalAffinities cond;
    cond.n = n;
    cond.neighbors.resize(n);
    cond.probs.resize(n);
    cond.beta.assign(n, 0.0);

    const Matrix* data = &x;
    Matrix jittered;
    std::vector<std::vector<double>> sq(n);

    auto gather = [&](const Matrix& pts) {
        std::vector<char> has_duplicate(n, 0);
        parallel_for(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
            const auto i = static_cast<std::size_t>(ii);
            std::vector<std::pair<double, std::uint32_t>> cand;
            cand.reserve(n - 1);
            const auto xi = pts.row(i);
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double d = squared_distance(xi, pts.row(j));
                if (d == 0.0) has_duplicate[i] = 1;
                cand.emplace_back(d, static_cast<std::uint32_t>(j));
            }
            if (k < cand.size()) {
                std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
                cand.resize(k);
            }
            auto& nb = cond.neighbors[i];
            auto& dist = sq[i];
            nb.resize(cand.size());
            dist.resize(cand.size());
            for (std::size_t m = 0; m < cand.size(); ++m) {
                dist[m] = cand[m].first;
                nb[m] = cand[m].second;
            }
            if (mode == AffinityMode::Knn) {
                // keep columns sorted by index for exact-mode parity
                std::vector<std::size_t> order(nb.size());
                std::iota(order.begin(), order.end(), 0);
                std::sort(order.begin(), order.end(), [&](auto a, auto b) { return nb[a] < nb[b]; });
                std::vector<std::uint32_t> nb2(nb.size());
                std::vector<double> d2(nb.size());
                for (std::size_t m = 0; m < order.size(); ++m) {
                    nb2[m] = nb[order[m]];
                    d2[m] = dist[order[m]];
                }
                nb = std::move(nb2);
                dist = std::move(d2);
            }
        });
        return std::any_of(has_duplicate.begin(), has_duplicate.end(), [](char c) { return c != 0; });
    };

    if (gather(x)) {
        Rng rng(jitter_seed);
        jittered = x;
        for (auto& v : jittered.values()) v += rng.uniform(-kJitter, kJitter);
        data = &jittered;
        cond.jittered = true;
        gather(*data);
    }

    std::vector<std::string> failures(n);
    parallel_for(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        cond.probs[i].assign(cond.neighbors[i].size(), 0.0);
        try {
            cond.beta[i] = calibrate_row(sq[i], perplexity, cond.probs[i]);
        } catch (const Error& e) {
            failures[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < n; ++i) {
        if (!failures[i].empty()) {
            throw Error(ErrorCode::SearchFailed, "point " + std::to_string(i) + ": " + failures[i]);
        }
    }
    return cond;
}

SparseAffinity symmetrize(const ConditionalAffinities& cond) {
    const std::size_t n = cond.n;
    const double scale = 1.0 / (2.0 * static_cast<double>(n));
    std::vector<std::tuple<std::uint32_t, std::uint32_t, double>> trip;
    std::size_t total = 0;
    for (const auto& nb : cond.neighbors) total += nb.size();
    trip.reserve(2 * total);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t m = 0; m < cond.neighbors[i].size(); ++m) {
            const auto j = cond.neighbors[i][m];
            if (j == i) continue;
            const double v = cond.probs[i][m] * scale;
            trip.emplace_back(static_cast<std::uint32_t>(i), j, v);
            trip.emplace_back(j, static_cast<std::uint32_t>(i), v);
        }
    }
    // Each (i, j) collects at most P(j|i) and P(i|j); adding the pair in
    // sorted-value order makes P_ij and P_ji bit-identical.
    std::sort(trip.begin(), trip.end());

    SparseAffinity p;
    p.n = n;
    p.jittered = cond.jittered;
    p.row_ptr.assign(n + 1, 0);
    for (std::size_t t = 0; t < trip.size();) {
        const auto [r, c, v] = trip[t];
        double acc = v;
        std::size_t u = t + 1;
        while (u < trip.size() && std::get<0>(trip[u]) == r && std::get<1>(trip[u]) == c) {
            acc += std::get<2>(trip[u]);
            ++u;
        }
        p.col.push_back(c);
        p.val.push_back(acc);
        ++p.row_ptr[r + 1];
        t = u;
    }
    for (std::size_t i = 0; i < n; ++i) p.row_ptr[i + 1] += p.row_ptr[i];
    return p;
}

SparseAffinity compute_affinities(const Matrix& x, double perplexity, AffinityMode mode, const Exec& exec,
                                  std::uint64_t jitter_seed) {
    return symmetrize(calibrate_conditionals(x, perplexity, mode, exec, jitter_seed));
}

} // namespace soxai
