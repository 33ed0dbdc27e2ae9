// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <sys/wait.h>

#include "oracles.hpp"
#include "soxai/affinity.hpp"
#include "soxai/curation.hpp"
#include "soxai/dbscan.hpp"
#include "soxai/embedding.hpp"
#include "soxai/fileio.hpp"
#include "soxai/pca.hpp"
#include "soxai/quality.hpp"
#include "soxai/rng.hpp"
#include "soxai/synth.hpp"
#include "soxai/tsne.hpp"

#ifndef SOXAI_CLI_PATH
#error "SOXAI_CLI_PATH must point at the soxai executable"
#endif

using namespace soxai;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
    std::printf("%s  %-28s %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void guarded(const std::string& name, const std::function<void()>& body) {
    try {
        body();
    } catch (const std::exception& e) {
        report(false, name, std::string("exception: ") + e.what());
    }
}

int cli(const fs::path& cwd, const std::string& args) {
    const std::string cmd =
        "cd '" + cwd.string() + "' && '" SOXAI_CLI_PATH "' " + args + " >> acceptance.log 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

FeatureMap random_features(Rng& rng, std::size_t h, std::size_t w, std::size_t n) {
    FeatureMap m{h, w, n, std::vector<double>(h * w * n)};
    for (auto& v : m.values) v = rng.normal();
    return m;
}

ExplanationMap random_explanation(Rng& rng, std::size_t h, std::size_t w) {
    ExplanationMap a{h, w, std::vector<double>(h * w)};
    for (auto& v : a.weights) v = rng.uniform() < 0.25 ? 0.0 : rng.uniform(0.0, 3.0);
    a.weights[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(h * w - 1)))] += 1.0;
    return a;
}

Matrix gaussian(std::size_t s, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Matrix x(s, d);
    for (auto& v : x.values()) v = rng.normal();
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

void eq1_oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const auto h = static_cast<std::size_t>(rng.uniform_int(1, 16));
        const auto w = static_cast<std::size_t>(rng.uniform_int(1, 16));
        const auto n = static_cast<std::size_t>(rng.uniform_int(1, 128));
        const auto m = random_features(rng, h, w, n);
        const auto a = random_explanation(rng, h, w);
        const auto got = embed(m, a).values;
        std::vector<oracle::Dense> md(h, oracle::Dense(w, std::vector<double>(n)));
        oracle::Dense ad(h, std::vector<double>(w));
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
                ad[i][j] = a.at(i, j);
                for (std::size_t c = 0; c < n; ++c) md[i][j][c] = m.at(i, j, c);
            }
        const auto want = oracle::embed_double_loop(md, ad);
        for (std::size_t c = 0; c < n; ++c)
            worst = std::max(worst, std::abs(got[c] - want[c]) / std::max(1.0, std::abs(want[c])));
    }
    const double secs = seconds_since(t0);
    report(worst <= 1e-6 && secs < 10.0, "eq1-oracle",
           fmt("max rel err %.3g (<= 1e-6) over 1000 cases, %.2f s (< 10 s)", worst, secs));
}

void eq1_scale_invariance() {
    Rng rng(1002);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto h = static_cast<std::size_t>(rng.uniform_int(1, 16));
        const auto w = static_cast<std::size_t>(rng.uniform_int(1, 16));
        const auto n = static_cast<std::size_t>(rng.uniform_int(1, 128));
        const auto m = random_features(rng, h, w, n);
        const auto a = random_explanation(rng, h, w);
        const auto base = embed(m, a).values;
        for (double c : {0.5, 2.0, 10.0}) {
            auto s = a;
            for (auto& v : s.weights) v *= c;
            const auto got = embed(m, s).values;
            for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(got[k] - base[k]));
        }
    }
    report(worst <= 1e-6, "eq1-scale-invariance", fmt("max abs diff %.3g (<= 1e-6), c in {0.5,2,10}, 100 cases", worst));
}

void pca_recovery() {
    Rng rng(1003);
    const double var[] = {9.0, 1.0, 0.01};
    Matrix x(5000, 3);
    for (std::size_t i = 0; i < 5000; ++i)
        for (std::size_t d = 0; d < 3; ++d) x(i, d) = rng.normal(0.0, std::sqrt(var[d]));
    const auto model = fit_pca(x, 3);
    double worst_rel = 0.0, worst_angle = 0.0, ortho = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        worst_rel = std::max(worst_rel, std::abs(model.eigenvalues[k] - var[k]) / var[k]);
        const double c = std::min(1.0, std::abs(model.components(k, k)));
        worst_angle = std::max(worst_angle, std::acos(c) * 180.0 / std::numbers::pi);
        for (std::size_t l = 0; l < 3; ++l) {
            double dot = 0.0;
            for (std::size_t d = 0; d < 3; ++d) dot += model.components(k, d) * model.components(l, d);
            ortho = std::max(ortho, std::abs(dot - (k == l ? 1.0 : 0.0)));
        }
    }
    report(worst_rel <= 0.15 && worst_angle < 5.0 && ortho <= 1e-6, "pca-diag-covariance",
           fmt("eigen rel err %.3f (<= 0.15), axis angle %.3f deg (< 5), orthonormality %.2g (<= 1e-6)", worst_rel,
               worst_angle, ortho));
}

void tsne_calibration() {
    const auto x = gaussian(500, 10, 1004);
    double worst = 0.0;
    for (auto mode : {AffinityMode::Exact, AffinityMode::Knn})
        for (double perp : {5.0, 30.0}) {
            const auto cond = calibrate_conditionals(x, perp, mode);
            for (const auto& row : cond.probs)
                worst = std::max(worst, std::abs(oracle::entropy_bits(row) - std::log2(perp)));
        }
    report(worst <= 1e-5, "tsne-calibration",
           fmt("max |H - log2(perp)| %.3g bits (<= 1e-5), perp {5,30}, S=500, exact and knn", worst));
}

void tsne_gradient() {
    const auto xs = gaussian(20, 5, 1005);
    const auto ps = compute_affinities(xs, 5.0, AffinityMode::Exact);
    const auto ys = gaussian(20, 2, 1006);
    const double fd_err = rel_l2(tsne_gradient_exact(ps, ys), oracle::kl_gradient_fd(dense(ps), ys, 1e-5));

    const auto xb = gaussian(500, 10, 1007);
    const auto pb = compute_affinities(xb, 30.0, AffinityMode::Knn);
    Matrix yb = gaussian(500, 2, 1008);
    for (auto& v : yb.values()) v *= 10.0;
    const double bh_err = rel_l2(tsne_gradient_bh(pb, yb, 0.2), tsne_gradient_exact(pb, yb));
    report(fd_err <= 1e-4 && bh_err <= 1e-2, "tsne-gradient",
           fmt("exact vs FD %.3g (<= 1e-4) at S=20; BH(0.2) vs exact %.3g (<= 1e-2) at S=500", fd_err, bh_err));
}

void tsne_quality() {
    Rng rng(1009);
    Matrix x(300, 10);
    std::vector<int> labels;
    for (std::size_t i = 0; i < 300; ++i) {
        const int c = static_cast<int>(i / 100);
        labels.push_back(c);
        for (std::size_t d = 0; d < 10; ++d) x(i, d) = rng.normal() + (d == static_cast<std::size_t>(c) ? 10.0 : 0.0);
    }
    const auto t0 = std::chrono::steady_clock::now();
    TsneConfig cfg;
    cfg.seed = 3;
    const auto proj = run_tsne(x, cfg);
    const double secs = seconds_since(t0);
    const double acc = one_nn_accuracy(proj.coords, labels);
    const double tw = trustworthiness(x, proj.coords, 12);
    const double kl0 = proj.kl_trace.front(), kl1 = proj.kl_trace.back();
    report(acc >= 0.95 && tw >= 0.90 && kl1 < kl0 && secs < 30.0, "tsne-quality",
           fmt("1-NN %.3f (>= 0.95), T(12) %.3f (>= 0.90), KL %.3f -> %.3f, %.2f s (< 30 s)", acc, tw, kl0, kl1,
               secs));
}

void dbscan_oracle() {
    Rng rng(1010);
    int matched = 0;
    for (int t = 0; t < 100; ++t) {
        const auto s = static_cast<std::size_t>(rng.uniform_int(2, 500));
        Matrix x(s, 2);
        const int blobs = static_cast<int>(rng.uniform_int(1, 5));
        for (std::size_t i = 0; i < s; ++i) {
            const double cx = 10.0 * static_cast<double>(i % static_cast<std::size_t>(blobs));
            x(i, 0) = cx + rng.normal(0.0, rng.uniform(0.3, 2.0));
            x(i, 1) = rng.normal(0.0, 1.0);
        }
        const double eps = rng.uniform(0.1, 1.5);
        const auto mp = static_cast<std::size_t>(rng.uniform_int(2, 12));
        if (dbscan(x, eps, mp).labels == oracle::dbscan(x, eps, mp)) ++matched;
    }
    report(matched == 100, "dbscan-oracle", fmt("%d/100 instances match the naive partition exactly", matched));
}

struct TruthIndex {
    std::map<std::string, SampleTruth> samples;
    std::size_t ppc = 0;
};

TruthIndex load(const fs::path& p) {
    const auto t = load_truth(p);
    return {t.samples, t.pixels_per_cell};
}

void e2e_concepts(const fs::path& work) {
    const auto t0 = std::chrono::steady_clock::now();
    const int a = cli(work, "synth --concepts 3 --per 200 --seed 7 -o ds");
    const int b = cli(work, "pipeline ds/manifest.json -o run1 --threads 1");
    const double secs = seconds_since(t0);
    if (a != 0 || b != 0) {
        report(false, "e2e-concept-recovery", fmt("cli exit codes synth=%d pipeline=%d", a, b));
        return;
    }
    const auto clusters = json::parse(read_file_text(work / "run1" / "clusters.json"));
    const auto truth = load(work / "ds" / "truth.json");
    ClusterLabels labels;
    labels.labels = clusters["labels"].get<std::vector<int>>();
    std::vector<int> concepts;
    for (const auto& id : clusters["ids"]) concepts.push_back(truth.samples.at(id.get<std::string>()).concept_id);
    const double pur = purity(labels, concepts);
    const int count = clusters["cluster_count"].get<int>();
    report(pur >= 0.9 && count >= 3 && secs < 60.0, "e2e-concept-recovery",
           fmt("purity %.3f (>= 0.9), %d clusters (>= 3), %zu noise, %.2f s single-threaded (< 60 s)", pur, count,
               clusters["noise_count"].get<std::size_t>(), secs));

    const auto proj = json::parse(read_file_text(work / "run1" / "projection.json"));
    const auto& pca = proj["config"]["pca"];
    const bool applied = pca.value("applied", false);
    const int dims = applied ? pca["dims"].get<int>() : 0;
    report(applied && dims == 50, "pca-50-dims",
           fmt("pipeline reduced %d -> %d dims before t-SNE (expected 50)", pca["input_dims"].get<int>(), dims));
}

void e2e_bias(const fs::path& work) {
    if (cli(work, "synth --concepts 3 --per 200 --seed 7 --bias 0.3 -o dsb") != 0 ||
        cli(work, "pipeline dsb/manifest.json -o runb") != 0) {
        report(false, "e2e-bias-recovery", "cli failed");
        return;
    }
    const auto clusters = json::parse(read_file_text(work / "runb" / "clusters.json"));
    const auto truth = load(work / "dsb" / "truth.json");
    const auto labels = clusters["labels"].get<std::vector<int>>();
    const auto ids = clusters["ids"].get<std::vector<std::string>>();
    std::map<int, std::pair<int, int>> tally;  // cluster -> (biased, size)
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (labels[i] == kNoise) continue;
        auto& t = tally[labels[i]];
        t.first += truth.samples.at(ids[i]).biased;
        ++t.second;
    }
    int best = -1;
    double best_frac = 0.0;
    for (const auto& [c, t] : tally) {
        const double frac = static_cast<double>(t.first) / t.second;
        if (frac >= 0.8 && (best < 0 || t.first > tally[best].first)) {
            best = c;
            best_frac = frac;
        }
    }
    if (best < 0) {
        report(false, "e2e-bias-recovery", "no cluster with >= 80% biased members");
        return;
    }
    write_file(work / "marks.json", json{{"version", 1}, {"marks", {{{"cluster", best}, {"action", "mask"}}}}}.dump());
    if (cli(work, "curate --marks marks.json --labels runb/clusters.json -o cleanb") != 0) {
        report(false, "e2e-bias-recovery", "curate failed");
        return;
    }
    const auto plan = json::parse(read_file_text(work / "cleanb" / "plan.json"));
    std::map<std::string, PixelRect> jobs;
    for (const auto& j : plan["mask_jobs"]) {
        const auto r = j["region"].get<std::vector<std::size_t>>();
        jobs[j["id"].get<std::string>()] = PixelRect{r[0], r[1], r[2], r[3]};
    }
    int biased = 0, hit = 0;
    for (const auto& [id, t] : truth.samples) {
        if (!t.biased) continue;
        ++biased;
        const auto it = jobs.find(id);
        if (it == jobs.end()) continue;
        const auto& d = *t.distractor;
        const PixelRect planted{d.row0 * truth.ppc, d.col0 * truth.ppc, d.row1 * truth.ppc, d.col1 * truth.ppc};
        if (iou(it->second, planted) >= 0.5) ++hit;
    }
    const double cover = static_cast<double>(hit) / biased;
    report(best_frac >= 0.8 && cover >= 0.9, "e2e-bias-recovery",
           fmt("cluster %d is %.1f%% biased (>= 80%%); IoU >= 0.5 for %d/%d biased samples = %.3f (>= 0.9)", best,
               100.0 * best_frac, hit, biased, cover));
}

void determinism(const fs::path& work) {
    bool same = true;
    std::string detail = "threads {1,2,4,7}:";
    for (int threads : {2, 4, 7}) {
        const std::string out = "run" + std::to_string(threads);
        if (cli(work, "pipeline ds/manifest.json -o " + out + " --threads " + std::to_string(threads)) != 0) {
            report(false, "determinism", "pipeline failed at --threads " + std::to_string(threads));
            return;
        }
        for (const char* f : {"projection.json", "clusters.json", "scatter.svg"}) {
            if (read_file_bytes(work / "run1" / f) != read_file_bytes(work / out / f)) {
                same = false;
                detail += fmt(" %s differs at %d;", f, threads);
            }
        }
    }
    report(same, "determinism", same ? detail + " projection.json, clusters.json, scatter.svg byte-identical" : detail);
}

} // namespace

int main() {
    const fs::path work = fs::temp_directory_path() / ("soxai_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(work);

    guarded("eq1-oracle", eq1_oracle);
    guarded("eq1-scale-invariance", eq1_scale_invariance);
    guarded("pca-diag-covariance", pca_recovery);
    guarded("tsne-calibration", tsne_calibration);
    guarded("tsne-gradient", tsne_gradient);
    guarded("tsne-quality", tsne_quality);
    guarded("dbscan-oracle", dbscan_oracle);
    guarded("e2e-concept-recovery", [&] { e2e_concepts(work); });
    guarded("e2e-bias-recovery", [&] { e2e_bias(work); });
    guarded("determinism", [&] { determinism(work); });

    std::error_code ec;
    if (g_failures == 0) fs::remove_all(work, ec);
    else std::printf("work directory kept at %s\n", work.c_str());
    std::printf("%d failure(s)\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
