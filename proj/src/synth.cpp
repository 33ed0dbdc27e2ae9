#include "soxai/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "soxai/error.hpp"
#include "soxai/fileio.hpp"
#include "soxai/npy.hpp"
#include "soxai/png_io.hpp"
#include "soxai/rng.hpp"

namespace soxai {

using nlohmann::json;

namespace {

constexpr double kMaxAbsCos = 0.5;
constexpr int kSignatureAttempts = 1000;
constexpr double kBackground = 40.0;
constexpr double kConceptIntensity = 200.0;
constexpr double kDistractorIntensity = 255.0;

std::vector<double> unit_vector(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm += x * x;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

CellRect random_rect(Rng& rng, std::size_t grid) {
    const auto max_side = std::max<std::size_t>(2, grid / 2);
    const auto h = static_cast<std::size_t>(rng.uniform_int(2, static_cast<std::int64_t>(max_side)));
    const auto w = static_cast<std::size_t>(rng.uniform_int(2, static_cast<std::int64_t>(max_side)));
    const auto r0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(grid - h)));
    const auto c0 = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(grid - w)));
    return {r0, c0, r0 + h, c0 + w};
}

CellRect disjoint_rect(Rng& rng, std::size_t grid, const CellRect& avoid) {
    for (int attempt = 0; attempt < 256; ++attempt) {
        const auto r = random_rect(rng, grid);
        if (!r.overlaps(avoid)) return r;
    }
    // Exhaustive 2x2 placement as a last resort.
    for (std::size_t r0 = 0; r0 + 2 <= grid; ++r0) {
        for (std::size_t c0 = 0; c0 + 2 <= grid; ++c0) {
            CellRect r{r0, c0, r0 + 2, c0 + 2};
            if (!r.overlaps(avoid)) return r;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "grid too small for a disjoint distractor rectangle");
}

json rect_json(const CellRect& r) { return json::array({r.row0, r.col0, r.row1, r.col1}); }

CellRect rect_from_json(const json& j) {
    return {j.at(0).get<std::size_t>(), j.at(1).get<std::size_t>(), j.at(2).get<std::size_t>(),
            j.at(3).get<std::size_t>()};
}

} // namespace

void SynthConfig::validate() const {
    if (concepts < 1 || samples_per_concept < 1 || channels < 1 || pixels_per_cell < 1) {
        throw Error(ErrorCode::InvalidArgument, "synth: counts must be >= 1");
    }
    if (grid < 2) {
        throw Error(ErrorCode::InvalidArgument, "synth: grid must be >= 2 to hold a 2x2 rectangle");
    }
    if (!(bias_fraction >= 0.0 && bias_fraction <= 1.0) || !(mask_noise >= 0.0 && mask_noise <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "synth: fractions must lie in [0, 1]");
    }
    if (bias_fraction > 0.0 && grid < 4) {
        throw Error(ErrorCode::InvalidArgument, "synth: bias mode needs grid >= 4");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(signal_amp)) {
        throw Error(ErrorCode::InvalidArgument, "synth: noise_sigma must be >= 0");
    }
}

json SynthConfig::to_json() const {
    return {{"concepts", concepts},       {"samples_per_concept", samples_per_concept},
            {"channels", channels},       {"grid", grid},
            {"noise_sigma", noise_sigma}, {"signal_amp", signal_amp},
            {"bias_fraction", bias_fraction}, {"mask_noise", mask_noise},
            {"seed", seed},               {"pixels_per_cell", pixels_per_cell}};
}

SynthDataset generate(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t grid = cfg.grid;
    const std::size_t n_ch = cfg.channels;

    // Concept signatures plus the shared distractor, redrawn until pairwise
    // near-orthogonal.
    std::vector<std::vector<double>> sigs;
    for (int attempt = 0;; ++attempt) {
        if (attempt == kSignatureAttempts) {
            throw Error(ErrorCode::InvalidArgument, "synth: cannot draw near-orthogonal signatures; too few channels");
        }
        sigs.clear();
        for (std::size_t c = 0; c <= cfg.concepts; ++c) sigs.push_back(unit_vector(rng, n_ch));
        bool ok = true;
        for (std::size_t a = 0; a < sigs.size() && ok; ++a) {
            for (std::size_t b = a + 1; b < sigs.size() && ok; ++b) {
                const double cos = std::inner_product(sigs[a].begin(), sigs[a].end(), sigs[b].begin(), 0.0);
                ok = std::abs(cos) < kMaxAbsCos;
            }
        }
        if (ok) break;
    }
    const auto& distractor_sig = sigs.back();

    SynthDataset ds;
    ds.manifest.version = 1;
    ds.manifest.root = out_dir;
    ds.truth.pixels_per_cell = cfg.pixels_per_cell;
    ds.truth.signatures = sigs;

    const std::size_t px = grid * cfg.pixels_per_cell;
    const auto biased_per_concept =
        static_cast<std::size_t>(std::llround(cfg.bias_fraction * static_cast<double>(cfg.samples_per_concept)));

    for (std::size_t c = 0; c < cfg.concepts; ++c) {
        std::vector<std::size_t> order(cfg.samples_per_concept);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)))]);
        }
        std::vector<char> biased(cfg.samples_per_concept, 0);
        for (std::size_t b = 0; b < biased_per_concept; ++b) biased[order[b]] = 1;

        for (std::size_t s = 0; s < cfg.samples_per_concept; ++s) {
            char id_buf[64];
            std::snprintf(id_buf, sizeof id_buf, "c%zu_s%04zu", c, s);
            const std::string id = id_buf;

            SampleTruth truth;
            truth.concept_id = static_cast<int>(c);
            truth.biased = biased[s] != 0;
            truth.rect = random_rect(rng, grid);
            if (truth.biased) truth.distractor = disjoint_rect(rng, grid, truth.rect);

            Tensor feat(DType::F32, {grid, grid, n_ch});
            for (std::size_t r = 0; r < grid; ++r) {
                for (std::size_t q = 0; q < grid; ++q) {
                    double* cell = feat.data.data() + (r * grid + q) * n_ch;
                    const bool in_r = truth.rect.contains(r, q);
                    const bool in_d = truth.distractor && truth.distractor->contains(r, q);
                    for (std::size_t n = 0; n < n_ch; ++n) {
                        double v = rng.normal(0.0, cfg.noise_sigma);
                        if (in_r) v += cfg.signal_amp * sigs[c][n];
                        if (in_d) v += cfg.signal_amp * distractor_sig[n];
                        cell[n] = static_cast<float>(v);
                    }
                }
            }

            const CellRect& marked = truth.distractor ? *truth.distractor : truth.rect;
            Tensor expl(DType::F32, {grid, grid});
            for (std::size_t r = 0; r < grid; ++r) {
                for (std::size_t q = 0; q < grid; ++q) {
                    bool on = marked.contains(r, q);
                    if (cfg.mask_noise > 0.0 && rng.uniform() < cfg.mask_noise) on = !on;
                    expl.data[r * grid + q] = on ? 1.0 : 0.0;
                }
            }

            Tensor img(DType::U8, {px, px, 1});
            for (std::size_t y = 0; y < px; ++y) {
                for (std::size_t x = 0; x < px; ++x) {
                    const std::size_t r = y / cfg.pixels_per_cell;
                    const std::size_t q = x / cfg.pixels_per_cell;
                    double v = kBackground;
                    if (truth.rect.contains(r, q)) v = kConceptIntensity;
                    if (truth.distractor && truth.distractor->contains(r, q)) v = kDistractorIntensity;
                    img.data[y * px + x] = v;
                }
            }

            SampleRecord rec;
            rec.id = id;
            rec.features = "features/" + id + ".npy";
            rec.explanation = "explanations/" + id + ".npy";
            rec.image = "images/" + id + ".png";
            rec.label = "class_" + std::to_string(c);
            rec.meta = {{"generator", "synth"}};
            npy::write_tensor(feat, out_dir / rec.features);
            npy::write_tensor(expl, out_dir / rec.explanation);
            png::write_image(img, out_dir / *rec.image);
            ds.manifest.samples.push_back(std::move(rec));
            ds.truth.samples.emplace(id, truth);
        }
    }

    save_manifest(ds.manifest, out_dir / "manifest.json");
    json truth_doc = to_json(ds.truth);
    truth_doc["config"] = cfg.to_json();
    write_file(out_dir / "truth.json", truth_doc.dump(2) + "\n");
    return ds;
}

json to_json(const SynthTruth& truth) {
    json samples = json::object();
    for (const auto& [id, t] : truth.samples) {
        samples[id] = {{"concept", t.concept_id},
                       {"biased", t.biased},
                       {"rect", rect_json(t.rect)},
                       {"distractor", t.distractor ? rect_json(*t.distractor) : json(nullptr)}};
    }
    return {{"samples", std::move(samples)}, {"pixels_per_cell", truth.pixels_per_cell}};
}

SynthTruth load_truth(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file_text(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, path.string() + ": " + e.what());
    }
    SynthTruth t;
    t.pixels_per_cell = j.value("pixels_per_cell", std::size_t{8});
    for (const auto& [id, rec] : j.at("samples").items()) {
        SampleTruth s;
        s.concept_id = rec.at("concept").get<int>();
        s.biased = rec.at("biased").get<bool>();
        if (rec.contains("rect")) s.rect = rect_from_json(rec["rect"]);
        if (rec.contains("distractor") && !rec["distractor"].is_null()) s.distractor = rect_from_json(rec["distractor"]);
        t.samples.emplace(id, s);
    }
    return t;
}

} // namespace soxai
