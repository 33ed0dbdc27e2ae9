#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "soxai/manifest.hpp"

namespace soxai {

/// Half-open cell rectangle [row0, row1) x [col0, col1).
struct CellRect {
    std::size_t row0 = 0, col0 = 0, row1 = 0, col1 = 0;

    std::size_t area() const { return (row1 - row0) * (col1 - col0); }
    bool contains(std::size_t r, std::size_t c) const { return r >= row0 && r < row1 && c >= col0 && c < col1; }
    bool overlaps(const CellRect& o) const {
        return row0 < o.row1 && o.row0 < row1 && col0 < o.col1 && o.col0 < col1;
    }
    friend bool operator==(const CellRect&, const CellRect&) = default;
};

struct SynthConfig {
    std::size_t concepts = 3;
    std::size_t samples_per_concept = 200;
    std::size_t channels = 64;
    std::size_t grid = 8;
    double noise_sigma = 0.1;
    double signal_amp = 1.0;
    double bias_fraction = 0.0;
    double mask_noise = 0.0;
    std::uint64_t seed = 0;
    std::size_t pixels_per_cell = 8;

    void validate() const;
    nlohmann::json to_json() const;
};

struct SampleTruth {
    int concept_id = 0;
    bool biased = false;
    CellRect rect;
    std::optional<CellRect> distractor;
};

struct SynthTruth {
    std::map<std::string, SampleTruth> samples;
    std::size_t pixels_per_cell = 8;
    std::vector<std::vector<double>> signatures;  // concepts..., then distractor
};

struct SynthDataset {
    DatasetManifest manifest;
    SynthTruth truth;
};

/// Builds a dataset with planted concepts: each sample is Gaussian noise plus
/// its concept's unit signature inside a random rectangle, and its
/// explanation is the indicator of that rectangle. Biased samples also carry
/// a shared distractor signature in a second rectangle, and their explanation
/// marks the distractor instead. Writes features/, explanations/, images/,
/// manifest.json and truth.json under `out_dir`.
SynthDataset generate(const SynthConfig& cfg, const std::filesystem::path& out_dir);

nlohmann::json to_json(const SynthTruth& truth);
SynthTruth load_truth(const std::filesystem::path& path);

} // namespace soxai
