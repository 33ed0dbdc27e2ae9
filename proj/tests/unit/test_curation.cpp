#include <doctest.h>

#include "helpers.hpp"
#include "soxai/curation.hpp"
#include "soxai/error.hpp"
#include "soxai/fileio.hpp"
#include "soxai/synth.hpp"

using namespace soxai;
using testutil::TempDir;

namespace {

struct Fixture {
    TempDir dir;
    DatasetManifest manifest;
    ClusterLabels labels;
    std::vector<std::string> ids;

    // s0..s5: s0-s2 in cluster 0, s3-s4 in cluster 1, s5 noise.
    Fixture() {
        manifest.root = dir / "src";
        for (int i = 0; i < 6; ++i) {
            const std::string id = "s" + std::to_string(i);
            Tensor expl(DType::F32, {4, 4});
            expl.data[static_cast<std::size_t>(i % 4) * 4 + 1] = 1.0;
            Tensor img(DType::U8, {16, 16, 1}, std::vector<double>(256, 100.0));
            testutil::add_sample(manifest, manifest.root, id, Tensor(DType::F32, {4, 4, 2}), expl, "c",
                                 i == 4 ? std::nullopt : std::optional<Tensor>(img));
            ids.push_back(id);
        }
        save_manifest(manifest, manifest.root / "manifest.json");
        labels.labels = {0, 0, 0, 1, 1, kNoise};
        labels.cluster_count = 2;
    }
};

BiasMarks marks(std::vector<ClusterMark> m, std::vector<SampleOverride> o = {}) { return {1, m, o}; }

} // namespace

TEST_SUITE("curation") {

TEST_CASE("exclude a cluster, keep override") {
    Fixture f;
    auto p = plan(marks({{0, MarkAction::Exclude, ""}}), f.labels, f.ids, f.manifest);
    CHECK(p.excluded == std::vector<std::string>{"s0", "s1", "s2"});
    CHECK(p.mask_jobs.empty());
    p = plan(marks({{0, MarkAction::Exclude, ""}}, {{"s1", OverrideAction::Keep}}), f.labels, f.ids, f.manifest);
    CHECK(p.excluded == std::vector<std::string>{"s0", "s2"});
    p = plan(marks({}, {{"s5", OverrideAction::Exclude}, {"zz", OverrideAction::Exclude}}), f.labels, f.ids,
             f.manifest);
    CHECK(p.excluded == std::vector<std::string>{"s5"});
    CHECK(p.warnings.size() == 1);
}

TEST_CASE("mask a cluster: regions from explanations, imageless samples downgraded") {
    Fixture f;
    const auto p = plan(marks({{1, MarkAction::Mask, "logo"}}), f.labels, f.ids, f.manifest);
    REQUIRE(p.mask_jobs.size() == 1);
    CHECK(p.mask_jobs[0].id == "s3");
    CHECK(p.mask_jobs[0].region == PixelRect{12, 4, 16, 8});
    CHECK(p.excluded == std::vector<std::string>{"s4"});
    CHECK_FALSE(p.warnings.empty());
}

TEST_CASE("unknown cluster and conflicting marks") {
    Fixture f;
    try {
        plan(marks({{7, MarkAction::Exclude, ""}}), f.labels, f.ids, f.manifest);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnknownCluster);
    }
    CHECK_THROWS_AS(plan(marks({{0, MarkAction::Exclude, ""}, {0, MarkAction::Mask, ""}}), f.labels, f.ids, f.manifest),
                    Error);
    CHECK_NOTHROW(plan(marks({{0, MarkAction::Exclude, ""}, {0, MarkAction::Exclude, "again"}}), f.labels, f.ids,
                       f.manifest));
}

TEST_CASE("marks json round trip and version check") {
    const auto m = marks({{2, MarkAction::Mask, "n"}}, {{"a", OverrideAction::Keep}});
    const auto back = marks_from_json(to_json(m));
    REQUIRE(back.marks.size() == 1);
    CHECK(back.marks[0].cluster == 2);
    CHECK(back.marks[0].action == MarkAction::Mask);
    CHECK(back.sample_overrides[0].id == "a");
    CHECK_THROWS_AS(marks_from_json({{"version", 3}, {"marks", nlohmann::json::array()}}), Error);
    CHECK_THROWS_AS(marks_from_json({{"version", 1}, {"marks", {{{"cluster", 0}, {"action", "burn"}}}}}), Error);
}

TEST_CASE("explanation region thresholds at half the max") {
    Tensor e(DType::F32, {4, 4});
    e.data[5] = 1.0;
    e.data[10] = 0.6;
    e.data[15] = 0.4;
    CHECK(*explanation_region(e, 8, 8) == PixelRect{2, 2, 6, 6});
    CHECK_FALSE(explanation_region(Tensor(DType::F32, {4, 4}), 8, 8).has_value());
}

TEST_CASE("mask_region: constant, zero area, mean on checkerboard, full-image mean") {
    Tensor black(DType::U8, {4, 4, 1});
    auto r = mask_region(black, {1, 1, 3, 3}, Fill::constant(255));
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x)
            CHECK(r.image.data[y * 4 + x] == ((y >= 1 && y < 3 && x >= 1 && x < 3) ? 255 : 0));
    CHECK(mask_region(black, {2, 2, 2, 3}, Fill::constant(9)).image == black);

    Tensor checker(DType::U8, {8, 8, 3});
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x)
            for (std::size_t c = 0; c < 3; ++c) checker.data[(y * 8 + x) * 3 + c] = ((x + y) % 2) ? 200.0 + c : 10.0;
    const PixelRect quad{0, 0, 4, 4};
    double expected[3] = {0, 0, 0};
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x)
            if (!(y < 4 && x < 4))
                for (std::size_t c = 0; c < 3; ++c) expected[c] += checker.data[(y * 8 + x) * 3 + c];
    r = mask_region(checker, quad, Fill::mean());
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x)
            for (std::size_t c = 0; c < 3; ++c) CHECK(r.image.data[(y * 8 + x) * 3 + c] == std::round(expected[c] / 48.0));
    CHECK(r.image.data[(7 * 8 + 7) * 3] == checker.data[(7 * 8 + 7) * 3]);

    CHECK_THROWS_AS(mask_region(checker, {0, 0, 8, 8}, Fill::mean()), Error);
    const auto clamped = mask_region(checker, {6, 6, 20, 20}, Fill::constant(0));
    CHECK(clamped.clamped);
}

TEST_CASE("iou of pixel rectangles") {
    CHECK(iou({0, 0, 2, 2}, {0, 0, 2, 2}) == 1.0);
    CHECK(iou({0, 0, 2, 2}, {2, 2, 4, 4}) == 0.0);
    CHECK(iou({0, 0, 2, 2}, {0, 1, 2, 3}) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("apply: empty plan reproduces the manifest, exclusions drop samples, result validates") {
    Fixture f;
    auto res = apply(CurationPlan{}, f.manifest, f.dir / "out0");
    CHECK(res.errors.empty());
    CHECK(res.manifest == f.manifest);
    CHECK(load_manifest(f.dir / "out0" / "manifest.json") == f.manifest);
    CHECK(validate_manifest(res.manifest, f.dir / "out0").empty());

    const auto p = plan(marks({{0, MarkAction::Exclude, ""}, {1, MarkAction::Mask, ""}}), f.labels, f.ids, f.manifest,
                        Fill::constant(0));
    res = apply(p, f.manifest, f.dir / "out1");
    CHECK(res.manifest.samples.size() == 6 - p.excluded.size());
    CHECK(validate_manifest(res.manifest, f.dir / "out1").empty());
    const auto masked = png::read_image(f.dir / "out1" / "images" / "s3.png");
    CHECK(masked.data[12 * 16 + 4] == 0);
    CHECK(masked.data[0] == 100);
    // sources untouched
    CHECK(png::read_image(f.manifest.root / "images" / "s3.png").data[12 * 16 + 4] == 100);
}

TEST_CASE("apply refuses to write into the source directory or outside the root") {
    Fixture f;
    CHECK_THROWS_AS(apply(CurationPlan{}, f.manifest, f.manifest.root), Error);
    auto evil = f.manifest;
    evil.samples[0].features = "../escape.npy";
    const auto res = apply(CurationPlan{}, evil, f.dir / "out");
    CHECK_FALSE(res.errors.empty());
    CHECK_FALSE(std::filesystem::exists(f.dir / "escape.npy"));
}

TEST_CASE("plan json carries regions and fill") {
    Fixture f;
    const auto p = plan(marks({{1, MarkAction::Mask, ""}}), f.labels, f.ids, f.manifest);
    const auto j = to_json(p);
    CHECK(j["mask_jobs"][0]["id"] == "s3");
    CHECK(j["mask_jobs"][0]["fill"] == "mean");
    CHECK(j["mask_jobs"][0]["region"] == nlohmann::json::array({12, 4, 16, 8}));
    CHECK(j["output_manifest"] == "manifest.json");
}

}
