#include "soxai/curation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_map>

#include "soxai/error.hpp"
#include "soxai/fileio.hpp"
#include "soxai/npy.hpp"
#include "soxai/png_io.hpp"

namespace soxai {

using nlohmann::json;

namespace {

MarkAction parse_mark_action(const std::string& s) {
    if (s == "exclude") return MarkAction::Exclude;
    if (s == "mask") return MarkAction::Mask;
    throw Error(ErrorCode::MalformedJson, "marks: unknown cluster action '" + s + "'");
}

OverrideAction parse_override_action(const std::string& s) {
    if (s == "keep") return OverrideAction::Keep;
    if (s == "exclude") return OverrideAction::Exclude;
    if (s == "mask") return OverrideAction::Mask;
    throw Error(ErrorCode::MalformedJson, "marks: unknown sample action '" + s + "'");
}

const char* name(MarkAction a) { return a == MarkAction::Mask ? "mask" : "exclude"; }
const char* name(OverrideAction a) {
    switch (a) {
    case OverrideAction::Keep: return "keep";
    case OverrideAction::Exclude: return "exclude";
    case OverrideAction::Mask: return "mask";
    }
    return "keep";
}

bool escapes_root(const std::string& rel) {
    const std::filesystem::path p(rel);
    if (p.is_absolute()) return true;
    for (const auto& part : p.lexically_normal()) {
        if (part == "..") return true;
    }
    return false;
}

} // namespace

BiasMarks marks_from_json(const json& j) {
    try {
        BiasMarks m;
        m.version = j.at("version").get<int>();
        if (m.version != 1) {
            throw Error(ErrorCode::UnknownSchemaVersion, "unknown marks version " + std::to_string(m.version));
        }
        for (const auto& mk : j.value("marks", json::array())) {
            m.marks.push_back({mk.at("cluster").get<int>(), parse_mark_action(mk.at("action").get<std::string>()),
                               mk.value("note", std::string{})});
        }
        for (const auto& ov : j.value("sample_overrides", json::array())) {
            m.sample_overrides.push_back(
                {ov.at("id").get<std::string>(), parse_override_action(ov.at("action").get<std::string>())});
        }
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedJson, std::string("marks: ") + e.what());
    }
}

json to_json(const BiasMarks& m) {
    json marks = json::array(), overrides = json::array();
    for (const auto& mk : m.marks) marks.push_back({{"cluster", mk.cluster}, {"action", name(mk.action)}, {"note", mk.note}});
    for (const auto& ov : m.sample_overrides) overrides.push_back({{"id", ov.id}, {"action", name(ov.action)}});
    return {{"version", m.version}, {"marks", marks}, {"sample_overrides", overrides}};
}

BiasMarks load_marks(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_file_text(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, path.string() + ": " + e.what());
    }
    return marks_from_json(j);
}

double iou(const PixelRect& a, const PixelRect& b) {
    const PixelRect inter{std::max(a.row0, b.row0), std::max(a.col0, b.col0), std::min(a.row1, b.row1),
                          std::min(a.col1, b.col1)};
    const double i = static_cast<double>(inter.area());
    const double u = static_cast<double>(a.area() + b.area()) - i;
    return u > 0.0 ? i / u : 0.0;
}

json to_json(const CurationPlan& p) {
    json jobs = json::array();
    for (const auto& job : p.mask_jobs) {
        jobs.push_back({{"id", job.id},
                        {"region", {job.region.row0, job.region.col0, job.region.row1, job.region.col1}},
                        {"fill", job.fill.kind == Fill::Kind::Mean ? json("mean") : json(job.fill.value)}});
    }
    return {{"excluded", p.excluded}, {"mask_jobs", jobs}, {"warnings", p.warnings},
            {"output_manifest", p.output_manifest}};
}

std::optional<PixelRect> explanation_region(const Tensor& explanation, std::size_t image_h, std::size_t image_w) {
    if (explanation.rank() < 2) return std::nullopt;
    const std::size_t h = explanation.dim(0);
    const std::size_t w = explanation.dim(1);
    const std::size_t stride = explanation.size() / (h * w);
    double peak = 0.0;
    for (double v : explanation.data) peak = std::max(peak, v);
    if (!(peak > 0.0)) return std::nullopt;
    const double cut = 0.5 * peak;
    std::size_t r0 = h, c0 = w, r1 = 0, c1 = 0;
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            if (explanation.data[(r * w + c) * stride] >= cut) {
                r0 = std::min(r0, r);
                c0 = std::min(c0, c);
                r1 = std::max(r1, r + 1);
                c1 = std::max(c1, c + 1);
            }
        }
    }
    const double sy = static_cast<double>(image_h) / static_cast<double>(h);
    const double sx = static_cast<double>(image_w) / static_cast<double>(w);
    auto lo = [](std::size_t cell, double scale) { return static_cast<std::size_t>(std::floor(cell * scale)); };
    auto hi = [](std::size_t cell, double scale, std::size_t extent) {
        return std::min(extent, static_cast<std::size_t>(std::ceil(cell * scale)));
    };
    return PixelRect{lo(r0, sy), lo(c0, sx), hi(r1, sy, image_h), hi(c1, sx, image_w)};
}

CurationPlan plan(const BiasMarks& marks, const ClusterLabels& labels, const std::vector<std::string>& ids,
                  const DatasetManifest& manifest, Fill fill) {
    if (ids.size() != labels.labels.size()) {
        throw Error(ErrorCode::InvalidArgument, "plan: ids and labels are not aligned");
    }
    std::map<int, MarkAction> cluster_action;
    for (const auto& mk : marks.marks) {
        if (mk.cluster < 0 || mk.cluster >= labels.cluster_count) {
            throw Error(ErrorCode::UnknownCluster, "marks reference unknown cluster " + std::to_string(mk.cluster));
        }
        const auto [it, inserted] = cluster_action.emplace(mk.cluster, mk.action);
        if (!inserted && it->second != mk.action) {
            throw Error(ErrorCode::InvalidArgument, "conflicting actions for cluster " + std::to_string(mk.cluster));
        }
    }
    std::unordered_map<std::string, int> cluster_of;
    for (std::size_t i = 0; i < ids.size(); ++i) cluster_of.emplace(ids[i], labels.labels[i]);

    enum class Decision { Keep, Exclude, Mask };
    std::unordered_map<std::string, Decision> decision;
    for (const auto& s : manifest.samples) {
        Decision d = Decision::Keep;
        if (const auto it = cluster_of.find(s.id); it != cluster_of.end() && it->second != kNoise) {
            if (const auto act = cluster_action.find(it->second); act != cluster_action.end()) {
                d = act->second == MarkAction::Mask ? Decision::Mask : Decision::Exclude;
            }
        }
        decision[s.id] = d;
    }
    CurationPlan out;
    for (const auto& ov : marks.sample_overrides) {
        const auto it = decision.find(ov.id);
        if (it == decision.end()) {
            out.warnings.push_back("override for unknown sample '" + ov.id + "' ignored");
            continue;
        }
        it->second = ov.action == OverrideAction::Keep      ? Decision::Keep
                     : ov.action == OverrideAction::Exclude ? Decision::Exclude
                                                            : Decision::Mask;
    }

    for (const auto& s : manifest.samples) {
        const Decision d = decision[s.id];
        if (d == Decision::Exclude) {
            out.excluded.push_back(s.id);
        } else if (d == Decision::Mask) {
            if (!s.image) {
                out.warnings.push_back("sample '" + s.id + "' has no image; mask downgraded to exclude");
                out.excluded.push_back(s.id);
                continue;
            }
            std::optional<PixelRect> region;
            try {
                const auto info = png::read_info(manifest.root / *s.image);
                region = explanation_region(npy::read_tensor(manifest.root / s.explanation), info.height, info.width);
            } catch (const Error& e) {
                out.warnings.push_back("sample '" + s.id + "': " + e.what() + "; mask downgraded to exclude");
                out.excluded.push_back(s.id);
                continue;
            }
            if (!region) {
                out.warnings.push_back("sample '" + s.id + "' has an empty explanation; mask downgraded to exclude");
                out.excluded.push_back(s.id);
                continue;
            }
            out.mask_jobs.push_back({s.id, *region, fill});
        }
    }
    return out;
}

MaskResult mask_region(const Tensor& image, const PixelRect& region, Fill fill) {
    if (image.rank() < 2 || image.rank() > 3) {
        throw Error(ErrorCode::InvalidArgument, "mask_region: image must be H x W [x C]");
    }
    const std::size_t h = image.dim(0), w = image.dim(1);
    const std::size_t ch = image.rank() == 3 ? image.dim(2) : 1;
    MaskResult res{image, false};
    PixelRect r = region;
    if (r.row1 > h || r.col1 > w || r.row0 > h || r.col0 > w) res.clamped = true;
    r.row0 = std::min(r.row0, h);
    r.row1 = std::min(r.row1, h);
    r.col0 = std::min(r.col0, w);
    r.col1 = std::min(r.col1, w);
    if (r.area() == 0) return res;

    auto inside = [&](std::size_t y, std::size_t x) { return y >= r.row0 && y < r.row1 && x >= r.col0 && x < r.col1; };
    std::vector<double> value(ch, fill.value);
    if (fill.kind == Fill::Kind::Mean) {
        const std::size_t outside = h * w - r.area();
        if (outside == 0) {
            throw Error(ErrorCode::InvalidArgument, "mask_region: mean fill needs pixels outside the region");
        }
        std::vector<double> sum(ch, 0.0);
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                if (inside(y, x)) continue;
                for (std::size_t c = 0; c < ch; ++c) sum[c] += image.data[(y * w + x) * ch + c];
            }
        }
        for (std::size_t c = 0; c < ch; ++c) value[c] = sum[c] / static_cast<double>(outside);
    }
    if (image.dtype == DType::U8) {
        for (auto& v : value) v = std::clamp(std::round(v), 0.0, 255.0);
    }
    for (std::size_t y = r.row0; y < r.row1; ++y) {
        for (std::size_t x = r.col0; x < r.col1; ++x) {
            for (std::size_t c = 0; c < ch; ++c) res.image.data[(y * w + x) * ch + c] = value[c];
        }
    }
    return res;
}

ApplyResult apply(const CurationPlan& plan, const DatasetManifest& manifest, const std::filesystem::path& out_dir,
                  const Exec& exec) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (std::filesystem::equivalent(out_dir, manifest.root.empty() ? "." : manifest.root, ec)) {
        throw Error(ErrorCode::InvalidArgument, "curation output must differ from the source dataset directory");
    }
    const std::set<std::string> excluded(plan.excluded.begin(), plan.excluded.end());
    std::unordered_map<std::string, const MaskJob*> jobs;
    for (const auto& j : plan.mask_jobs) jobs.emplace(j.id, &j);

    std::vector<const SampleRecord*> kept;
    for (const auto& s : manifest.samples) {
        if (!excluded.count(s.id)) kept.push_back(&s);
    }
    std::vector<std::string> errors(kept.size());
    parallel_for(exec, static_cast<std::ptrdiff_t>(kept.size()), [&](std::ptrdiff_t ii) {
        const auto& s = *kept[static_cast<std::size_t>(ii)];
        auto& err = errors[static_cast<std::size_t>(ii)];
        try {
            std::vector<std::string> refs{s.features, s.explanation};
            if (s.image) refs.push_back(*s.image);
            for (const auto& rel : refs) {
                if (escapes_root(rel)) {
                    throw Error(ErrorCode::InvalidArgument, "path '" + rel + "' escapes the dataset root");
                }
            }
            for (std::size_t r = 0; r < 2; ++r) {
                const auto bytes = read_file_bytes(manifest.root / refs[r]);
                write_file(out_dir / refs[r], std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
            }
            if (s.image) {
                const auto job = jobs.find(s.id);
                if (job != jobs.end()) {
                    const auto masked = mask_region(png::read_image(manifest.root / *s.image), job->second->region,
                                                    job->second->fill);
                    png::write_image(masked.image, out_dir / *s.image);
                } else {
                    const auto bytes = read_file_bytes(manifest.root / *s.image);
                    write_file(out_dir / *s.image,
                               std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
                }
            }
        } catch (const std::exception& e) {
            err = s.id + ": " + e.what();
        }
    });

    ApplyResult res;
    res.manifest.version = manifest.version;
    res.manifest.root = out_dir;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (errors[i].empty()) {
            res.manifest.samples.push_back(*kept[i]);
        } else {
            res.errors.push_back(errors[i]);
        }
    }
    save_manifest(res.manifest, out_dir / plan.output_manifest);
    return res;
}

} // namespace soxai
