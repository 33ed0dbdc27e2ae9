#include "soxai/manifest.hpp"

#include <cmath>
#include <set>

#include "soxai/error.hpp"
#include "soxai/fileio.hpp"
#include "soxai/npy.hpp"
#include "soxai/png_io.hpp"

namespace soxai {

using nlohmann::json;

std::string to_string(IssueKind kind) {
    switch (kind) {
    case IssueKind::MissingFile: return "missing-file";
    case IssueKind::ParseError: return "parse-error";
    case IssueKind::DuplicateId: return "duplicate-id";
    case IssueKind::ChannelMismatch: return "channel-mismatch";
    case IssueKind::BadFeatureShape: return "bad-feature-shape";
    case IssueKind::NotResizable: return "not-resizable";
    case IssueKind::NegativeWeight: return "negative-weight";
    case IssueKind::NonFinite: return "non-finite";
    }
    return "unknown";
}

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& why) {
    throw Error(ErrorCode::MalformedJson, "manifest " + where + ": " + why);
}

std::string required_string(const json& rec, const char* key, const std::string& where) {
    const auto it = rec.find(key);
    if (it == rec.end() || !it->is_string()) {
        schema_error(where, std::string("field '") + key + "' must be a string");
    }
    return it->get<std::string>();
}

} // namespace

DatasetManifest manifest_from_json(const json& j) {
    if (!j.is_object()) {
        schema_error("root", "expected an object");
    }
    const auto ver = j.find("version");
    if (ver == j.end() || !ver->is_number_integer()) {
        schema_error("root", "field 'version' must be an integer");
    }
    DatasetManifest m;
    m.version = ver->get<int>();
    if (m.version != 1) {
        throw Error(ErrorCode::UnknownSchemaVersion, "unknown manifest version " + std::to_string(m.version));
    }
    const auto samples = j.find("samples");
    if (samples == j.end() || !samples->is_array()) {
        schema_error("root", "field 'samples' must be an array");
    }
    for (std::size_t i = 0; i < samples->size(); ++i) {
        const auto& rec = (*samples)[i];
        const std::string where = "samples[" + std::to_string(i) + "]";
        if (!rec.is_object()) {
            schema_error(where, "expected an object");
        }
        SampleRecord s;
        s.id = required_string(rec, "id", where);
        s.features = required_string(rec, "features", where);
        s.explanation = required_string(rec, "explanation", where);
        s.label = required_string(rec, "label", where);
        if (const auto img = rec.find("image"); img != rec.end() && !img->is_null()) {
            if (!img->is_string()) {
                schema_error(where, "field 'image' must be a string or null");
            }
            s.image = img->get<std::string>();
        }
        if (const auto meta = rec.find("meta"); meta != rec.end()) {
            if (!meta->is_object()) {
                schema_error(where, "field 'meta' must be an object");
            }
            s.meta = *meta;
        }
        m.samples.push_back(std::move(s));
    }
    return m;
}

json manifest_to_json(const DatasetManifest& m) {
    json samples = json::array();
    for (const auto& s : m.samples) {
        samples.push_back({{"id", s.id},
                           {"image", s.image ? json(*s.image) : json(nullptr)},
                           {"features", s.features},
                           {"explanation", s.explanation},
                           {"label", s.label},
                           {"meta", s.meta}});
    }
    return {{"version", m.version}, {"samples", std::move(samples)}};
}

DatasetManifest parse_manifest(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, std::string("manifest is not valid JSON: ") + e.what());
    }
    return manifest_from_json(j);
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    DatasetManifest m;
    try {
        m = parse_manifest(read_file_text(path));
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
    m.root = path.parent_path();
    return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    write_file(path, manifest_to_json(m).dump(2) + "\n");
}

std::vector<Issue> validate_manifest(const DatasetManifest& m, const std::filesystem::path& root) {
    std::vector<Issue> issues;
    std::set<std::string> seen;
    std::optional<std::size_t> channels;
    std::string channels_from;

    auto load = [&](const SampleRecord& s, const std::string& rel, const char* what) -> std::optional<Tensor> {
        const auto path = root / rel;
        if (!std::filesystem::is_regular_file(path)) {
            issues.push_back({IssueKind::MissingFile, s.id, std::string(what) + " file not found: " + rel});
            return std::nullopt;
        }
        try {
            return npy::read_tensor(path);
        } catch (const Error& e) {
            issues.push_back({IssueKind::ParseError, s.id, e.what()});
            return std::nullopt;
        }
    };
    auto all_finite = [](const Tensor& t) {
        for (double v : t.data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    };

    for (const auto& s : m.samples) {
        if (!seen.insert(s.id).second) {
            issues.push_back({IssueKind::DuplicateId, s.id, "duplicate sample id"});
        }
        if (auto feat = load(s, s.features, "features")) {
            if (feat->rank() != 3) {
                issues.push_back({IssueKind::BadFeatureShape, s.id, "feature map must be H x W x N"});
            } else {
                if (!channels) {
                    channels = feat->dim(2);
                    channels_from = s.id;
                } else if (*channels != feat->dim(2)) {
                    issues.push_back({IssueKind::ChannelMismatch, s.id,
                                      "has " + std::to_string(feat->dim(2)) + " channels, sample '" + channels_from +
                                          "' has " + std::to_string(*channels)});
                }
            }
            if (!all_finite(*feat)) {
                issues.push_back({IssueKind::NonFinite, s.id, "feature map contains non-finite values"});
            }
        }
        if (auto expl = load(s, s.explanation, "explanation")) {
            const bool resizable = expl->rank() == 2 || (expl->rank() == 3 && expl->dim(2) == 1);
            if (!resizable) {
                issues.push_back({IssueKind::NotResizable, s.id, "explanation must be a 2-D weight grid"});
            }
            if (!all_finite(*expl)) {
                issues.push_back({IssueKind::NonFinite, s.id, "explanation contains non-finite values"});
            }
            for (double v : expl->data) {
                if (v < 0.0) {
                    issues.push_back({IssueKind::NegativeWeight, s.id, "explanation has negative weights"});
                    break;
                }
            }
        }
        if (s.image) {
            const auto path = root / *s.image;
            if (!std::filesystem::is_regular_file(path)) {
                issues.push_back({IssueKind::MissingFile, s.id, "image file not found: " + *s.image});
            } else {
                try {
                    (void)png::read_info(path);
                } catch (const Error& e) {
                    issues.push_back({IssueKind::ParseError, s.id, e.what()});
                }
            }
        }
    }
    return issues;
}

DatasetManifest filter_by_label(const DatasetManifest& m, const std::string& label) {
    DatasetManifest out;
    out.version = m.version;
    out.root = m.root;
    for (const auto& s : m.samples) {
        if (s.label == label) {
            out.samples.push_back(s);
        }
    }
    return out;
}

} // namespace soxai
