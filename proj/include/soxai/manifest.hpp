#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace soxai {

struct SampleRecord {
    std::string id;
    std::optional<std::string> image;
    std::string features;
    std::string explanation;
    std::string label;
    nlohmann::json meta = nlohmann::json::object();

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// Sample index of a dataset. Paths inside records are relative to `root`,
/// the directory holding the manifest file.
struct DatasetManifest {
    int version = 1;
    std::vector<SampleRecord> samples;
    std::filesystem::path root;

    friend bool operator==(const DatasetManifest& a, const DatasetManifest& b) {
        return a.version == b.version && a.samples == b.samples;
    }
};

enum class IssueKind {
    MissingFile,
    ParseError,
    DuplicateId,
    ChannelMismatch,
    BadFeatureShape,
    NotResizable,
    NegativeWeight,
    NonFinite,
};

std::string to_string(IssueKind kind);

struct Issue {
    IssueKind kind;
    std::string sample_id;
    std::string detail;
};

DatasetManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const DatasetManifest& m);

DatasetManifest parse_manifest(const std::string& text);
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);

/// One Issue per problem found; an empty result means the dataset can be fed
/// to the pipeline. Reads files but never modifies anything.
std::vector<Issue> validate_manifest(const DatasetManifest& m, const std::filesystem::path& root);

/// Keeps only samples with the given label, preserving order.
DatasetManifest filter_by_label(const DatasetManifest& m, const std::string& label);

} // namespace soxai
