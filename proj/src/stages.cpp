#include "soxai/stages.hpp"

#include <cstdio>
#include <iostream>

#include "soxai/error.hpp"
#include "soxai/fileio.hpp"
#include "soxai/npy.hpp"
#include "soxai/pca.hpp"

namespace soxai::stages {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
    try {
        return json::parse(read_file_text(path));
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, path.string() + ": " + e.what());
    }
}

template <typename T>
T field(const json& j, const char* key, const fs::path& file) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw Error(ErrorCode::MalformedJson, file.string() + ": missing field '" + key + "'");
    }
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::MalformedJson, file.string() + ": field '" + key + "' has the wrong type");
    }
}

fs::path resolve(const fs::path& artifact, const std::string& rel) { return artifact.parent_path() / rel; }

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(1) + "\n"); }

const char* name(ZeroMassPolicy p) { return p == ZeroMassPolicy::Uniform ? "uniform" : "skip"; }
const char* name(ResizeMethod m) { return m == ResizeMethod::Nearest ? "nearest" : "bilinear"; }

std::map<std::string, std::string> existing_thumbs(const fs::path& dir, const std::vector<std::string>& ids) {
    std::map<std::string, std::string> thumbs;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        char rel[32];
        std::snprintf(rel, sizeof rel, "thumbs/t%06zu.png", i);
        if (fs::is_regular_file(dir / rel)) thumbs.emplace(ids[i], rel);
    }
    return thumbs;
}

} // namespace

bool is_blocking(const Issue& issue) {
    return issue.kind == IssueKind::DuplicateId || issue.kind == IssueKind::ChannelMismatch;
}

void log(const std::string& message) { std::cerr << "[soxai] " << message << "\n"; }

EmbeddingMatrix embed_stage(const fs::path& manifest_path, const fs::path& out_dir, const EmbedStageOptions& opts,
                            const Exec& exec) {
    auto manifest = load_manifest(manifest_path);
    if (opts.class_filter) {
        manifest = filter_by_label(manifest, *opts.class_filter);
        log("class filter '" + *opts.class_filter + "': " + std::to_string(manifest.samples.size()) + " samples");
    }
    std::size_t blocking = 0;
    for (const auto& issue : validate_manifest(manifest, manifest.root)) {
        log("validate: " + to_string(issue.kind) + " [" + issue.sample_id + "] " + issue.detail);
        if (is_blocking(issue)) ++blocking;
    }
    if (blocking) {
        throw Error(ErrorCode::InvalidArgument,
                    manifest_path.string() + ": " + std::to_string(blocking) + " blocking validation issue(s)");
    }
    auto m = embed_dataset(manifest, opts.embed, exec);

    fs::create_directories(out_dir);
    npy::write_tensor(Tensor(DType::F64, {m.data.rows(), m.data.cols()}, m.data.values()), out_dir / kEmbeddingsNpy);
    json skipped = json::array();
    for (const auto& [id, reason] : m.skipped) skipped.push_back({{"id", id}, {"reason", reason}});
    json doc = {{"ids", m.ids},
                {"mass", m.mass},
                {"skipped", skipped},
                {"uniform_fallback", m.uniform_fallback},
                {"config",
                 {{"manifest", relative_to(manifest_path, out_dir)},
                  {"zero_mass", name(opts.embed.zero_mass)},
                  {"resize", name(opts.embed.resize)},
                  {"class", opts.class_filter ? json(*opts.class_filter) : json(nullptr)}}}};
    write_json(out_dir / kEmbeddingsJson, doc);
    log("embed: " + std::to_string(m.ids.size()) + " rows x " + std::to_string(m.data.cols()) + " channels, " +
        std::to_string(m.skipped.size()) + " skipped");
    return m;
}

EmbeddingArtifact load_embeddings(const fs::path& npy_path) {
    const auto t = npy::read_tensor(npy_path);
    if (t.rank() != 2) {
        throw Error(ErrorCode::InvalidArgument, npy_path.string() + ": embedding matrix must be 2-D");
    }
    fs::path sidecar = npy_path;
    sidecar.replace_extension(".json");
    const auto doc = read_json(sidecar);
    EmbeddingArtifact art;
    art.matrix.data = Matrix(t.dim(0), t.dim(1), t.data);
    art.matrix.ids = field<std::vector<std::string>>(doc, "ids", sidecar);
    art.matrix.mass = field<std::vector<double>>(doc, "mass", sidecar);
    for (const auto& s : doc.value("skipped", json::array())) {
        art.matrix.skipped.emplace_back(s.at("id").get<std::string>(), s.at("reason").get<std::string>());
    }
    art.matrix.uniform_fallback = doc.value("uniform_fallback", std::vector<std::string>{});
    if (art.matrix.ids.size() != t.dim(0) || art.matrix.mass.size() != t.dim(0)) {
        throw Error(ErrorCode::InvalidArgument, sidecar.string() + ": ids/mass do not match the matrix rows");
    }
    art.manifest_path = resolve(sidecar, field<json>(doc, "config", sidecar).at("manifest").get<std::string>());
    return art;
}

Projection reduce_stage(const fs::path& embeddings_npy, const fs::path& out_dir, const ReduceStageOptions& opts,
                        const Exec& exec) {
    const auto art = load_embeddings(embeddings_npy);
    const Matrix& x = art.matrix.data;
    json pca_info = {{"input_dims", x.cols()}, {"requested_dims", opts.pca_dims}};
    Matrix reduced;
    if (opts.pca_dims == 0 || x.cols() <= opts.pca_dims) {
        pca_info["applied"] = false;
        reduced = x;
    } else {
        const auto model = fit_pca(x, opts.pca_dims, exec);
        reduced = pca_transform(model, x, exec);
        pca_info["applied"] = true;
        pca_info["dims"] = model.k;
        pca_info["clamped"] = model.clamped;
        pca_info["captured_variance"] = model.captured_variance();
    }
    log("reduce: PCA " + std::string(pca_info["applied"].get<bool>() ? "applied" : "skipped") + ", t-SNE on " +
        std::to_string(reduced.rows()) + " x " + std::to_string(reduced.cols()));
    auto proj = run_tsne(reduced, opts.tsne, exec);

    json coords = json::array();
    for (std::size_t i = 0; i < proj.coords.rows(); ++i) coords.push_back({proj.coords(i, 0), proj.coords(i, 1)});
    json cfg = proj.config.to_json();
    cfg["pca"] = pca_info;
    cfg["exact"] = proj.exact;
    cfg["jittered"] = proj.jittered;
    cfg["embeddings"] = relative_to(embeddings_npy, out_dir);
    cfg["manifest"] = relative_to(art.manifest_path, out_dir);
    json doc = {{"coords", coords}, {"ids", art.matrix.ids}, {"kl_trace", proj.kl_trace},
                {"kl_iters", proj.kl_iters}, {"config", cfg}};
    write_json(out_dir / kProjectionJson, doc);
    log("reduce: KL " + std::to_string(proj.kl_trace.front()) + " -> " + std::to_string(proj.kl_trace.back()));
    return proj;
}

ProjectionArtifact load_projection(const fs::path& path) {
    const auto doc = read_json(path);
    ProjectionArtifact art;
    art.ids = field<std::vector<std::string>>(doc, "ids", path);
    const auto coords = field<std::vector<std::vector<double>>>(doc, "coords", path);
    if (coords.size() != art.ids.size()) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": coords and ids differ in length");
    }
    art.projection.coords = Matrix(coords.size(), 2);
    for (std::size_t i = 0; i < coords.size(); ++i) {
        if (coords[i].size() != 2) {
            throw Error(ErrorCode::InvalidArgument, path.string() + ": coords[" + std::to_string(i) + "] is not [x, y]");
        }
        art.projection.coords(i, 0) = coords[i][0];
        art.projection.coords(i, 1) = coords[i][1];
    }
    art.projection.kl_trace = doc.value("kl_trace", std::vector<double>{});
    art.projection.kl_iters = doc.value("kl_iters", std::vector<int>{});
    const auto cfg = field<json>(doc, "config", path);
    art.projection.config = TsneConfig::from_json(cfg);
    art.projection.exact = cfg.value("exact", true);
    art.embeddings_path = resolve(path, cfg.at("embeddings").get<std::string>());
    art.manifest_path = resolve(path, cfg.at("manifest").get<std::string>());
    return art;
}

ClusterLabels cluster_stage(const fs::path& projection_json, const fs::path& out_dir, const ClusterStageOptions& opts,
                            const Exec& exec) {
    const auto proj = load_projection(projection_json);
    const auto emb = load_embeddings(proj.embeddings_path);
    const auto manifest = load_manifest(proj.manifest_path);
    const Matrix& coords = proj.projection.coords;

    json eps_info = json::object();
    double eps = 0.0;
    if (opts.eps) {
        eps = *opts.eps;
        eps_info = {{"source", "flag"}};
    } else {
        const auto est = estimate_eps(coords, opts.min_pts, exec);
        eps = est.eps;
        eps_info = {{"source", "k-distance-elbow"}, {"k", opts.min_pts}, {"knee", est.knee}, {"curve", est.k_distances}};
    }
    auto labels = dbscan(coords, eps, opts.min_pts, exec);
    const auto report = cluster_report(labels, coords, proj.ids, manifest, emb.matrix.mass);
    json doc = {{"labels", labels.labels},
                {"ids", proj.ids},
                {"eps", labels.eps},
                {"min_pts", labels.min_pts},
                {"cluster_count", labels.cluster_count},
                {"noise_count", report.noise_count},
                {"report", to_json(report)},
                {"config",
                 {{"eps_estimate", eps_info},
                  {"projection", relative_to(projection_json, out_dir)},
                  {"manifest", relative_to(proj.manifest_path, out_dir)}}}};
    write_json(out_dir / kClustersJson, doc);
    log("cluster: eps " + std::to_string(eps) + ", " + std::to_string(labels.cluster_count) + " clusters, " +
        std::to_string(report.noise_count) + " noise");
    return labels;
}

ClusterArtifact load_clusters(const fs::path& path) {
    const auto doc = read_json(path);
    ClusterArtifact art;
    art.labels.labels = field<std::vector<int>>(doc, "labels", path);
    art.ids = field<std::vector<std::string>>(doc, "ids", path);
    art.labels.eps = field<double>(doc, "eps", path);
    art.labels.min_pts = field<std::size_t>(doc, "min_pts", path);
    art.labels.cluster_count = doc.value("cluster_count", 0);
    for (int l : art.labels.labels) art.labels.cluster_count = std::max(art.labels.cluster_count, l + 1);
    if (art.ids.size() != art.labels.labels.size()) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": labels and ids differ in length");
    }
    const auto cfg = field<json>(doc, "config", path);
    art.projection_path = resolve(path, cfg.at("projection").get<std::string>());
    art.manifest_path = resolve(path, cfg.at("manifest").get<std::string>());
    return art;
}

namespace {

void check_alignment(const ProjectionArtifact& proj, const ClusterArtifact& clusters, const fs::path& clusters_json) {
    if (proj.ids != clusters.ids) {
        throw Error(ErrorCode::InvalidArgument, clusters_json.string() + ": ids do not match the projection");
    }
}

} // namespace

void render_stage(const fs::path& projection_json, const fs::path& clusters_json, const fs::path& out_file,
                  ScatterFormat format, bool with_thumbs) {
    const auto proj = load_projection(projection_json);
    const auto clusters = load_clusters(clusters_json);
    check_alignment(proj, clusters, clusters_json);
    const auto manifest = load_manifest(proj.manifest_path);
    const auto dir = out_file.has_parent_path() ? out_file.parent_path() : fs::path(".");
    const auto thumbs = with_thumbs ? existing_thumbs(dir, proj.ids) : std::map<std::string, std::string>{};
    write_file(out_file, render_scatter(proj.projection.coords, proj.ids, clusters.labels, manifest, format, thumbs));
    log("render: wrote " + out_file.string());
}

ViewBundle bundle_stage(const fs::path& projection_json, const fs::path& clusters_json, const fs::path& out_dir,
                        const Exec& exec) {
    const auto proj = load_projection(projection_json);
    const auto clusters = load_clusters(clusters_json);
    check_alignment(proj, clusters, clusters_json);
    const auto emb = load_embeddings(proj.embeddings_path);
    const auto manifest = load_manifest(proj.manifest_path);
    const auto report = cluster_report(clusters.labels, proj.projection.coords, proj.ids, manifest, emb.matrix.mass);
    auto bundle =
        export_view_bundle(proj.projection.coords, proj.ids, clusters.labels, manifest, emb.matrix.mass, report, out_dir, exec);
    log("bundle: " + std::to_string(bundle.points.size()) + " points");
    return bundle;
}

CurateResult curate_stage(const fs::path& marks_json, const fs::path& clusters_json,
                          const std::optional<fs::path>& manifest_override, const fs::path& out_dir, Fill fill,
                          const Exec& exec) {
    const auto marks = load_marks(marks_json);
    const auto clusters = load_clusters(clusters_json);
    const auto manifest = load_manifest(manifest_override ? *manifest_override : clusters.manifest_path);
    CurateResult res;
    res.plan = plan(marks, clusters.labels, clusters.ids, manifest, fill);
    for (const auto& w : res.plan.warnings) log("curate: warning: " + w);
    res.applied = apply(res.plan, manifest, out_dir, exec);
    for (const auto& e : res.applied.errors) log("curate: error: " + e);
    write_json(out_dir / kPlanJson, to_json(res.plan));
    log("curate: kept " + std::to_string(res.applied.manifest.samples.size()) + ", excluded " +
        std::to_string(res.plan.excluded.size()) + ", masked " + std::to_string(res.plan.mask_jobs.size()));
    return res;
}

void run_pipeline(const fs::path& manifest_path, const fs::path& out_dir, const PipelineOptions& opts,
                  const Exec& exec) {
    embed_stage(manifest_path, out_dir, opts.embed, exec);
    reduce_stage(out_dir / kEmbeddingsNpy, out_dir, opts.reduce, exec);
    cluster_stage(out_dir / kProjectionJson, out_dir, opts.cluster, exec);
    bundle_stage(out_dir / kProjectionJson, out_dir / kClustersJson, out_dir, exec);
    render_stage(out_dir / kProjectionJson, out_dir / kClustersJson, out_dir / kScatterSvg, ScatterFormat::Svg, true);
    if (opts.html) {
        render_stage(out_dir / kProjectionJson, out_dir / kClustersJson, out_dir / kScatterHtml, ScatterFormat::Html,
                     true);
    }
}

} // namespace soxai::stages
