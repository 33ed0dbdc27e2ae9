#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "soxai/error.hpp"
#include "soxai/manifest.hpp"
#include "soxai/stages.hpp"
#include "soxai/synth.hpp"

namespace fs = std::filesystem;
using namespace soxai;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Common {
    int threads = 0;
};

int resolve_threads(int flag) {
    if (flag > 0) return flag;
    if (const char* env = std::getenv("SOXAI_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
        }
        throw CLI::ValidationError("SOXAI_THREADS", std::string("expected a positive integer, got '") + env + "'");
    }
    return Exec::all().threads;
}

void add_threads(CLI::App* sub, Common& common) {
    sub->add_option("--threads", common.threads, "Worker threads (default: SOXAI_THREADS or all cores)")
        ->check(CLI::PositiveNumber);
}

void add_embed_flags(CLI::App* sub, stages::EmbedStageOptions& o) {
    static const std::map<std::string, ZeroMassPolicy> zero_mass{{"skip", ZeroMassPolicy::Skip},
                                                                 {"uniform", ZeroMassPolicy::Uniform}};
    static const std::map<std::string, ResizeMethod> resize{{"bilinear", ResizeMethod::Bilinear},
                                                            {"nearest", ResizeMethod::Nearest}};
    sub->add_option("--zero-mass", o.embed.zero_mass, "Zero-mass explanation policy")
        ->transform(CLI::CheckedTransformer(zero_mass, CLI::ignore_case));
    sub->add_option("--resize", o.embed.resize, "Explanation resize method")
        ->transform(CLI::CheckedTransformer(resize, CLI::ignore_case));
    sub->add_option("--class", o.class_filter, "Only embed samples with this label");
}

void add_reduce_flags(CLI::App* sub, stages::ReduceStageOptions& o) {
    static const std::map<std::string, TsneInit> init{{"random-gaussian", TsneInit::RandomGaussian},
                                                      {"pca-2d", TsneInit::Pca2d}};
    static const std::map<std::string, TsneMethod> method{
        {"auto", TsneMethod::Auto}, {"exact", TsneMethod::Exact}, {"barnes-hut", TsneMethod::BarnesHut}};
    sub->add_option("--pca-dims", o.pca_dims, "PCA dimensions before t-SNE (0 disables)")->capture_default_str();
    sub->add_option("--perplexity", o.tsne.perplexity, "t-SNE perplexity")->capture_default_str();
    sub->add_option("--theta", o.tsne.theta, "Barnes-Hut accuracy (0 = exact)")->capture_default_str();
    sub->add_option("--iters", o.tsne.max_iter, "t-SNE iterations")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--learning-rate", o.tsne.learning_rate, "t-SNE step size")->capture_default_str();
    sub->add_option("--exaggeration", o.tsne.exaggeration, "Early exaggeration factor")->capture_default_str();
    sub->add_option("--exaggeration-iters", o.tsne.exaggeration_iters, "Early exaggeration duration")
        ->capture_default_str();
    sub->add_option("--seed", o.tsne.seed, "t-SNE seed")->capture_default_str();
    sub->add_option("--init", o.tsne.init, "Initialisation")->transform(CLI::CheckedTransformer(init));
    sub->add_option("--method", o.tsne.method, "Gradient method")->transform(CLI::CheckedTransformer(method));
}

void add_cluster_flags(CLI::App* sub, stages::ClusterStageOptions& o) {
    sub->add_option("--eps", o.eps, "DBSCAN radius (default: k-distance elbow)")->check(CLI::PositiveNumber);
    sub->add_option("--min-pts", o.min_pts, "DBSCAN min points, self included")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{2}, std::size_t{1000000}));
}

int run_validate(const fs::path& manifest_path) {
    const auto manifest = load_manifest(manifest_path);
    const auto issues = validate_manifest(manifest, manifest.root);
    for (const auto& issue : issues) {
        std::cout << to_string(issue.kind) << "\t" << issue.sample_id << "\t" << issue.detail << "\n";
    }
    std::cout << manifest.samples.size() << " samples, " << issues.size() << " issue(s)\n";
    return issues.empty() ? kExitOk : kExitFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"soxai: dataset-level grouping of explanation embeddings"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file with default flag values (flags override it)");
    app.set_version_flag("--version", "soxai 0.1.0");
    Common common;

    // synth
    SynthConfig synth_cfg;
    fs::path synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset with planted concepts");
    synth->add_option("--concepts", synth_cfg.concepts, "Number of concepts")->capture_default_str();
    synth->add_option("--per", synth_cfg.samples_per_concept, "Samples per concept")->capture_default_str();
    synth->add_option("--channels", synth_cfg.channels, "Feature channels")->capture_default_str();
    synth->add_option("--grid", synth_cfg.grid, "Feature map side")->capture_default_str();
    synth->add_option("--noise", synth_cfg.noise_sigma, "Feature noise sigma")->capture_default_str();
    synth->add_option("--amp", synth_cfg.signal_amp, "Signal amplitude")->capture_default_str();
    synth->add_option("--bias", synth_cfg.bias_fraction, "Fraction of biased samples per concept")
        ->capture_default_str();
    synth->add_option("--mask-noise", synth_cfg.mask_noise, "Explanation flip probability")->capture_default_str();
    synth->add_option("--pixels-per-cell", synth_cfg.pixels_per_cell, "Image pixels per feature cell")
        ->capture_default_str();
    synth->add_option("--seed", synth_cfg.seed, "Seed")->capture_default_str();
    synth->add_option("-o,--out", synth_out, "Output directory")->required();

    // validate
    fs::path validate_manifest_path;
    auto* validate = app.add_subcommand("validate", "Check a manifest and its referenced files");
    validate->add_option("manifest", validate_manifest_path, "manifest.json")->required();

    // embed
    stages::EmbedStageOptions embed_opts;
    fs::path embed_manifest, embed_out;
    auto* embed = app.add_subcommand("embed", "Compute explanation-weighted embeddings");
    embed->add_option("manifest", embed_manifest, "manifest.json")->required()->check(CLI::ExistingFile);
    embed->add_option("-o,--out", embed_out, "Output directory")->required();
    add_embed_flags(embed, embed_opts);
    add_threads(embed, common);

    // reduce
    stages::ReduceStageOptions reduce_opts;
    fs::path reduce_in, reduce_out;
    auto* reduce = app.add_subcommand("reduce", "PCA then t-SNE to 2-D");
    reduce->add_option("embeddings", reduce_in, "embeddings.npy")->required()->check(CLI::ExistingFile);
    reduce->add_option("-o,--out", reduce_out, "Output directory")->required();
    add_reduce_flags(reduce, reduce_opts);
    add_threads(reduce, common);

    // cluster
    stages::ClusterStageOptions cluster_opts;
    fs::path cluster_in, cluster_out;
    auto* cluster = app.add_subcommand("cluster", "DBSCAN on the 2-D projection");
    cluster->add_option("projection", cluster_in, "projection.json")->required()->check(CLI::ExistingFile);
    cluster->add_option("-o,--out", cluster_out, "Output directory")->required();
    add_cluster_flags(cluster, cluster_opts);
    add_threads(cluster, common);

    // render
    fs::path render_proj, render_clusters, render_out;
    bool render_html = false, render_thumbs = false;
    auto* render = app.add_subcommand("render", "Write the scatter plot");
    render->add_option("projection", render_proj, "projection.json")->required()->check(CLI::ExistingFile);
    render->add_option("clusters", render_clusters, "clusters.json")->required()->check(CLI::ExistingFile);
    render->add_option("-o,--out", render_out, "Output file (.svg or .html)")->required();
    render->add_flag("--html", render_html, "Interactive HTML (also implied by a .html extension)");
    render->add_flag("--thumbs", render_thumbs, "Use thumbs/ next to the output when present");

    // bundle
    fs::path bundle_proj, bundle_clusters, bundle_out;
    auto* bundle = app.add_subcommand("bundle", "Write bundle.json and thumbnails for the viewer");
    bundle->add_option("projection", bundle_proj, "projection.json")->required()->check(CLI::ExistingFile);
    bundle->add_option("clusters", bundle_clusters, "clusters.json")->required()->check(CLI::ExistingFile);
    bundle->add_option("-o,--out", bundle_out, "Output directory")->required();
    add_threads(bundle, common);

    // curate
    fs::path curate_marks, curate_labels, curate_out;
    std::optional<fs::path> curate_manifest;
    std::optional<double> curate_fill;
    auto* curate = app.add_subcommand("curate", "Turn bias marks into a cleaned dataset");
    curate->add_option("--marks", curate_marks, "marks.json")->required()->check(CLI::ExistingFile);
    curate->add_option("--labels", curate_labels, "clusters.json")->required()->check(CLI::ExistingFile);
    curate->add_option("--manifest", curate_manifest, "Source manifest (default: the one clusters.json points to)");
    curate->add_option("--fill", curate_fill, "Constant mask fill (default: mean of unmasked pixels)");
    curate->add_option("-o,--out", curate_out, "Output directory")->required();
    add_threads(curate, common);

    // pipeline
    stages::PipelineOptions pipe_opts;
    fs::path pipe_manifest, pipe_out;
    bool pipe_no_html = false;
    auto* pipeline = app.add_subcommand("pipeline", "embed -> reduce -> cluster -> bundle -> render");
    pipeline->add_option("manifest", pipe_manifest, "manifest.json")->required()->check(CLI::ExistingFile);
    pipeline->add_option("-o,--out", pipe_out, "Output directory")->required();
    add_embed_flags(pipeline, pipe_opts.embed);
    add_reduce_flags(pipeline, pipe_opts.reduce);
    add_cluster_flags(pipeline, pipe_opts.cluster);
    pipeline->add_flag("--no-html", pipe_no_html, "Skip scatter.html");
    add_threads(pipeline, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        const Exec exec{resolve_threads(common.threads)};
        if (*synth) {
            const auto ds = generate(synth_cfg, synth_out);
            stages::log("synth: " + std::to_string(ds.manifest.samples.size()) + " samples in " + synth_out.string());
        } else if (*validate) {
            return run_validate(validate_manifest_path);
        } else if (*embed) {
            stages::embed_stage(embed_manifest, embed_out, embed_opts, exec);
        } else if (*reduce) {
            stages::reduce_stage(reduce_in, reduce_out, reduce_opts, exec);
        } else if (*cluster) {
            stages::cluster_stage(cluster_in, cluster_out, cluster_opts, exec);
        } else if (*render) {
            const bool html = render_html || render_out.extension() == ".html";
            stages::render_stage(render_proj, render_clusters, render_out,
                                 html ? ScatterFormat::Html : ScatterFormat::Svg, render_thumbs);
        } else if (*bundle) {
            stages::bundle_stage(bundle_proj, bundle_clusters, bundle_out, exec);
        } else if (*curate) {
            const Fill fill = curate_fill ? Fill::constant(*curate_fill) : Fill::mean();
            const auto res = stages::curate_stage(curate_marks, curate_labels, curate_manifest, curate_out, fill, exec);
            if (!res.applied.errors.empty()) return kExitFailure;
        } else if (*pipeline) {
            pipe_opts.html = !pipe_no_html;
            stages::run_pipeline(pipe_manifest, pipe_out, pipe_opts, exec);
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "soxai: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "soxai: error (" << to_string(e.code()) << "): " << e.what() << "\n";
        return kExitFailure;
    } catch (const std::exception& e) {
        std::cerr << "soxai: error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitOk;
}
