#include "soxai/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <unordered_map>

#include "soxai/error.hpp"
#include "soxai/fileio.hpp"
#include "soxai/npy.hpp"
#include "soxai/png_io.hpp"

namespace soxai {

using nlohmann::json;

std::string_view cluster_color(int cluster) {
    if (cluster < 0) return kNoiseColor;
    return kClusterPalette[static_cast<std::size_t>(cluster) % kClusterPalette.size()];
}

PixelRect thumbnail_crop(std::size_t image_h, std::size_t image_w, const Tensor& explanation) {
    const std::size_t limit = std::min(image_h, image_w);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double v : explanation.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    auto square_at = [&](double cy, double cx, double side) {
        const auto s = static_cast<std::size_t>(std::clamp(std::round(side), 1.0, static_cast<double>(limit)));
        auto start = [&](double c, std::size_t extent) {
            const double raw = std::round(c - static_cast<double>(s) / 2.0);
            return static_cast<std::size_t>(std::clamp(raw, 0.0, static_cast<double>(extent - s)));
        };
        const std::size_t r0 = start(cy, image_h);
        const std::size_t c0 = start(cx, image_w);
        return PixelRect{r0, c0, r0 + s, c0 + s};
    };
    const auto box = hi > lo ? explanation_region(explanation, image_h, image_w) : std::nullopt;
    if (!box) {
        return square_at(image_h / 2.0, image_w / 2.0, static_cast<double>(limit));
    }
    const double bh = static_cast<double>(box->row1 - box->row0);
    const double bw = static_cast<double>(box->col1 - box->col0);
    return square_at((box->row0 + box->row1) / 2.0, (box->col0 + box->col1) / 2.0, std::max(bh, bw) * 1.2);
}

Tensor thumbnail(const Tensor& image, const Tensor& explanation, std::size_t size) {
    if (size < 8) {
        throw Error(ErrorCode::InvalidArgument, "thumbnail size must be >= 8");
    }
    if (image.rank() < 2 || image.rank() > 3) {
        throw Error(ErrorCode::InvalidArgument, "thumbnail: image must be H x W [x C]");
    }
    const std::size_t h = image.dim(0), w = image.dim(1);
    const std::size_t ch = image.rank() == 3 ? image.dim(2) : 1;
    const PixelRect crop = thumbnail_crop(h, w, explanation);
    const double ch_h = static_cast<double>(crop.row1 - crop.row0);
    const double ch_w = static_cast<double>(crop.col1 - crop.col0);

    Tensor out(DType::U8, {size, size, ch});
    auto px = [&](std::size_t y, std::size_t x, std::size_t c) { return image.data[(y * w + x) * ch + c]; };
    for (std::size_t y = 0; y < size; ++y) {
        double sy = crop.row0 + (y + 0.5) * ch_h / static_cast<double>(size) - 0.5;
        sy = std::clamp(sy, static_cast<double>(crop.row0), static_cast<double>(crop.row1 - 1));
        const auto y0 = static_cast<std::size_t>(std::floor(sy));
        const std::size_t y1 = std::min(y0 + 1, crop.row1 - 1);
        const double fy = sy - static_cast<double>(y0);
        for (std::size_t x = 0; x < size; ++x) {
            double sx = crop.col0 + (x + 0.5) * ch_w / static_cast<double>(size) - 0.5;
            sx = std::clamp(sx, static_cast<double>(crop.col0), static_cast<double>(crop.col1 - 1));
            const auto x0 = static_cast<std::size_t>(std::floor(sx));
            const std::size_t x1 = std::min(x0 + 1, crop.col1 - 1);
            const double fx = sx - static_cast<double>(x0);
            for (std::size_t c = 0; c < ch; ++c) {
                const double top = px(y0, x0, c) * (1 - fx) + px(y0, x1, c) * fx;
                const double bottom = px(y1, x0, c) * (1 - fx) + px(y1, x1, c) * fx;
                out.data[(y * size + x) * ch + c] = std::clamp(std::round(top * (1 - fy) + bottom * fy), 0.0, 255.0);
            }
        }
    }
    return out;
}

namespace {

constexpr double kPlotSize = 800.0;
constexpr double kMargin = 40.0;
constexpr double kLegendWidth = 200.0;
constexpr double kChipSize = 24.0;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape_xml(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

std::array<double, 4> bounds_of(const Matrix& coords) {
    std::array<double, 4> b{0, 0, 0, 0};
    if (coords.rows() == 0) return b;
    b = {coords(0, 0), coords(0, 1), coords(0, 0), coords(0, 1)};
    for (std::size_t i = 1; i < coords.rows(); ++i) {
        b[0] = std::min(b[0], coords(i, 0));
        b[1] = std::min(b[1], coords(i, 1));
        b[2] = std::max(b[2], coords(i, 0));
        b[3] = std::max(b[3], coords(i, 1));
    }
    return b;
}

std::string svg_document(const Matrix& coords, const std::vector<std::string>& ids, const ClusterLabels& labels,
                         const DatasetManifest& manifest, const std::map<std::string, std::string>& thumbs) {
    std::unordered_map<std::string, const SampleRecord*> by_id;
    for (const auto& s : manifest.samples) by_id.emplace(s.id, &s);

    const auto b = bounds_of(coords);
    const double span = std::max({b[2] - b[0], b[3] - b[1], 1e-12});
    const double scale = (kPlotSize - 2 * kMargin) / span;
    const double off_x = kMargin + ((kPlotSize - 2 * kMargin) - (b[2] - b[0]) * scale) / 2.0;
    const double off_y = kMargin + ((kPlotSize - 2 * kMargin) - (b[3] - b[1]) * scale) / 2.0;
    auto sx = [&](double x) { return off_x + (x - b[0]) * scale; };
    // SVG y grows downward; flip so the layout reads like a plot.
    auto sy = [&](double y) { return kPlotSize - (off_y + (y - b[1]) * scale); };

    const double total_w = kPlotSize + kLegendWidth;
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" xmlns:xlink=\"http://www.w3.org/1999/xlink\" width=\"" +
           fmt(total_w) + "\" height=\"" + fmt(kPlotSize) + "\" viewBox=\"0 0 " + fmt(total_w) + " " + fmt(kPlotSize) +
           "\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + fmt(total_w) + "\" height=\"" + fmt(kPlotSize) + "\" fill=\"#ffffff\"/>\n";
    svg += "<g id=\"points\">\n";
    for (std::size_t i = 0; i < coords.rows(); ++i) {
        const int c = labels.labels[i];
        const std::string color(cluster_color(c));
        const auto rec = by_id.find(ids[i]);
        const std::string label = rec != by_id.end() ? rec->second->label : std::string{};
        const std::string title = "<title>" + escape_xml(ids[i]) + " (" + escape_xml(label) + ", cluster " +
                                  std::to_string(c) + ")</title>";
        const double x = sx(coords(i, 0)), y = sy(coords(i, 1));
        const auto thumb = thumbs.find(ids[i]);
        if (thumb != thumbs.end()) {
            const double half = kChipSize / 2.0;
            svg += "<g class=\"chip\" data-cluster=\"" + std::to_string(c) + "\">" + title + "<image href=\"" +
                   escape_xml(thumb->second) + "\" x=\"" + fmt(x - half) + "\" y=\"" + fmt(y - half) + "\" width=\"" +
                   fmt(kChipSize) + "\" height=\"" + fmt(kChipSize) + "\"/><rect x=\"" + fmt(x - half) + "\" y=\"" +
                   fmt(y - half) + "\" width=\"" + fmt(kChipSize) + "\" height=\"" + fmt(kChipSize) +
                   "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"/></g>\n";
        } else {
            svg += "<circle cx=\"" + fmt(x) + "\" cy=\"" + fmt(y) + "\" r=\"3\" fill=\"" + color +
                   "\" data-cluster=\"" + std::to_string(c) + "\">" + title + "</circle>\n";
        }
    }
    svg += "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"13\">\n";
    std::map<int, std::size_t> counts;
    for (int c : labels.labels) ++counts[c];
    double ly = kMargin;
    auto legend_row = [&](int c, const std::string& text) {
        svg += "<circle cx=\"" + fmt(kPlotSize + 20) + "\" cy=\"" + fmt(ly) + "\" r=\"6\" fill=\"" +
               std::string(cluster_color(c)) + "\"/><text x=\"" + fmt(kPlotSize + 34) + "\" y=\"" + fmt(ly + 4) +
               "\">" + escape_xml(text) + "</text>\n";
        ly += 22;
    };
    for (const auto& [c, n] : counts) {
        if (c != kNoise) legend_row(c, "cluster " + std::to_string(c) + " (" + std::to_string(n) + ")");
    }
    if (const auto it = counts.find(kNoise); it != counts.end()) {
        legend_row(kNoise, "noise (" + std::to_string(it->second) + ")");
    }
    svg += "</g>\n</svg>\n";
    return svg;
}

} // namespace

std::string render_scatter(const Matrix& coords, const std::vector<std::string>& ids, const ClusterLabels& labels,
                           const DatasetManifest& manifest, ScatterFormat format,
                           const std::map<std::string, std::string>& thumbs) {
    if (coords.rows() != ids.size() || labels.labels.size() != ids.size() || (coords.rows() && coords.cols() != 2)) {
        throw Error(ErrorCode::InvalidArgument, "render_scatter: inputs are not row-aligned");
    }
    for (double v : coords.values()) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "render_scatter: non-finite coordinate");
    }
    const std::string svg = svg_document(coords, ids, labels, manifest, thumbs);
    if (format == ScatterFormat::Svg) return svg;

    // The scroll container is the script-free pan; the script adds wheel zoom.
    std::string html;
    html += "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n<title>Explanation groupings</title>\n";
    html += "<style>body{margin:0;font-family:sans-serif}#view{width:100vw;height:100vh;overflow:auto}"
            "#view svg{display:block}</style>\n</head>\n<body>\n<div id=\"view\">\n";
    html += svg;
    html += "</div>\n<script>\n"
            "(function(){var s=document.querySelector('#view svg');if(!s)return;"
            "var vb=s.viewBox.baseVal;"
            "s.addEventListener('wheel',function(e){e.preventDefault();"
            "var k=e.deltaY<0?0.9:1.1;var r=s.getBoundingClientRect();"
            "var px=vb.x+(e.clientX-r.left)/r.width*vb.width,py=vb.y+(e.clientY-r.top)/r.height*vb.height;"
            "vb.x=px-(px-vb.x)*k;vb.y=py-(py-vb.y)*k;vb.width*=k;vb.height*=k;},{passive:false});"
            "var drag=null;s.addEventListener('mousedown',function(e){drag=[e.clientX,e.clientY];});"
            "window.addEventListener('mouseup',function(){drag=null;});"
            "s.addEventListener('mousemove',function(e){if(!drag)return;var r=s.getBoundingClientRect();"
            "vb.x-=(e.clientX-drag[0])/r.width*vb.width;vb.y-=(e.clientY-drag[1])/r.height*vb.height;"
            "drag=[e.clientX,e.clientY];});})();\n"
            "</script>\n</body>\n</html>\n";
    return html;
}

json to_json(const ViewBundle& b) {
    json pts = json::array();
    for (const auto& p : b.points) {
        pts.push_back({{"id", p.id},
                       {"x", p.x},
                       {"y", p.y},
                       {"cluster", p.cluster},
                       {"label", p.label},
                       {"thumb", p.thumb ? json(*p.thumb) : json(nullptr)},
                       {"mass", p.mass}});
    }
    return {{"version", b.version}, {"points", pts}, {"clusters", b.clusters}, {"bounds", b.bounds}};
}

ViewBundle view_bundle_from_json(const json& j) {
    try {
        ViewBundle b;
        b.version = j.at("version").get<int>();
        if (b.version != 1) {
            throw Error(ErrorCode::UnknownSchemaVersion, "unknown bundle version " + std::to_string(b.version));
        }
        for (const auto& p : j.at("points")) {
            ViewPoint v;
            v.id = p.at("id").get<std::string>();
            v.x = p.at("x").get<double>();
            v.y = p.at("y").get<double>();
            v.cluster = p.at("cluster").get<int>();
            v.label = p.at("label").get<std::string>();
            if (!p.at("thumb").is_null()) v.thumb = p["thumb"].get<std::string>();
            v.mass = p.at("mass").get<double>();
            b.points.push_back(std::move(v));
        }
        b.clusters = j.at("clusters");
        b.bounds = j.at("bounds").get<std::array<double, 4>>();
        return b;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedJson, std::string("bundle: ") + e.what());
    }
}

ViewBundle export_view_bundle(const Matrix& coords, const std::vector<std::string>& ids, const ClusterLabels& labels,
                              const DatasetManifest& manifest, const std::vector<double>& mass,
                              const ClusterReport& report, const std::filesystem::path& out_dir, const Exec& exec) {
    const std::size_t n = ids.size();
    if (coords.rows() != n || labels.labels.size() != n || mass.size() != n) {
        throw Error(ErrorCode::InvalidArgument, "export_view_bundle: inputs are not row-aligned");
    }
    std::unordered_map<std::string, const SampleRecord*> by_id;
    for (const auto& s : manifest.samples) by_id.emplace(s.id, &s);

    ViewBundle b;
    b.points.resize(n);
    std::vector<std::string> errors(n);
    parallel_for(exec, static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t ii) {
        const auto i = static_cast<std::size_t>(ii);
        auto& p = b.points[i];
        p.id = ids[i];
        p.x = coords(i, 0);
        p.y = coords(i, 1);
        p.cluster = labels.labels[i];
        p.mass = mass[i];
        const auto rec = by_id.find(ids[i]);
        if (rec == by_id.end()) return;
        p.label = rec->second->label;
        if (!rec->second->image) return;
        try {
            char name[32];
            std::snprintf(name, sizeof name, "thumbs/t%06zu.png", i);
            const auto img = png::read_image(manifest.root / *rec->second->image);
            const auto expl = npy::read_tensor(manifest.root / rec->second->explanation);
            png::write_image(thumbnail(img, expl, kThumbSize), out_dir / name);
            p.thumb = name;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    b.clusters = to_json(report);
    b.bounds = bounds_of(coords);
    write_file(out_dir / "bundle.json", to_json(b).dump(1) + "\n");
    return b;
}

} // namespace soxai
