#include "soxai/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "soxai/error.hpp"
#include "soxai/npy.hpp"

namespace soxai {

FeatureMap FeatureMap::from_tensor(const Tensor& t) {
    if (t.rank() != 3) {
        throw Error(ErrorCode::InvalidArgument, "feature map must be H x W x N");
    }
    return {t.dim(0), t.dim(1), t.dim(2), t.data};
}

ExplanationMap ExplanationMap::from_tensor(const Tensor& t) {
    if (!(t.rank() == 2 || (t.rank() == 3 && t.dim(2) == 1))) {
        throw Error(ErrorCode::InvalidArgument, "explanation must be H x W (or H x W x 1)");
    }
    for (double v : t.data) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw Error(ErrorCode::InvalidArgument, "explanation weights must be finite and non-negative");
        }
    }
    return {t.dim(0), t.dim(1), t.data};
}

Tensor ExplanationMap::to_tensor(DType dtype) const { return Tensor(dtype, {height, width}, weights); }

ExplanationMap resize_explanation(const ExplanationMap& a, std::size_t target_h, std::size_t target_w,
                                  ResizeMethod method) {
    if (target_h == 0 || target_w == 0) {
        throw Error(ErrorCode::InvalidArgument, "resize target must be at least 1x1");
    }
    if (a.height == target_h && a.width == target_w) {
        return a;
    }
    ExplanationMap out{target_h, target_w, std::vector<double>(target_h * target_w)};
    const double sy = static_cast<double>(a.height) / static_cast<double>(target_h);
    const double sx = static_cast<double>(a.width) / static_cast<double>(target_w);

    if (method == ResizeMethod::Nearest) {
        for (std::size_t y = 0; y < target_h; ++y) {
            const auto iy = std::min(a.height - 1, static_cast<std::size_t>((y + 0.5) * sy));
            for (std::size_t x = 0; x < target_w; ++x) {
                const auto ix = std::min(a.width - 1, static_cast<std::size_t>((x + 0.5) * sx));
                out.weights[y * target_w + x] = a.at(iy, ix);
            }
        }
        return out;
    }

    auto source_coord = [](std::size_t dst, double scale, std::size_t extent, std::size_t& lo, std::size_t& hi,
                           double& frac) {
        double src = (static_cast<double>(dst) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(extent - 1));
        lo = static_cast<std::size_t>(std::floor(src));
        hi = std::min(lo + 1, extent - 1);
        frac = src - static_cast<double>(lo);
    };
    for (std::size_t y = 0; y < target_h; ++y) {
        std::size_t y0, y1;
        double fy;
        source_coord(y, sy, a.height, y0, y1, fy);
        for (std::size_t x = 0; x < target_w; ++x) {
            std::size_t x0, x1;
            double fx;
            source_coord(x, sx, a.width, x0, x1, fx);
            const double top = a.at(y0, x0) * (1.0 - fx) + a.at(y0, x1) * fx;
            const double bottom = a.at(y1, x0) * (1.0 - fx) + a.at(y1, x1) * fx;
            // Convex combination of non-negative values; max() only guards -0.
            out.weights[y * target_w + x] = std::max(0.0, top * (1.0 - fy) + bottom * fy);
        }
    }
    return out;
}

Embedding embed(const FeatureMap& m, const ExplanationMap& a, const EmbedOptions& opts) {
    if (m.height == 0 || m.width == 0 || m.channels == 0) {
        throw Error(ErrorCode::InvalidArgument, "empty feature map");
    }
    const ExplanationMap weights = (a.height == m.height && a.width == m.width)
                                       ? a
                                       : resize_explanation(a, m.height, m.width, opts.resize);
    const std::size_t cells = m.height * m.width;
    const std::size_t n_ch = m.channels;

    Embedding e;
    e.values.assign(n_ch, 0.0);
    double mass = 0.0;
    for (std::size_t c = 0; c < cells; ++c) {
        mass += weights.weights[c];
    }
    e.mass = mass;

    if (mass > 0.0) {
        // Normalizing the weights first keeps one-hot maps exact.
        for (std::size_t c = 0; c < cells; ++c) {
            if (weights.weights[c] == 0.0) continue;
            const double w = weights.weights[c] / mass;
            const double* cell = m.values.data() + c * n_ch;
            for (std::size_t n = 0; n < n_ch; ++n) {
                e.values[n] += cell[n] * w;
            }
        }
        return e;
    }

    if (opts.zero_mass == ZeroMassPolicy::Skip) {
        throw Error(ErrorCode::ZeroMass, "explanation has zero total weight");
    }
    e.uniform_fallback = true;
    for (std::size_t c = 0; c < cells; ++c) {
        const double* cell = m.values.data() + c * n_ch;
        for (std::size_t n = 0; n < n_ch; ++n) {
            e.values[n] += cell[n];
        }
    }
    for (auto& v : e.values) v /= static_cast<double>(cells);
    return e;
}

EmbeddingMatrix embed_dataset(const DatasetManifest& manifest, const EmbedOptions& opts, const Exec& exec) {
    const auto count = manifest.samples.size();
    if (count == 0) {
        throw Error(ErrorCode::NoSamples, "no samples");
    }
    struct Slot {
        std::optional<Embedding> emb;
        std::string reason;
    };
    std::vector<Slot> slots(count);
    parallel_for(exec, static_cast<std::ptrdiff_t>(count), [&](std::ptrdiff_t i) {
        const auto& rec = manifest.samples[static_cast<std::size_t>(i)];
        auto& slot = slots[static_cast<std::size_t>(i)];
        try {
            const auto feat = FeatureMap::from_tensor(npy::read_tensor(manifest.root / rec.features));
            const auto expl = ExplanationMap::from_tensor(npy::read_tensor(manifest.root / rec.explanation));
            slot.emb = embed(feat, expl, opts);
            slot.emb->sample_id = rec.id;
        } catch (const Error& e) {
            slot.reason = e.code() == ErrorCode::ZeroMass ? "zero-mass" : e.what();
        } catch (const std::exception& e) {
            slot.reason = e.what();
        }
    });

    EmbeddingMatrix out;
    std::size_t channels = 0;
    for (std::size_t i = 0; i < count; ++i) {
        auto& slot = slots[i];
        const auto& id = manifest.samples[i].id;
        if (!slot.emb) {
            out.skipped.emplace_back(id, slot.reason);
            continue;
        }
        if (channels == 0) {
            channels = slot.emb->values.size();
        } else if (slot.emb->values.size() != channels) {
            out.skipped.emplace_back(id, "channel-mismatch");
            slot.emb.reset();
            continue;
        }
        out.ids.push_back(id);
        out.mass.push_back(slot.emb->mass);
        if (slot.emb->uniform_fallback) out.uniform_fallback.push_back(id);
    }
    if (out.ids.empty()) {
        throw Error(ErrorCode::NoSamples, "every sample failed to embed");
    }
    out.data = Matrix(out.ids.size(), channels);
    std::size_t row = 0;
    for (const auto& slot : slots) {
        if (!slot.emb) continue;
        std::copy(slot.emb->values.begin(), slot.emb->values.end(), out.data.row(row).begin());
        ++row;
    }
    return out;
}

} // namespace soxai
