#include "stylebank/prototype.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace stylebank {

PrototypeEncoder make_prototype_encoder(int dim, int patch_size, int image_size, int channels,
                                        int vocab_size, uint64_t seed) {
    if (dim < 1 || patch_size < 1 || image_size % patch_size != 0)
        throw std::invalid_argument("prototype encoder: bad dimensions");
    PrototypeEncoder enc;
    enc.dim = dim;
    enc.hidden = dim;
    enc.patch_size = patch_size;
    enc.image_size = image_size;
    enc.channels = channels;
    enc.vocab_size = vocab_size;
    enc.seed = seed;

    std::mt19937_64 rng(seed);
    const int pdim = patch_size * patch_size * channels;
    enc.img_w = Mat(pdim, enc.hidden);
    fill_normal(enc.img_w, rng, 1.0 / std::sqrt(static_cast<double>(pdim)));
    enc.img_b = Mat(1, enc.hidden);
    fill_normal(enc.img_b, rng, 0.1);
    enc.img_proj = Mat(2 * enc.hidden, dim);
    fill_normal(enc.img_proj, rng, 1.0 / std::sqrt(2.0 * enc.hidden));
    enc.txt_embed = Mat(vocab_size, enc.hidden);
    fill_normal(enc.txt_embed, rng, 1.0);
    enc.txt_proj = Mat(enc.hidden, dim);
    fill_normal(enc.txt_proj, rng, 1.0 / std::sqrt(static_cast<double>(enc.hidden)));
    return enc;
}

Digest PrototypeEncoder::content_hash() const {
    Sha256 h;
    for (const Mat* m : {&img_w, &img_b, &img_proj, &txt_embed, &txt_proj})
        h.update_f32(m->v.data(), m->v.size());
    return h.finish();
}

namespace {

std::vector<double> embed_image(const SynthImage& im, const PrototypeEncoder& enc) {
    if (im.height != enc.image_size || im.width != enc.image_size || im.channels != enc.channels)
        throw std::invalid_argument("embed_style_sample: image dimensions mismatch encoder");
    if (im.pixels.empty()) throw std::invalid_argument("embed_style_sample: empty payload");
    const int p = enc.patch_size;
    const int grid = enc.image_size / p;
    const int n_patches = grid * grid;
    const int pdim = p * p * enc.channels;

    // Patch-level linear features.
    Mat feats(n_patches, enc.hidden);
    std::vector<double> patch(pdim);
    for (int py = 0; py < grid; ++py) {
        for (int px = 0; px < grid; ++px) {
            int k = 0;
            for (int y = 0; y < p; ++y)
                for (int x = 0; x < p; ++x)
                    for (int c = 0; c < enc.channels; ++c)
                        patch[k++] = im.px(py * p + y, px * p + x, c);
            const int row = py * grid + px;
            for (int j = 0; j < enc.hidden; ++j) {
                double s = enc.img_b(0, j);
                for (int i = 0; i < pdim; ++i) s += patch[i] * enc.img_w(i, j);
                feats(row, j) = s;
            }
        }
    }

    // Feature statistics over patches: mean and population standard deviation.
    std::vector<double> stats(2 * enc.hidden, 0.0);
    for (int j = 0; j < enc.hidden; ++j) {
        double mu = 0.0;
        for (int r = 0; r < n_patches; ++r) mu += feats(r, j);
        mu /= n_patches;
        double var = 0.0;
        for (int r = 0; r < n_patches; ++r) {
            const double d = feats(r, j) - mu;
            var += d * d;
        }
        var /= n_patches;
        stats[j] = mu;
        stats[enc.hidden + j] = std::sqrt(var);
    }

    std::vector<double> out(enc.dim, 0.0);
    for (int j = 0; j < enc.dim; ++j) {
        double s = 0.0;
        for (int i = 0; i < 2 * enc.hidden; ++i) s += stats[i] * enc.img_proj(i, j);
        out[j] = s;
    }
    return out;
}

std::vector<double> embed_text(const SynthText& t, const PrototypeEncoder& enc) {
    std::vector<double> mean(enc.hidden, 0.0);
    int count = 0;
    for (uint32_t id : t.tokens) {
        if (id == 0) continue;  // pad
        if (static_cast<int>(id) >= enc.vocab_size)
            throw std::invalid_argument("embed_style_sample: token id out of vocabulary");
        for (int j = 0; j < enc.hidden; ++j) mean[j] += enc.txt_embed(static_cast<int>(id), j);
        ++count;
    }
    if (count == 0) throw std::invalid_argument("embed_style_sample: empty payload (all-pad text)");
    for (double& x : mean) x /= count;
    std::vector<double> out(enc.dim, 0.0);
    for (int j = 0; j < enc.dim; ++j) {
        double s = 0.0;
        for (int i = 0; i < enc.hidden; ++i) s += mean[i] * enc.txt_proj(i, j);
        out[j] = s;
    }
    return out;
}

}  // namespace

std::vector<double> embed_style_sample(const QuerySample& sample, const PrototypeEncoder& enc) {
    std::vector<double> v = sample.modality == Modality::image ? embed_image(sample.image, enc)
                                                               : embed_text(sample.text, enc);
    for (double x : v)
        if (!std::isfinite(x)) throw std::runtime_error("embed_style_sample: non-finite feature");
    return v;
}

StylePrototype compute_prototype(const std::vector<std::vector<double>>& features, StyleTag style) {
    if (features.empty()) throw std::invalid_argument("compute_prototype: empty feature list");
    const size_t d = features.front().size();
    std::vector<double> mean(d, 0.0);
    for (const auto& f : features) {
        if (f.size() != d) throw std::invalid_argument("compute_prototype: dimension mismatch");
        for (size_t i = 0; i < d; ++i) mean[i] += f[i];
    }
    for (double& x : mean) x /= static_cast<double>(features.size());
    if (l2_norm(mean) < 1e-9)
        throw std::runtime_error("compute_prototype: degenerate prototype (near-zero mean)");
    l2_normalize(mean);
    StylePrototype p;
    p.style = style;
    p.vector = std::move(mean);
    p.m = static_cast<int>(features.size());
    return p;
}

std::vector<double> query_prototype(const QuerySample& query, const PrototypeEncoder& enc) {
    return compute_prototype({embed_style_sample(query, enc)}, query.style).vector;
}

}  // namespace stylebank
