#include "stylebank/encoder.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include "stylebank/io.hpp"

namespace stylebank {

namespace {
constexpr char kBackboneMagic[4] = {'U', 'B', 'K', 'B'};
constexpr uint32_t kBackboneVersion = 1;
}  // namespace

void BackboneConfig::validate() const {
    if (layers < 1 || d < 1 || heads < 1 || mlp_ratio < 1)
        throw std::invalid_argument("backbone config: non-positive dimension");
    if (d % heads != 0) throw std::invalid_argument("backbone config: d must be divisible by heads");
    if (image_size % patch_size != 0)
        throw std::invalid_argument("backbone config: image_size must be divisible by patch_size");
    if (vocab_size < 2 || max_text_len < 1)
        throw std::invalid_argument("backbone config: bad text dimensions");
}

std::vector<Mat*> Backbone::params() {
    std::vector<Mat*> out = {&patch_w, &patch_b, &tok_embed, &pos_img, &pos_txt, &cls};
    for (LayerParams& l : layers) {
        out.push_back(&l.ln1_g);
        out.push_back(&l.ln1_b);
        out.push_back(&l.wq);
        out.push_back(&l.bq);
        out.push_back(&l.wk);
        out.push_back(&l.bk);
        out.push_back(&l.wv);
        out.push_back(&l.bv);
        out.push_back(&l.wo);
        out.push_back(&l.bo);
        out.push_back(&l.ln2_g);
        out.push_back(&l.ln2_b);
        out.push_back(&l.w1);
        out.push_back(&l.b1);
        out.push_back(&l.w2);
        out.push_back(&l.b2);
    }
    out.push_back(&lnf_g);
    out.push_back(&lnf_b);
    return out;
}

std::vector<const Mat*> Backbone::params() const {
    auto mutable_this = const_cast<Backbone*>(this);
    std::vector<Mat*> mut = mutable_this->params();
    return std::vector<const Mat*>(mut.begin(), mut.end());
}

size_t Backbone::total_scalars() const {
    size_t n = 0;
    for (const Mat* m : params()) n += m->size();
    return n;
}

Digest Backbone::content_hash() const {
    Sha256 h;
    for (const Mat* m : params()) h.update_f32(m->v.data(), m->v.size());
    return h.finish();
}

Backbone make_backbone(const BackboneConfig& cfg) {
    cfg.validate();
    Backbone b;
    b.cfg = cfg;
    std::mt19937_64 rng(cfg.seed);
    const int pdim = cfg.patch_size * cfg.patch_size * 3;

    b.patch_w = Mat(pdim, cfg.d);
    fill_normal(b.patch_w, rng, 1.0 / std::sqrt(static_cast<double>(pdim)));
    b.patch_b = Mat(1, cfg.d);
    b.tok_embed = Mat(cfg.vocab_size, cfg.d);
    fill_normal(b.tok_embed, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d)));
    b.pos_img = Mat(cfg.n_patches(), cfg.d);
    fill_normal(b.pos_img, rng, 0.1);
    b.pos_txt = Mat(cfg.max_text_len, cfg.d);
    fill_normal(b.pos_txt, rng, 0.1);
    b.cls = Mat(1, cfg.d);
    fill_normal(b.cls, rng, 0.1);

    b.layers.resize(cfg.layers);
    const int m = cfg.d * cfg.mlp_ratio;
    for (LayerParams& l : b.layers) {
        l.ln1_g = Mat(1, cfg.d);
        fill_const(l.ln1_g, 1.0);
        l.ln1_b = Mat(1, cfg.d);
        l.wq = Mat(cfg.d, cfg.d);
        fill_normal(l.wq, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d)));
        l.bq = Mat(1, cfg.d);
        l.wk = Mat(cfg.d, cfg.d);
        fill_normal(l.wk, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d)));
        l.bk = Mat(1, cfg.d);
        l.wv = Mat(cfg.d, cfg.d);
        fill_normal(l.wv, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d)));
        l.bv = Mat(1, cfg.d);
        l.wo = Mat(cfg.d, cfg.d);
        fill_normal(l.wo, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d)));
        l.bo = Mat(1, cfg.d);
        l.ln2_g = Mat(1, cfg.d);
        fill_const(l.ln2_g, 1.0);
        l.ln2_b = Mat(1, cfg.d);
        l.w1 = Mat(cfg.d, m);
        fill_normal(l.w1, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d)));
        l.b1 = Mat(1, m);
        l.w2 = Mat(m, cfg.d);
        fill_normal(l.w2, rng, 1.0 / std::sqrt(static_cast<double>(m)));
        l.b2 = Mat(1, cfg.d);
    }
    b.lnf_g = Mat(1, cfg.d);
    fill_const(b.lnf_g, 1.0);
    b.lnf_b = Mat(1, cfg.d);
    return b;
}

void save_backbone(const Backbone& backbone, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_bytes(out, kBackboneMagic, 4);
    write_u32(out, kBackboneVersion);
    const BackboneConfig& c = backbone.cfg;
    write_u32(out, static_cast<uint32_t>(c.layers));
    write_u32(out, static_cast<uint32_t>(c.d));
    write_u32(out, static_cast<uint32_t>(c.heads));
    write_u32(out, static_cast<uint32_t>(c.mlp_ratio));
    write_u32(out, static_cast<uint32_t>(c.patch_size));
    write_u32(out, static_cast<uint32_t>(c.image_size));
    write_u32(out, static_cast<uint32_t>(c.vocab_size));
    write_u32(out, static_cast<uint32_t>(c.max_text_len));
    write_u64(out, c.seed);
    for (const Mat* m : backbone.params())
        for (double x : m->v) write_f32(out, x);
    if (!out) throw std::runtime_error("save_backbone: write failed for " + path.string());
}

Backbone load_backbone(const std::filesystem::path& path) {
    auto in = open_input(path);
    char magic[4];
    read_bytes(in, magic, 4);
    if (std::memcmp(magic, kBackboneMagic, 4) != 0)
        throw std::runtime_error("load_backbone: bad magic in " + path.string());
    const uint32_t version = read_u32(in);
    if (version != kBackboneVersion)
        throw std::runtime_error("load_backbone: unsupported version " + std::to_string(version));
    BackboneConfig c;
    c.layers = static_cast<int>(read_u32(in));
    c.d = static_cast<int>(read_u32(in));
    c.heads = static_cast<int>(read_u32(in));
    c.mlp_ratio = static_cast<int>(read_u32(in));
    c.patch_size = static_cast<int>(read_u32(in));
    c.image_size = static_cast<int>(read_u32(in));
    c.vocab_size = static_cast<int>(read_u32(in));
    c.max_text_len = static_cast<int>(read_u32(in));
    c.seed = read_u64(in);
    c.validate();
    Backbone b = make_backbone(c);

    uint64_t payload = 0;
    for (const Mat* m : b.params()) payload += 4ull * m->size();
    const auto header_end = in.tellg();
    in.seekg(0, std::ios::end);
    const uint64_t available = static_cast<uint64_t>(in.tellg() - header_end);
    in.seekg(header_end);
    if (available < payload)
        throw std::runtime_error("load_backbone: truncated file, missing " +
                                 std::to_string(payload - available) + " bytes");
    for (Mat* m : b.params())
        for (double& x : m->v) x = read_f32(in);
    b.frozen = true;
    return b;
}

Mat patch_embed(const Backbone& backbone, const SynthImage& image) {
    const BackboneConfig& c = backbone.cfg;
    if (image.height != c.image_size || image.width != c.image_size || image.channels != 3)
        throw std::invalid_argument("patch_embed: image shape mismatch");
    const int p = c.patch_size;
    const int grid = c.image_size / p;
    const int pdim = p * p * 3;
    Mat out(c.n_patches(), c.d);
    std::vector<double> patch(pdim);
    for (int py = 0; py < grid; ++py) {
        for (int px = 0; px < grid; ++px) {
            int k = 0;
            for (int y = 0; y < p; ++y)
                for (int x = 0; x < p; ++x)
                    for (int ch = 0; ch < 3; ++ch) patch[k++] = image.px(py * p + y, px * p + x, ch);
            const int row = py * grid + px;
            for (int j = 0; j < c.d; ++j) {
                double s = backbone.patch_b(0, j) + backbone.pos_img(row, j);
                for (int i = 0; i < pdim; ++i) s += patch[i] * backbone.patch_w(i, j);
                out(row, j) = s;
            }
        }
    }
    return out;
}

Mat tokenize_text(const Backbone& backbone, const SynthText& text,
                  std::vector<uint8_t>* key_mask_out) {
    const BackboneConfig& c = backbone.cfg;
    if (static_cast<int>(text.tokens.size()) != c.max_text_len)
        throw std::invalid_argument("tokenize_text: sequence length mismatch");
    Mat out(c.max_text_len, c.d);
    if (key_mask_out) key_mask_out->assign(c.max_text_len, 0);
    for (int t = 0; t < c.max_text_len; ++t) {
        const uint32_t id = text.tokens[t];
        if (static_cast<int>(id) >= c.vocab_size)
            throw std::invalid_argument("tokenize_text: token id out of vocabulary");
        for (int j = 0; j < c.d; ++j) out(t, j) = backbone.tok_embed(static_cast<int>(id), j) + backbone.pos_txt(t, j);
        if (key_mask_out && id != 0) (*key_mask_out)[t] = 1;
    }
    return out;
}

BackboneLeaves add_backbone_leaves(Graph& g, const Backbone& backbone, bool trainable) {
    BackboneLeaves bl;
    auto push = [&](const Mat& m) {
        const Graph::Id id = g.leaf(m, trainable);
        bl.all.push_back(id);
        return id;
    };
    bl.patch_w = push(backbone.patch_w);
    bl.patch_b = push(backbone.patch_b);
    bl.tok_embed = push(backbone.tok_embed);
    bl.pos_img = push(backbone.pos_img);
    bl.pos_txt = push(backbone.pos_txt);
    bl.cls = push(backbone.cls);
    for (const LayerParams& l : backbone.layers) {
        BackboneLeaves::Layer lid;
        lid.ln1_g = push(l.ln1_g);
        lid.ln1_b = push(l.ln1_b);
        lid.wq = push(l.wq);
        lid.bq = push(l.bq);
        lid.wk = push(l.wk);
        lid.bk = push(l.bk);
        lid.wv = push(l.wv);
        lid.bv = push(l.bv);
        lid.wo = push(l.wo);
        lid.bo = push(l.bo);
        lid.ln2_g = push(l.ln2_g);
        lid.ln2_b = push(l.ln2_b);
        lid.w1 = push(l.w1);
        lid.b1 = push(l.b1);
        lid.w2 = push(l.w2);
        lid.b2 = push(l.b2);
        bl.layers.push_back(lid);
    }
    bl.lnf_g = push(backbone.lnf_g);
    bl.lnf_b = push(backbone.lnf_b);
    return bl;
}

void add_selected_prompt_leaves(Graph& g, const PromptBank& bank, const LookupResult& lk,
                                bool trainable, SelectedLeaves& sel) {
    for (int id : lk.selected_ids) {
        if (id < 0 || id >= bank.size()) throw std::invalid_argument("selected entry id out of range");
        if (!sel.keys.count(id)) {
            Mat key(1, bank.d);
            for (int c = 0; c < bank.d; ++c) key(0, c) = bank.entries[id].key[c];
            sel.keys[id] = g.leaf(std::move(key), trainable);
            std::vector<Graph::Id> vals;
            for (const Mat& v : bank.entries[id].values) vals.push_back(g.leaf(v, trainable));
            sel.values[id] = std::move(vals);
        }
    }
}

Graph::Id image_tokens_graph(Graph& g, const BackboneLeaves& bl, const BackboneConfig& cfg,
                             const SynthImage& image) {
    if (image.height != cfg.image_size || image.width != cfg.image_size || image.channels != 3)
        throw std::invalid_argument("image_tokens_graph: image shape mismatch");
    const int p = cfg.patch_size;
    const int grid = cfg.image_size / p;
    const int pdim = p * p * 3;
    Mat patches(cfg.n_patches(), pdim);
    for (int py = 0; py < grid; ++py)
        for (int px = 0; px < grid; ++px) {
            int k = 0;
            const int row = py * grid + px;
            for (int y = 0; y < p; ++y)
                for (int x = 0; x < p; ++x)
                    for (int ch = 0; ch < 3; ++ch) patches(row, k++) = image.px(py * p + y, px * p + x, ch);
        }
    Graph::Id x = g.matmul(g.leaf(std::move(patches), false), bl.patch_w);
    x = g.add_rowvec(x, bl.patch_b);
    return g.add(x, bl.pos_img);
}

Graph::Id text_tokens_graph(Graph& g, const BackboneLeaves& bl, const BackboneConfig& cfg,
                            const SynthText& text, std::vector<uint8_t>* key_mask_out) {
    if (static_cast<int>(text.tokens.size()) != cfg.max_text_len)
        throw std::invalid_argument("text_tokens_graph: sequence length mismatch");
    std::vector<int> ids;
    ids.reserve(text.tokens.size());
    if (key_mask_out) key_mask_out->assign(cfg.max_text_len, 0);
    for (int t = 0; t < cfg.max_text_len; ++t) {
        const uint32_t id = text.tokens[t];
        if (static_cast<int>(id) >= cfg.vocab_size)
            throw std::invalid_argument("text_tokens_graph: token id out of vocabulary");
        ids.push_back(static_cast<int>(id));
        if (key_mask_out && id != 0) (*key_mask_out)[t] = 1;
    }
    Graph::Id x = g.gather_rows(bl.tok_embed, ids);
    return g.add(x, bl.pos_txt);
}

namespace {

Graph::Id transformer_block(Graph& g, const BackboneLeaves::Layer& l, const BackboneConfig& cfg,
                            Graph::Id h, const std::vector<uint8_t>& mask) {
    const int dh = cfg.d / cfg.heads;
    Graph::Id a = g.layer_norm(h, l.ln1_g, l.ln1_b);
    Graph::Id q = g.add_rowvec(g.matmul(a, l.wq), l.bq);
    Graph::Id k = g.add_rowvec(g.matmul(a, l.wk), l.bk);
    Graph::Id v = g.add_rowvec(g.matmul(a, l.wv), l.bv);
    std::vector<Graph::Id> head_outs;
    for (int hd = 0; hd < cfg.heads; ++hd) {
        const int c0 = hd * dh;
        const int c1 = c0 + dh;
        Graph::Id qi = g.slice_cols(q, c0, c1);
        Graph::Id ki = g.slice_cols(k, c0, c1);
        Graph::Id vi = g.slice_cols(v, c0, c1);
        Graph::Id scores = g.scale(g.matmul_nt(qi, ki), 1.0 / std::sqrt(static_cast<double>(dh)));
        Graph::Id probs = g.softmax_rows_masked(scores, mask);
        head_outs.push_back(g.matmul(probs, vi));
    }
    Graph::Id o = g.concat_cols(head_outs);
    h = g.add(h, g.add_rowvec(g.matmul(o, l.wo), l.bo));
    Graph::Id u = g.layer_norm(h, l.ln2_g, l.ln2_b);
    Graph::Id m1 = g.gelu(g.add_rowvec(g.matmul(u, l.w1), l.b1));
    Graph::Id m2 = g.add_rowvec(g.matmul(m1, l.w2), l.b2);
    return g.add(h, m2);
}

}  // namespace

Graph::Id encode_graph(Graph& g, const BackboneLeaves& bl, const BackboneConfig& cfg,
                       Graph::Id x_e, const std::vector<uint8_t>& xe_mask, const PromptBank* bank,
                       const LookupResult* lk, const SelectedLeaves* sel) {
    if (g.value(x_e).cols != cfg.d) throw std::invalid_argument("encode_graph: token width mismatch");
    if (static_cast<int>(xe_mask.size()) != g.value(x_e).rows)
        throw std::invalid_argument("encode_graph: mask length mismatch");
    const bool with_prompts = bank != nullptr;
    if (with_prompts) {
        if (!lk || !sel) throw std::invalid_argument("encode_graph: lookup/leaves missing");
        if (bank->d != cfg.d) throw std::invalid_argument("encode_graph: bank width mismatch");
        if (bank->mode == InsertionMode::deep && bank->value_layers != cfg.layers)
            throw std::invalid_argument("encode_graph: deep bank layer count mismatch");
    }

    auto prompt_block = [&](int layer) {
        std::vector<Graph::Id> parts;
        for (int id : lk->selected_ids) parts.push_back(sel->values.at(id).at(layer));
        return g.concat_rows(parts);
    };

    std::vector<Graph::Id> parts = {bl.cls};
    int n_prompt_rows = 0;
    if (with_prompts) {
        parts.push_back(prompt_block(0));
        n_prompt_rows = bank->n_select * bank->tokens_per_entry;
    }
    parts.push_back(x_e);
    Graph::Id h = g.concat_rows(parts);

    std::vector<uint8_t> mask(1 + n_prompt_rows, 1);
    mask.insert(mask.end(), xe_mask.begin(), xe_mask.end());

    for (int layer = 0; layer < cfg.layers; ++layer) {
        if (with_prompts && layer > 0 && bank->mode == InsertionMode::deep)
            h = g.replace_rows(h, 1, prompt_block(layer));
        h = transformer_block(g, bl.layers[layer], cfg, h, mask);
    }
    h = g.layer_norm(h, bl.lnf_g, bl.lnf_b);
    return g.l2_normalize_row(g.row(h, 0));
}

Embedding forward(const Backbone& backbone, const QuerySample& sample, const PromptBank* bank,
                  const LookupResult* lk) {
    if (bank && !lk) throw std::invalid_argument("forward: bank supplied without lookup");
    Graph g;
    BackboneLeaves bl = add_backbone_leaves(g, backbone, false);
    SelectedLeaves sel;
    if (bank) add_selected_prompt_leaves(g, *bank, *lk, false, sel);
    Graph::Id xe;
    std::vector<uint8_t> mask;
    if (sample.modality == Modality::image) {
        xe = image_tokens_graph(g, bl, backbone.cfg, sample.image);
        mask.assign(backbone.cfg.n_patches(), 1);
    } else {
        xe = text_tokens_graph(g, bl, backbone.cfg, sample.text, &mask);
    }
    const Graph::Id e = encode_graph(g, bl, backbone.cfg, xe, mask, bank, lk, bank ? &sel : nullptr);
    const Mat& out = g.value(e);
    Embedding emb;
    emb.v.assign(out.v.begin(), out.v.end());
    return emb;
}

}  // namespace stylebank
