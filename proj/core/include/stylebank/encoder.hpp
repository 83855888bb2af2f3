#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "stylebank/autodiff.hpp"
#include "stylebank/hash.hpp"
#include "stylebank/mat.hpp"
#include "stylebank/promptbank.hpp"
#include "stylebank/synthdata.hpp"

namespace stylebank {

struct BackboneConfig {
    int layers = 4;
    int d = 32;
    int heads = 4;
    int mlp_ratio = 2;
    int patch_size = 8;
    int image_size = 32;
    int vocab_size = kDefaultVocabSize;
    int max_text_len = kMaxTextLen;
    uint64_t seed = 42;

    int n_patches() const { return (image_size / patch_size) * (image_size / patch_size); }
    void validate() const;
};

struct LayerParams {
    Mat ln1_g, ln1_b;
    Mat wq, bq, wk, bk, wv, bv, wo, bo;
    Mat ln2_g, ln2_b;
    Mat w1, b1, w2, b2;
};

/// Two-tower transformer sharing width d and all block parameters with itself;
/// vision and text differ only in the embedding stage. Frozen after warmup.
struct Backbone {
    BackboneConfig cfg;
    Mat patch_w, patch_b;  // (patch*patch*3) x d, 1 x d
    Mat tok_embed;         // vocab x d
    Mat pos_img;           // n_patches x d
    Mat pos_txt;           // max_text_len x d
    Mat cls;               // 1 x d
    std::vector<LayerParams> layers;
    Mat lnf_g, lnf_b;
    bool frozen = false;

    // Canonical parameter order; serialization, hashing and the optimizer all use it.
    std::vector<Mat*> params();
    std::vector<const Mat*> params() const;
    size_t total_scalars() const;
    // SHA-256 of the float32 LE parameter payload in canonical order.
    Digest content_hash() const;
};

Backbone make_backbone(const BackboneConfig& cfg);

// Backbone file: magic "UBKB", u32 version=1, config block, parameters as
// float32 LE in canonical order. Loaded backbones come back frozen.
void save_backbone(const Backbone& backbone, const std::filesystem::path& path);
Backbone load_backbone(const std::filesystem::path& path);

struct Embedding {
    std::vector<double> v;  // unit L2 norm
};

// Plain embedding stages, shared with the graph path and cross-checked in tests.
Mat patch_embed(const Backbone& backbone, const SynthImage& image);
Mat tokenize_text(const Backbone& backbone, const SynthText& text,
                  std::vector<uint8_t>* key_mask_out = nullptr);

// --- tape construction -------------------------------------------------

struct BackboneLeaves {
    Graph::Id patch_w, patch_b, tok_embed, pos_img, pos_txt, cls;
    struct Layer {
        Graph::Id ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
    };
    std::vector<Layer> layers;
    Graph::Id lnf_g, lnf_b;
    std::vector<Graph::Id> all;  // canonical order, parallel to Backbone::params()
};
BackboneLeaves add_backbone_leaves(Graph& g, const Backbone& backbone, bool trainable);

/// Leaves for the bank entries selected in the current step. Shared across
/// every tower and triplet in one graph, so an entry picked by both the text
/// and the image path contributes one leaf and one accumulated gradient.
struct SelectedLeaves {
    std::map<int, Graph::Id> keys;                  // entry id -> 1 x d leaf
    std::map<int, std::vector<Graph::Id>> values;   // entry id -> per stored layer (t x d)
};
void add_selected_prompt_leaves(Graph& g, const PromptBank& bank, const LookupResult& lk,
                                bool trainable, SelectedLeaves& sel);

Graph::Id image_tokens_graph(Graph& g, const BackboneLeaves& bl, const BackboneConfig& cfg,
                             const SynthImage& image);
Graph::Id text_tokens_graph(Graph& g, const BackboneLeaves& bl, const BackboneConfig& cfg,
                            const SynthText& text, std::vector<uint8_t>* key_mask_out);

// Full encoder: layer-0 expansion, per-layer slot replacement in deep mode,
// CLS readout, L2 normalization. bank/lk/sel null means baseline mode.
Graph::Id encode_graph(Graph& g, const BackboneLeaves& bl, const BackboneConfig& cfg,
                       Graph::Id x_e, const std::vector<uint8_t>& xe_mask, const PromptBank* bank,
                       const LookupResult* lk, const SelectedLeaves* sel);

// One-shot inference path; bank == nullptr runs without prompt slots.
Embedding forward(const Backbone& backbone, const QuerySample& sample,
                  const PromptBank* bank = nullptr, const LookupResult* lk = nullptr);

// --- warmup -------------------------------------------------------------

struct WarmupConfig {
    int epochs = 8;
    double learning_rate = 0.05;
    double margin = 0.2;
    int batch_size = 16;
    uint64_t seed = 0;
};

struct WarmupReport {
    std::vector<double> epoch_mean_loss;
    std::vector<double> epoch_wall_ms;
    Digest hash_after{};
};

// Trains all backbone parameters with the triplet objective on natural
// image/text pairs from the train split, then freezes the backbone. No bank
// or prompt tokens are involved.
WarmupReport warmup_backbone(const Dataset& dataset, Backbone& backbone, const WarmupConfig& cfg);

}  // namespace stylebank
