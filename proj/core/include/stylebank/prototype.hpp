#pragma once

#include <cstdint>
#include <vector>

#include "stylebank/hash.hpp"
#include "stylebank/mat.hpp"
#include "stylebank/synthdata.hpp"

namespace stylebank {

/// Frozen shallow feature map used as the bank lookup query encoder.
/// Images: per-feature mean and standard deviation of patch-level linear
/// features, concatenated and projected to d. Text: mean token embedding
/// projected to d. Parameters are fixed at construction and never trained.
struct PrototypeEncoder {
    int dim = 32;         // output dimension d
    int hidden = 32;      // patch/token feature width
    int patch_size = 8;
    int image_size = 32;
    int channels = 3;
    int vocab_size = kDefaultVocabSize;
    uint64_t seed = 0;

    Mat img_w;     // (patch*patch*channels) x hidden
    Mat img_b;     // 1 x hidden
    Mat img_proj;  // (2*hidden) x dim
    Mat txt_embed; // vocab x hidden
    Mat txt_proj;  // hidden x dim

    Digest content_hash() const;
};

PrototypeEncoder make_prototype_encoder(int dim, int patch_size, int image_size, int channels,
                                        int vocab_size, uint64_t seed);

struct StylePrototype {
    StyleTag style = StyleTag::natural;
    std::vector<double> vector;  // unit-norm, dim d
    int m = 0;                   // number of samples averaged
};

std::vector<double> embed_style_sample(const QuerySample& sample, const PrototypeEncoder& enc);

// Arithmetic mean of the features, then L2 normalization. Throws on an empty
// list or a near-zero mean (degenerate prototype).
StylePrototype compute_prototype(const std::vector<std::vector<double>>& features,
                                 StyleTag style = StyleTag::natural);

// Single-sample prototype used at query time.
std::vector<double> query_prototype(const QuerySample& query, const PrototypeEncoder& enc);

}  // namespace stylebank
