#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "stylebank/hash.hpp"
#include "stylebank/mat.hpp"
#include "stylebank/prototype.hpp"

namespace stylebank {

enum class InsertionMode : uint8_t {
    deep = 0,     // prompt values stored per encoder layer, slots replaced each layer
    shallow = 1,  // values stored for layer 0 only
};

const char* to_string(InsertionMode mode);
InsertionMode parse_insertion_mode(std::string_view name);

struct BankEntry {
    int entry_id = 0;
    std::vector<double> key;  // d, learnable
    std::vector<Mat> values;  // value_layers entries of (tokens_per_entry x d), learnable
};

struct PromptBank {
    int n_select = 1;  // entries fetched per lookup
    InsertionMode mode = InsertionMode::deep;
    int d = 0;
    int value_layers = 1;  // encoder layer count in deep mode, 1 in shallow mode
    int tokens_per_entry = 1;
    std::vector<BankEntry> entries;

    int size() const { return static_cast<int>(entries.size()); }
};

struct LookupResult {
    std::vector<int> selected_ids;  // ordered by ascending score, ties by entry id
    std::vector<double> scores;     // gamma values, non-decreasing
    // Concatenated prompt rows per stored layer: value_layers x (n*tokens_per_entry x d).
    std::vector<Mat> prompt_tokens;
};

PromptBank new_bank(int entries, int n_select, int encoder_layers, int d, InsertionMode mode,
                    uint64_t seed, const std::vector<StylePrototype>& init_prototypes = {},
                    int tokens_per_entry = 1);

// gamma = 1 - cos(prototype, key); range [0, 2]. Throws on zero-norm input.
double score(const std::vector<double>& prototype, const std::vector<double>& key);

// Top-n smallest gamma. Per-key terms are independent, so the greedy top-n is
// exactly the subset argmin; ties break toward the smaller entry id.
LookupResult lookup(const PromptBank& bank, const std::vector<double>& prototype);

// [cls; selected prompt rows for `layer`; embedded_input]. In deep mode at
// layer > 0 this is the slot replacement step; shallow banks reject layer > 0.
Mat expand_sequence(const std::vector<double>& cls_token, const PromptBank& bank,
                    const LookupResult& lk, int layer, const Mat& embedded_input);

// Sum over selected entries of gamma(prototype, key); the only loss term that
// reaches the keys.
double key_alignment_loss(const std::vector<double>& prototype, const PromptBank& bank,
                          const LookupResult& lk);

// Bank file: magic "UPBK", u32 version=1, u32 N, u32 n, u32 layers, u32 d,
// u32 tokens_per_entry, u8 insertion_mode, keys (N x d f32 LE), values
// (N x layers x tokens_per_entry x d f32 LE).
void save_bank(const PromptBank& bank, const std::filesystem::path& path);
PromptBank load_bank(const std::filesystem::path& path);

std::vector<uint8_t> serialize_bank(const PromptBank& bank);
Digest bank_hash(const PromptBank& bank);

}  // namespace stylebank
