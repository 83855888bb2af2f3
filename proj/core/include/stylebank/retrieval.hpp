#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "stylebank/encoder.hpp"
#include "stylebank/prototype.hpp"

namespace stylebank {

struct IndexRecord {
    uint64_t id = 0;
    std::vector<double> embedding;  // unit norm (float32 precision after persistence)
    uint32_t class_id = 0;
    uint32_t instance_id = 0;
    StyleTag style = StyleTag::natural;
    Modality modality = Modality::image;
};

/// Immutable store of precomputed target embeddings. One index serves every
/// query style; provenance hashes pin the exact models that produced it.
struct RetrievalIndex {
    int d = 0;
    std::vector<IndexRecord> records;  // ordered by ascending id
    Digest bank_hash{};
    Digest backbone_hash{};
    Digest manifest_hash{};

    size_t size() const { return records.size(); }
};

struct IndexFilter {
    std::vector<StyleTag> styles = {StyleTag::natural};  // admitted target styles
};

uint64_t record_id(int class_id, int instance_id, StyleTag style);

// Embeds every admitted target through prototype -> lookup -> expand -> encode.
// bank == nullptr builds a no-prompt baseline index (bank hash zeroed).
RetrievalIndex build_index(const Dataset& dataset, const Backbone& backbone, const PromptBank* bank,
                           const PrototypeEncoder& enc, const IndexFilter& filter,
                           const Digest& manifest_hash);

struct RankedResult {
    std::vector<std::pair<uint64_t, double>> hits;  // (id, similarity), scores non-increasing
    StyleTag query_style = StyleTag::natural;
    int query_class = 0;
    int query_instance = 0;
};

// Exhaustive ranking by <q, r>; ties break toward the ascending id.
RankedResult rank_embedding(const RetrievalIndex& index, const std::vector<double>& query_embedding,
                            int k);

// Full query path for one sample.
RankedResult query(const RetrievalIndex& index, const QuerySample& sample, const Backbone& backbone,
                   const PromptBank* bank, const PrototypeEncoder& enc, int k);

// Arithmetic mean then L2 normalization; rejects empty and near-degenerate input.
std::vector<double> fuse_queries(const std::vector<std::vector<double>>& embeddings);

// Fraction of queries whose unique correct id appears in the top k. Throws if
// a query id is missing from the ground-truth map.
double recall_at_k(const std::map<uint64_t, RankedResult>& results,
                   const std::map<uint64_t, uint64_t>& ground_truth, int k);

struct StageStats {
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    std::vector<double> samples_ms;  // one per repetition (mean per query)
};

struct LatencyReport {
    StageStats embed;
    StageStats rank;
    int repetitions = 0;
    size_t queries = 0;
};

// Wall-clock per-stage statistics; one warmup repetition is excluded.
LatencyReport measure_latency(const RetrievalIndex& index, const std::vector<QuerySample>& queries,
                              const Backbone& backbone, const PromptBank* bank,
                              const PrototypeEncoder& enc, int repetitions);

// Index file: magic "URIX", u32 version=1, u32 count, u32 d, bank/backbone/
// manifest hashes (3 x 32 bytes), then per record: u64 id, u32 class,
// u32 instance, u8 style, u8 modality, d float32 LE.
void save_index(const RetrievalIndex& index, const std::filesystem::path& path);
RetrievalIndex load_index(const std::filesystem::path& path);
Digest index_hash(const RetrievalIndex& index);

// Provenance pinning: throws when the hashes embedded in the index disagree
// with the models in hand.
void verify_provenance(const RetrievalIndex& index, const Digest& bank_hash,
                       const Digest& backbone_hash);

}  // namespace stylebank
