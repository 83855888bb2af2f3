#include "stylebank/retrieval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "stylebank/io.hpp"

namespace stylebank {

namespace {
constexpr char kIndexMagic[4] = {'U', 'R', 'I', 'X'};
constexpr uint32_t kIndexVersion = 1;
}  // namespace

uint64_t record_id(int class_id, int instance_id, StyleTag style) {
    return (static_cast<uint64_t>(class_id) << 32) | (static_cast<uint64_t>(instance_id) << 8) |
           static_cast<uint64_t>(style);
}

RetrievalIndex build_index(const Dataset& dataset, const Backbone& backbone, const PromptBank* bank,
                           const PrototypeEncoder& enc, const IndexFilter& filter,
                           const Digest& manifest_hash) {
    if (!backbone.frozen) throw std::logic_error("build_index: backbone must be frozen");
    RetrievalIndex index;
    index.d = backbone.cfg.d;
    index.backbone_hash = backbone.content_hash();
    index.bank_hash = bank ? bank_hash(*bank) : Digest{};
    index.manifest_hash = manifest_hash;

    for (int c = 0; c < dataset.manifest.num_classes; ++c) {
        for (int i = 0; i < dataset.manifest.instances_per_class; ++i) {
            for (StyleTag style : filter.styles) {
                const QuerySample target = dataset.sample(c, i, style);
                std::optional<LookupResult> lk;
                if (bank) lk = lookup(*bank, query_prototype(target, enc));
                const Embedding emb = forward(backbone, target, bank, lk ? &*lk : nullptr);
                IndexRecord rec;
                rec.id = record_id(c, i, style);
                rec.embedding = emb.v;
                rec.class_id = static_cast<uint32_t>(c);
                rec.instance_id = static_cast<uint32_t>(i);
                rec.style = style;
                rec.modality = modality_of(style);
                index.records.push_back(std::move(rec));
            }
        }
    }
    if (index.records.empty()) throw std::invalid_argument("build_index: empty target set");
    std::sort(index.records.begin(), index.records.end(),
              [](const IndexRecord& a, const IndexRecord& b) { return a.id < b.id; });
    return index;
}

RankedResult rank_embedding(const RetrievalIndex& index, const std::vector<double>& query_embedding,
                            int k) {
    if (index.records.empty()) throw std::invalid_argument("rank: empty index");
    if (k < 1 || static_cast<size_t>(k) > index.records.size())
        throw std::invalid_argument("rank: k out of range");
    if (static_cast<int>(query_embedding.size()) != index.d)
        throw std::invalid_argument("rank: query dimension mismatch");

    std::vector<std::pair<double, uint64_t>> scored;
    scored.reserve(index.records.size());
    for (const IndexRecord& r : index.records)
        scored.emplace_back(dot(query_embedding, r.embedding), r.id);
    // Scores non-increasing, ties by ascending id.
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    RankedResult out;
    out.hits.reserve(k);
    for (int i = 0; i < k; ++i) out.hits.emplace_back(scored[i].second, scored[i].first);
    return out;
}

RankedResult query(const RetrievalIndex& index, const QuerySample& sample, const Backbone& backbone,
                   const PromptBank* bank, const PrototypeEncoder& enc, int k) {
    std::optional<LookupResult> lk;
    if (bank) lk = lookup(*bank, query_prototype(sample, enc));
    const Embedding emb = forward(backbone, sample, bank, lk ? &*lk : nullptr);
    RankedResult out = rank_embedding(index, emb.v, k);
    out.query_style = sample.style;
    out.query_class = sample.class_id;
    out.query_instance = sample.instance_id;
    return out;
}

std::vector<double> fuse_queries(const std::vector<std::vector<double>>& embeddings) {
    if (embeddings.empty()) throw std::invalid_argument("fuse_queries: empty list");
    const size_t d = embeddings.front().size();
    std::vector<double> mean(d, 0.0);
    for (const auto& e : embeddings) {
        if (e.size() != d) throw std::invalid_argument("fuse_queries: dimension mismatch");
        for (size_t i = 0; i < d; ++i) mean[i] += e[i];
    }
    for (double& x : mean) x /= static_cast<double>(embeddings.size());
    if (l2_norm(mean) < 1e-9)
        throw std::runtime_error("fuse_queries: degenerate (near-antipodal) inputs");
    l2_normalize(mean);
    return mean;
}

double recall_at_k(const std::map<uint64_t, RankedResult>& results,
                   const std::map<uint64_t, uint64_t>& ground_truth, int k) {
    if (results.empty()) throw std::invalid_argument("recall_at_k: no results");
    size_t hits = 0;
    for (const auto& [query_id, ranked] : results) {
        const auto gt = ground_truth.find(query_id);
        if (gt == ground_truth.end())
            throw std::invalid_argument("recall_at_k: query " + std::to_string(query_id) +
                                        " missing ground truth");
        const size_t limit = std::min<size_t>(static_cast<size_t>(k), ranked.hits.size());
        for (size_t i = 0; i < limit; ++i) {
            if (ranked.hits[i].first == gt->second) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

namespace {

StageStats make_stats(std::vector<double> samples) {
    StageStats s;
    s.samples_ms = samples;
    if (samples.empty()) return s;
    s.mean_ms = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
    std::sort(samples.begin(), samples.end());
    auto nearest_rank = [&](double p) {
        const size_t rank = static_cast<size_t>(std::ceil(p * samples.size()));
        return samples[std::min(samples.size() - 1, std::max<size_t>(1, rank) - 1)];
    };
    s.p50_ms = nearest_rank(0.50);
    s.p95_ms = nearest_rank(0.95);
    return s;
}

}  // namespace

LatencyReport measure_latency(const RetrievalIndex& index, const std::vector<QuerySample>& queries,
                              const Backbone& backbone, const PromptBank* bank,
                              const PrototypeEncoder& enc, int repetitions) {
    if (repetitions < 3) throw std::invalid_argument("measure_latency: repetitions must be >= 3");
    if (queries.empty()) throw std::invalid_argument("measure_latency: empty query set");

    using clock = std::chrono::steady_clock;
    std::vector<double> embed_samples, rank_samples;
    std::vector<std::vector<double>> embeddings(queries.size());

    for (int rep = -1; rep < repetitions; ++rep) {  // rep -1 is warmup, excluded
        const auto te0 = clock::now();
        for (size_t q = 0; q < queries.size(); ++q) {
            std::optional<LookupResult> lk;
            if (bank) lk = lookup(*bank, query_prototype(queries[q], enc));
            embeddings[q] = forward(backbone, queries[q], bank, lk ? &*lk : nullptr).v;
        }
        const auto te1 = clock::now();
        volatile double sink = 0.0;
        const auto tr0 = clock::now();
        for (const auto& emb : embeddings) {
            const RankedResult r = rank_embedding(index, emb, std::min<int>(5, static_cast<int>(index.size())));
            sink += r.hits.front().second;
        }
        const auto tr1 = clock::now();
        (void)sink;
        if (rep >= 0) {
            embed_samples.push_back(std::chrono::duration<double, std::milli>(te1 - te0).count() /
                                    queries.size());
            rank_samples.push_back(std::chrono::duration<double, std::milli>(tr1 - tr0).count() /
                                   queries.size());
        }
    }

    LatencyReport report;
    report.embed = make_stats(std::move(embed_samples));
    report.rank = make_stats(std::move(rank_samples));
    report.repetitions = repetitions;
    report.queries = queries.size();
    return report;
}

namespace {

void write_index_stream(std::ostream& out, const RetrievalIndex& index) {
    write_bytes(out, kIndexMagic, 4);
    write_u32(out, kIndexVersion);
    write_u32(out, static_cast<uint32_t>(index.records.size()));
    write_u32(out, static_cast<uint32_t>(index.d));
    write_bytes(out, index.bank_hash.data(), index.bank_hash.size());
    write_bytes(out, index.backbone_hash.data(), index.backbone_hash.size());
    write_bytes(out, index.manifest_hash.data(), index.manifest_hash.size());
    for (const IndexRecord& r : index.records) {
        write_u64(out, r.id);
        write_u32(out, r.class_id);
        write_u32(out, r.instance_id);
        write_u8(out, static_cast<uint8_t>(r.style));
        write_u8(out, static_cast<uint8_t>(r.modality));
        for (double x : r.embedding) write_f32(out, x);
    }
}

}  // namespace

void save_index(const RetrievalIndex& index, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_index_stream(out, index);
    if (!out) throw std::runtime_error("save_index: write failed for " + path.string());
}

RetrievalIndex load_index(const std::filesystem::path& path) {
    auto in = open_input(path);
    char magic[4];
    read_bytes(in, magic, 4);
    if (std::memcmp(magic, kIndexMagic, 4) != 0)
        throw std::runtime_error("load_index: bad magic in " + path.string());
    const uint32_t version = read_u32(in);
    if (version != kIndexVersion)
        throw std::runtime_error("load_index: unsupported version " + std::to_string(version));
    const uint32_t count = read_u32(in);
    const uint32_t d = read_u32(in);
    if (count == 0 || d == 0) throw std::runtime_error("load_index: dimension header mismatch");

    RetrievalIndex index;
    index.d = static_cast<int>(d);
    read_bytes(in, index.bank_hash.data(), index.bank_hash.size());
    read_bytes(in, index.backbone_hash.data(), index.backbone_hash.size());
    read_bytes(in, index.manifest_hash.data(), index.manifest_hash.size());

    const uint64_t per_record = 8 + 4 + 4 + 1 + 1 + 4ull * d;
    const auto header_end = in.tellg();
    in.seekg(0, std::ios::end);
    const uint64_t available = static_cast<uint64_t>(in.tellg() - header_end);
    in.seekg(header_end);
    if (available < per_record * count)
        throw std::runtime_error("load_index: truncated file, missing " +
                                 std::to_string(per_record * count - available) + " bytes");

    index.records.resize(count);
    for (IndexRecord& r : index.records) {
        r.id = read_u64(in);
        r.class_id = read_u32(in);
        r.instance_id = read_u32(in);
        const uint8_t style_raw = read_u8(in);
        if (style_raw >= kNumStyles) throw std::runtime_error("load_index: bad style byte");
        r.style = static_cast<StyleTag>(style_raw);
        const uint8_t modality_raw = read_u8(in);
        if (modality_raw > 1) throw std::runtime_error("load_index: bad modality byte");
        r.modality = static_cast<Modality>(modality_raw);
        r.embedding.resize(d);
        for (double& x : r.embedding) x = read_f32(in);
    }
    return index;
}

Digest index_hash(const RetrievalIndex& index) {
    std::ostringstream buf(std::ios::binary);
    write_index_stream(buf, index);
    const std::string s = buf.str();
    return Sha256::of_bytes(s.data(), s.size());
}

void verify_provenance(const RetrievalIndex& index, const Digest& bank_hash_in,
                       const Digest& backbone_hash_in) {
    if (index.backbone_hash != backbone_hash_in)
        throw std::runtime_error("index provenance: backbone hash mismatch");
    if (index.bank_hash != bank_hash_in)
        throw std::runtime_error("index provenance: bank hash mismatch");
}

}  // namespace stylebank
