#include "stylebank/promptbank.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "stylebank/io.hpp"

namespace stylebank {

namespace {
constexpr char kBankMagic[4] = {'U', 'P', 'B', 'K'};
constexpr uint32_t kBankVersion = 1;
}  // namespace

const char* to_string(InsertionMode mode) {
    return mode == InsertionMode::deep ? "deep" : "shallow";
}

InsertionMode parse_insertion_mode(std::string_view name) {
    if (name == "deep") return InsertionMode::deep;
    if (name == "shallow") return InsertionMode::shallow;
    throw std::invalid_argument("unknown insertion mode: '" + std::string(name) + "'");
}

PromptBank new_bank(int entries, int n_select, int encoder_layers, int d, InsertionMode mode,
                    uint64_t seed, const std::vector<StylePrototype>& init_prototypes,
                    int tokens_per_entry) {
    if (entries < 1 || n_select < 1 || n_select > entries)
        throw std::invalid_argument("new_bank: need 1 <= n <= N");
    if (encoder_layers < 1 || d < 1 || tokens_per_entry < 1)
        throw std::invalid_argument("new_bank: bad dimensions");
    for (const auto& p : init_prototypes)
        if (static_cast<int>(p.vector.size()) != d)
            throw std::invalid_argument("new_bank: prototype dimension mismatch");

    PromptBank bank;
    bank.n_select = n_select;
    bank.mode = mode;
    bank.d = d;
    bank.value_layers = mode == InsertionMode::deep ? encoder_layers : 1;
    bank.tokens_per_entry = tokens_per_entry;
    bank.entries.resize(entries);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> key_dist(-0.1, 0.1);
    std::uniform_real_distribution<double> value_dist(-0.02, 0.02);

    const int n_proto = std::min<int>(entries, static_cast<int>(init_prototypes.size()));
    for (int e = 0; e < entries; ++e) {
        BankEntry& entry = bank.entries[e];
        entry.entry_id = e;
        if (e < n_proto) {
            entry.key = init_prototypes[e].vector;
        } else {
            entry.key.resize(d);
            for (double& x : entry.key) x = key_dist(rng);
        }
    }
    for (int e = 0; e < entries; ++e) {
        BankEntry& entry = bank.entries[e];
        entry.values.resize(bank.value_layers);
        for (Mat& v : entry.values) {
            v = Mat(tokens_per_entry, d);
            for (double& x : v.v) x = value_dist(rng);
        }
    }
    return bank;
}

double score(const std::vector<double>& prototype, const std::vector<double>& key) {
    return cosine_distance(prototype, key);
}

LookupResult lookup(const PromptBank& bank, const std::vector<double>& prototype) {
    if (bank.entries.empty()) throw std::invalid_argument("lookup: empty bank");
    if (static_cast<int>(prototype.size()) != bank.d)
        throw std::invalid_argument("lookup: prototype dimension mismatch");

    std::vector<std::pair<double, int>> scored;
    scored.reserve(bank.entries.size());
    for (const BankEntry& e : bank.entries) scored.emplace_back(score(prototype, e.key), e.entry_id);
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second < b.second;
    });

    LookupResult lk;
    for (int i = 0; i < bank.n_select; ++i) {
        lk.selected_ids.push_back(scored[i].second);
        lk.scores.push_back(scored[i].first);
    }
    lk.prompt_tokens.resize(bank.value_layers);
    for (int layer = 0; layer < bank.value_layers; ++layer) {
        Mat rows(bank.n_select * bank.tokens_per_entry, bank.d);
        for (int i = 0; i < bank.n_select; ++i) {
            const Mat& v = bank.entries[lk.selected_ids[i]].values[layer];
            for (int t = 0; t < bank.tokens_per_entry; ++t)
                for (int c = 0; c < bank.d; ++c) rows(i * bank.tokens_per_entry + t, c) = v(t, c);
        }
        lk.prompt_tokens[layer] = std::move(rows);
    }
    return lk;
}

Mat expand_sequence(const std::vector<double>& cls_token, const PromptBank& bank,
                    const LookupResult& lk, int layer, const Mat& embedded_input) {
    if (static_cast<int>(cls_token.size()) != bank.d || embedded_input.cols != bank.d)
        throw std::invalid_argument("expand_sequence: dimension mismatch");
    if (layer < 0 || layer >= static_cast<int>(lk.prompt_tokens.size()))
        throw std::invalid_argument(bank.mode == InsertionMode::shallow && layer > 0
                                        ? "expand_sequence: shallow bank holds layer 0 only"
                                        : "expand_sequence: layer out of range");
    const Mat& prompts = lk.prompt_tokens[layer];
    Mat out(1 + prompts.rows + embedded_input.rows, bank.d);
    for (int c = 0; c < bank.d; ++c) out(0, c) = cls_token[c];
    for (int r = 0; r < prompts.rows; ++r)
        for (int c = 0; c < bank.d; ++c) out(1 + r, c) = prompts(r, c);
    for (int r = 0; r < embedded_input.rows; ++r)
        for (int c = 0; c < bank.d; ++c) out(1 + prompts.rows + r, c) = embedded_input(r, c);
    return out;
}

double key_alignment_loss(const std::vector<double>& prototype, const PromptBank& bank,
                          const LookupResult& lk) {
    double total = 0.0;
    for (int id : lk.selected_ids) total += score(prototype, bank.entries[id].key);
    return total;
}

std::vector<uint8_t> serialize_bank(const PromptBank& bank) {
    std::ostringstream out(std::ios::binary);
    write_bytes(out, kBankMagic, 4);
    write_u32(out, kBankVersion);
    write_u32(out, static_cast<uint32_t>(bank.entries.size()));
    write_u32(out, static_cast<uint32_t>(bank.n_select));
    write_u32(out, static_cast<uint32_t>(bank.value_layers));
    write_u32(out, static_cast<uint32_t>(bank.d));
    write_u32(out, static_cast<uint32_t>(bank.tokens_per_entry));
    write_u8(out, static_cast<uint8_t>(bank.mode));
    for (const BankEntry& e : bank.entries)
        for (double x : e.key) write_f32(out, x);
    for (const BankEntry& e : bank.entries)
        for (const Mat& v : e.values)
            for (double x : v.v) write_f32(out, x);
    const std::string s = out.str();
    return std::vector<uint8_t>(s.begin(), s.end());
}

void save_bank(const PromptBank& bank, const std::filesystem::path& path) {
    const std::vector<uint8_t> bytes = serialize_bank(bank);
    auto out = open_output(path);
    write_bytes(out, bytes.data(), bytes.size());
    if (!out) throw std::runtime_error("save_bank: write failed for " + path.string());
}

PromptBank load_bank(const std::filesystem::path& path) {
    auto in = open_input(path);
    char magic[4];
    read_bytes(in, magic, 4);
    if (std::memcmp(magic, kBankMagic, 4) != 0)
        throw std::runtime_error("load_bank: bad magic in " + path.string());
    const uint32_t version = read_u32(in);
    if (version != kBankVersion)
        throw std::runtime_error("load_bank: unsupported version " + std::to_string(version));
    const uint32_t n_entries = read_u32(in);
    const uint32_t n_select = read_u32(in);
    const uint32_t layers = read_u32(in);
    const uint32_t d = read_u32(in);
    const uint32_t tokens = read_u32(in);
    const uint8_t mode_raw = read_u8(in);
    if (mode_raw > 1) throw std::runtime_error("load_bank: bad insertion mode byte");
    if (n_entries == 0 || n_select == 0 || n_select > n_entries || layers == 0 || d == 0 ||
        tokens == 0)
        throw std::runtime_error("load_bank: dimension header mismatch");

    const uint64_t expected_payload =
        4ull * n_entries * d + 4ull * n_entries * layers * tokens * d;
    const auto header_end = in.tellg();
    in.seekg(0, std::ios::end);
    const uint64_t available = static_cast<uint64_t>(in.tellg() - header_end);
    in.seekg(header_end);
    if (available < expected_payload)
        throw std::runtime_error("load_bank: truncated file, missing " +
                                 std::to_string(expected_payload - available) + " bytes");

    PromptBank bank;
    bank.n_select = static_cast<int>(n_select);
    bank.mode = static_cast<InsertionMode>(mode_raw);
    bank.d = static_cast<int>(d);
    bank.value_layers = static_cast<int>(layers);
    bank.tokens_per_entry = static_cast<int>(tokens);
    if (bank.mode == InsertionMode::shallow && bank.value_layers != 1)
        throw std::runtime_error("load_bank: shallow bank must store exactly one value layer");
    bank.entries.resize(n_entries);
    for (uint32_t e = 0; e < n_entries; ++e) {
        bank.entries[e].entry_id = static_cast<int>(e);
        bank.entries[e].key.resize(d);
        for (double& x : bank.entries[e].key) x = read_f32(in);
    }
    for (uint32_t e = 0; e < n_entries; ++e) {
        bank.entries[e].values.resize(layers);
        for (Mat& v : bank.entries[e].values) {
            v = Mat(static_cast<int>(tokens), static_cast<int>(d));
            for (double& x : v.v) x = read_f32(in);
        }
    }
    return bank;
}

Digest bank_hash(const PromptBank& bank) {
    const std::vector<uint8_t> bytes = serialize_bank(bank);
    return Sha256::of_bytes(bytes.data(), bytes.size());
}

}  // namespace stylebank
