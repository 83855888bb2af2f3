#include "stylebank/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace stylebank {

using nlohmann::json;

namespace {

std::string recall_key(int k) { return "r_at_" + std::to_string(k); }

void derive_module_seeds(RunConfig& cfg, const std::set<std::string>& pinned) {
    if (!pinned.count("dataset.seed")) cfg.dataset.seed = derive_seed(cfg.seed, "dataset");
    if (!pinned.count("backbone.seed")) cfg.backbone.seed = derive_seed(cfg.seed, "backbone");
    if (!pinned.count("warmup.seed")) cfg.warmup.seed = derive_seed(cfg.seed, "warmup");
    if (!pinned.count("train.seed")) cfg.train.seed = derive_seed(cfg.seed, "train");
}

uint64_t bank_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, "bank"); }
uint64_t proto_seed(const RunConfig& cfg) { return derive_seed(cfg.seed, "proto"); }

}  // namespace

RunConfig default_run_config() {
    RunConfig cfg;
    derive_module_seeds(cfg, {});
    return cfg;
}

PrototypeEncoder pipeline_prototype_encoder(const RunConfig& cfg) {
    return make_prototype_encoder(cfg.backbone.d, cfg.backbone.patch_size, cfg.backbone.image_size,
                                  3, cfg.backbone.vocab_size, proto_seed(cfg));
}

RunConfig run_config_from_json_text(const std::string& text) {
    const json j = json::parse(text);
    RunConfig cfg;
    std::set<std::string> pinned;

    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("dataset_dir")) cfg.dataset_dir = j.at("dataset_dir").get<std::string>();

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        if (d.contains("num_classes")) cfg.dataset.num_classes = d.at("num_classes").get<int>();
        if (d.contains("instances_per_class"))
            cfg.dataset.instances_per_class = d.at("instances_per_class").get<int>();
        if (d.contains("split_fraction")) cfg.dataset.split_fraction = d.at("split_fraction").get<double>();
        if (d.contains("seed")) {
            cfg.dataset.seed = d.at("seed").get<uint64_t>();
            pinned.insert("dataset.seed");
        }
    }
    if (j.contains("backbone")) {
        const json& b = j.at("backbone");
        if (b.contains("layers")) cfg.backbone.layers = b.at("layers").get<int>();
        if (b.contains("d")) cfg.backbone.d = b.at("d").get<int>();
        if (b.contains("heads")) cfg.backbone.heads = b.at("heads").get<int>();
        if (b.contains("mlp_ratio")) cfg.backbone.mlp_ratio = b.at("mlp_ratio").get<int>();
        if (b.contains("patch_size")) cfg.backbone.patch_size = b.at("patch_size").get<int>();
        if (b.contains("image_size")) cfg.backbone.image_size = b.at("image_size").get<int>();
        if (b.contains("vocab_size")) cfg.backbone.vocab_size = b.at("vocab_size").get<int>();
        if (b.contains("max_text_len")) cfg.backbone.max_text_len = b.at("max_text_len").get<int>();
        if (b.contains("seed")) {
            cfg.backbone.seed = b.at("seed").get<uint64_t>();
            pinned.insert("backbone.seed");
        }
    }
    if (j.contains("bank")) {
        const json& b = j.at("bank");
        if (b.contains("entries")) cfg.bank.entries = b.at("entries").get<int>();
        if (b.contains("select")) cfg.bank.select = b.at("select").get<int>();
        if (b.contains("tokens_per_entry")) cfg.bank.tokens_per_entry = b.at("tokens_per_entry").get<int>();
        if (b.contains("insertion_mode"))
            cfg.bank.mode = parse_insertion_mode(b.at("insertion_mode").get<std::string>());
    }
    if (j.contains("warmup")) {
        const json& w = j.at("warmup");
        if (w.contains("epochs")) cfg.warmup.epochs = w.at("epochs").get<int>();
        if (w.contains("learning_rate")) cfg.warmup.learning_rate = w.at("learning_rate").get<double>();
        if (w.contains("margin")) cfg.warmup.margin = w.at("margin").get<double>();
        if (w.contains("batch_size")) cfg.warmup.batch_size = w.at("batch_size").get<int>();
        if (w.contains("seed")) {
            cfg.warmup.seed = w.at("seed").get<uint64_t>();
            pinned.insert("warmup.seed");
        }
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        if (t.contains("epochs")) cfg.train.epochs = t.at("epochs").get<int>();
        if (t.contains("learning_rate")) cfg.train.learning_rate = t.at("learning_rate").get<double>();
        if (t.contains("margin")) cfg.train.margin = t.at("margin").get<double>();
        if (t.contains("lambda")) cfg.train.lambda = t.at("lambda").get<double>();
        if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size").get<int>();
        if (t.contains("seed")) {
            cfg.train.seed = t.at("seed").get<uint64_t>();
            pinned.insert("train.seed");
        }
    }
    if (j.contains("tasks")) {
        cfg.tasks.clear();
        for (const auto& t : j.at("tasks")) cfg.tasks.push_back(parse_task(t.get<std::string>()));
    }
    if (j.contains("fusion_tasks")) {
        cfg.fusion_tasks.clear();
        for (const auto& t : j.at("fusion_tasks"))
            cfg.fusion_tasks.push_back(parse_fusion_task(t.get<std::string>()));
    }
    if (j.contains("eval_tasks")) {
        for (const auto& t : j.at("eval_tasks")) cfg.eval_tasks.push_back(parse_task(t.get<std::string>()));
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        if (e.contains("ks")) cfg.eval_ks = e.at("ks").get<std::vector<int>>();
        if (e.contains("baseline")) cfg.eval_baseline = e.at("baseline").get<bool>();
        if (e.contains("measure_latency")) cfg.measure_latency = e.at("measure_latency").get<bool>();
        if (e.contains("latency_reps")) cfg.latency_reps = e.at("latency_reps").get<int>();
    }
    if (j.contains("held_out_style") && !j.at("held_out_style").is_null())
        cfg.held_out_style = parse_style(j.at("held_out_style").get<std::string>());

    derive_module_seeds(cfg, pinned);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return run_config_from_json_text(ss.str());
}

std::string run_config_to_json_text(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir.string();
    if (!cfg.dataset_dir.empty()) j["dataset_dir"] = cfg.dataset_dir.string();
    j["dataset"] = {{"num_classes", cfg.dataset.num_classes},
                    {"instances_per_class", cfg.dataset.instances_per_class},
                    {"split_fraction", cfg.dataset.split_fraction},
                    {"seed", cfg.dataset.seed}};
    j["backbone"] = {{"layers", cfg.backbone.layers},
                     {"d", cfg.backbone.d},
                     {"heads", cfg.backbone.heads},
                     {"mlp_ratio", cfg.backbone.mlp_ratio},
                     {"patch_size", cfg.backbone.patch_size},
                     {"image_size", cfg.backbone.image_size},
                     {"vocab_size", cfg.backbone.vocab_size},
                     {"max_text_len", cfg.backbone.max_text_len},
                     {"seed", cfg.backbone.seed}};
    j["bank"] = {{"entries", cfg.bank.entries},
                 {"select", cfg.bank.select},
                 {"tokens_per_entry", cfg.bank.tokens_per_entry},
                 {"insertion_mode", to_string(cfg.bank.mode)}};
    j["warmup"] = {{"epochs", cfg.warmup.epochs},
                   {"learning_rate", cfg.warmup.learning_rate},
                   {"margin", cfg.warmup.margin},
                   {"batch_size", cfg.warmup.batch_size},
                   {"seed", cfg.warmup.seed}};
    j["train"] = {{"epochs", cfg.train.epochs},
                  {"learning_rate", cfg.train.learning_rate},
                  {"margin", cfg.train.margin},
                  {"lambda", cfg.train.lambda},
                  {"batch_size", cfg.train.batch_size},
                  {"seed", cfg.train.seed}};
    json tasks = json::array();
    for (StyleTag s : cfg.tasks) tasks.push_back(task_name(s));
    j["tasks"] = tasks;
    json fusion = json::array();
    for (const auto& f : cfg.fusion_tasks) fusion.push_back(fusion_task_name(f));
    j["fusion_tasks"] = fusion;
    if (!cfg.eval_tasks.empty()) {
        json ev = json::array();
        for (StyleTag s : cfg.eval_tasks) ev.push_back(task_name(s));
        j["eval_tasks"] = ev;
    }
    j["eval"] = {{"ks", cfg.eval_ks},
                 {"baseline", cfg.eval_baseline},
                 {"measure_latency", cfg.measure_latency},
                 {"latency_reps", cfg.latency_reps}};
    if (cfg.held_out_style) j["held_out_style"] = to_string(*cfg.held_out_style);
    return j.dump(2) + "\n";
}

void validate_run_config(const RunConfig& cfg) {
    cfg.backbone.validate();
    if (cfg.bank.select > cfg.bank.entries)
        throw std::invalid_argument("config: bank.select (n) exceeds bank.entries (N)");
    if (cfg.bank.select < 1 || cfg.bank.entries < 1 || cfg.bank.tokens_per_entry < 1)
        throw std::invalid_argument("config: bank dimensions must be positive");
    if (cfg.tasks.empty()) throw std::invalid_argument("config: no tasks");
    for (StyleTag s : cfg.tasks)
        if (s == StyleTag::natural)
            throw std::invalid_argument("config: natural2image is not a retrieval task");
    if (cfg.held_out_style) {
        for (StyleTag s : cfg.tasks)
            if (s == *cfg.held_out_style)
                throw std::invalid_argument("config: held_out_style appears in tuning tasks");
    }
    if (cfg.eval_ks.empty()) throw std::invalid_argument("config: eval.ks empty");
    for (int k : cfg.eval_ks)
        if (k < 1) throw std::invalid_argument("config: eval k must be >= 1");
    if (cfg.out_dir.empty()) throw std::invalid_argument("config: out_dir empty");
}

std::string task_name(StyleTag query_style) { return std::string(to_string(query_style)) + "2image"; }

std::string fusion_task_name(const std::vector<StyleTag>& styles) {
    std::string out;
    for (size_t i = 0; i < styles.size(); ++i) {
        if (i) out += "+";
        out += to_string(styles[i]);
    }
    return out + "2image";
}

StyleTag parse_task(const std::string& name) {
    const auto pos = name.rfind("2image");
    if (pos == std::string::npos || pos + 6 != name.size())
        throw std::invalid_argument("unknown task '" + name + "' (expected <style>2image)");
    const StyleTag s = parse_style(name.substr(0, pos));
    if (s == StyleTag::natural) throw std::invalid_argument("task: natural2image is not supported");
    return s;
}

std::vector<StyleTag> parse_fusion_task(const std::string& name) {
    const auto pos = name.rfind("2image");
    if (pos == std::string::npos || pos + 6 != name.size())
        throw std::invalid_argument("unknown fusion task '" + name + "'");
    std::vector<StyleTag> styles;
    std::stringstream ss(name.substr(0, pos));
    std::string part;
    while (std::getline(ss, part, '+')) styles.push_back(parse_style(part));
    if (styles.size() < 2) throw std::invalid_argument("fusion task needs at least two styles");
    return styles;
}

// --- stages --------------------------------------------------------------

void stage_generate(const RunConfig& cfg) {
    const auto dir = cfg.effective_dataset_dir();
    if (std::filesystem::exists(dir / "manifest.json")) return;  // shared dataset reuse
    generate_dataset(cfg.dataset, dir);
}

void stage_warmup(const RunConfig& cfg) {
    const Dataset dataset = load_dataset(cfg.effective_dataset_dir());
    Backbone backbone = make_backbone(cfg.backbone);
    const WarmupReport report = warmup_backbone(dataset, backbone, cfg.warmup);
    std::filesystem::create_directories(cfg.out_dir);
    save_backbone(backbone, cfg.out_dir / "backbone.bin");
    json j;
    j["epoch_mean_loss"] = report.epoch_mean_loss;
    j["epoch_wall_ms"] = report.epoch_wall_ms;
    j["backbone_sha256"] = hex(report.hash_after);
    std::ofstream out(cfg.out_dir / "warmup_report.json", std::ios::binary | std::ios::trunc);
    out << j.dump(2) << "\n";
}

namespace {

std::vector<StylePrototype> initial_prototypes(const RunConfig& cfg, const Dataset& dataset,
                                               const PrototypeEncoder& enc) {
    std::vector<StylePrototype> protos;
    for (StyleTag style : dataset.manifest.styles_present) {
        if (cfg.held_out_style && style == *cfg.held_out_style) continue;
        std::vector<std::vector<double>> feats;
        for (const auto& [c, i] : dataset.split_pairs(true))
            feats.push_back(embed_style_sample(dataset.sample(c, i, style), enc));
        protos.push_back(compute_prototype(feats, style));
    }
    return protos;
}

std::vector<RetrievalTask> tuning_tasks(const RunConfig& cfg) {
    std::vector<RetrievalTask> tasks;
    for (StyleTag s : cfg.tasks) tasks.push_back({s, StyleTag::natural});
    return tasks;
}

}  // namespace

void stage_train(const RunConfig& cfg) {
    const Dataset dataset = load_dataset(cfg.effective_dataset_dir());
    const Backbone backbone = load_backbone(cfg.out_dir / "backbone.bin");
    const PrototypeEncoder enc = pipeline_prototype_encoder(cfg);
    PromptBank bank = new_bank(cfg.bank.entries, cfg.bank.select, cfg.backbone.layers,
                               cfg.backbone.d, cfg.bank.mode, bank_seed(cfg),
                               initial_prototypes(cfg, dataset, enc), cfg.bank.tokens_per_entry);

    std::ofstream log(cfg.out_dir / "train_log.jsonl", std::ios::binary | std::ios::trunc);
    const TrainReport report = fit(dataset, bank, backbone, enc, cfg.train, tuning_tasks(cfg), &log);
    save_bank(bank, cfg.out_dir / "bank.bin");

    json j;
    j["epoch_joint"] = report.epoch_joint;
    j["epoch_triplet"] = report.epoch_triplet;
    j["epoch_alignment"] = report.epoch_alignment;
    j["epoch_wall_ms"] = report.epoch_wall_ms;
    j["backbone_hash_before"] = report.backbone_hash_before;
    j["backbone_hash_after"] = report.backbone_hash_after;
    j["trainable_scalars"] = report.trainable_scalars;
    j["total_scalars"] = report.total_scalars;
    j["steps"] = report.steps;
    std::ofstream out(cfg.out_dir / "train_report.json", std::ios::binary | std::ios::trunc);
    out << j.dump(2) << "\n";
}

void stage_index(const RunConfig& cfg) {
    const Dataset dataset = load_dataset(cfg.effective_dataset_dir());
    const Backbone backbone = load_backbone(cfg.out_dir / "backbone.bin");
    const PromptBank bank = load_bank(cfg.out_dir / "bank.bin");
    const PrototypeEncoder enc = pipeline_prototype_encoder(cfg);
    const Digest mhash = dataset_manifest_hash(cfg.effective_dataset_dir());
    const IndexFilter filter;  // natural image targets
    save_index(build_index(dataset, backbone, &bank, enc, filter, mhash), cfg.out_dir / "index.bin");
    if (cfg.eval_baseline)
        save_index(build_index(dataset, backbone, nullptr, enc, filter, mhash),
                   cfg.out_dir / "baseline_index.bin");
}

namespace {

struct TaskEval {
    std::map<int, double> recall;
    int num_queries = 0;
};

TaskEval evaluate_single_style(const RunConfig& cfg, const Dataset& dataset,
                               const RetrievalIndex& index, const Backbone& backbone,
                               const PromptBank* bank, const PrototypeEncoder& enc,
                               StyleTag query_style) {
    const int max_k = *std::max_element(cfg.eval_ks.begin(), cfg.eval_ks.end());
    const int k = std::min<int>(max_k, static_cast<int>(index.size()));
    std::map<uint64_t, RankedResult> results;
    std::map<uint64_t, uint64_t> gt;
    for (const auto& [c, i] : dataset.split_pairs(false)) {
        const QuerySample q = dataset.sample(c, i, query_style);
        const uint64_t qid = record_id(c, i, query_style);
        results[qid] = query(index, q, backbone, bank, enc, k);
        gt[qid] = record_id(c, i, StyleTag::natural);
    }
    TaskEval out;
    out.num_queries = static_cast<int>(results.size());
    for (int kk : cfg.eval_ks) out.recall[kk] = recall_at_k(results, gt, kk);
    return out;
}

TaskEval evaluate_fusion(const RunConfig& cfg, const Dataset& dataset, const RetrievalIndex& index,
                         const Backbone& backbone, const PromptBank* bank,
                         const PrototypeEncoder& enc, const std::vector<StyleTag>& styles) {
    const int max_k = *std::max_element(cfg.eval_ks.begin(), cfg.eval_ks.end());
    const int k = std::min<int>(max_k, static_cast<int>(index.size()));
    std::map<uint64_t, RankedResult> results;
    std::map<uint64_t, uint64_t> gt;
    for (const auto& [c, i] : dataset.split_pairs(false)) {
        std::vector<std::vector<double>> embs;
        for (StyleTag s : styles) {
            const QuerySample q = dataset.sample(c, i, s);
            std::optional<LookupResult> lk;
            if (bank) lk = lookup(*bank, query_prototype(q, enc));
            embs.push_back(forward(backbone, q, bank, lk ? &*lk : nullptr).v);
        }
        const uint64_t qid = record_id(c, i, styles.front());
        results[qid] = rank_embedding(index, fuse_queries(embs), k);
        gt[qid] = record_id(c, i, StyleTag::natural);
    }
    TaskEval out;
    out.num_queries = static_cast<int>(results.size());
    for (int kk : cfg.eval_ks) out.recall[kk] = recall_at_k(results, gt, kk);
    return out;
}

std::vector<QuerySample> test_queries(const Dataset& dataset, StyleTag style) {
    std::vector<QuerySample> out;
    for (const auto& [c, i] : dataset.split_pairs(false)) out.push_back(dataset.sample(c, i, style));
    return out;
}

}  // namespace

void stage_evaluate(const RunConfig& cfg, const std::vector<std::string>& task_filter) {
    const Dataset dataset = load_dataset(cfg.effective_dataset_dir());
    const Backbone backbone = load_backbone(cfg.out_dir / "backbone.bin");
    const PromptBank bank = load_bank(cfg.out_dir / "bank.bin");
    const PrototypeEncoder enc = pipeline_prototype_encoder(cfg);
    const RetrievalIndex index = load_index(cfg.out_dir / "index.bin");
    verify_provenance(index, bank_hash(bank), backbone.content_hash());

    std::optional<RetrievalIndex> baseline_index;
    if (cfg.eval_baseline) {
        baseline_index = load_index(cfg.out_dir / "baseline_index.bin");
        verify_provenance(*baseline_index, Digest{}, backbone.content_hash());
    }

    std::vector<StyleTag> eval_tasks = cfg.eval_tasks;
    if (eval_tasks.empty()) {
        eval_tasks = cfg.tasks;
        if (cfg.held_out_style &&
            std::find(eval_tasks.begin(), eval_tasks.end(), *cfg.held_out_style) == eval_tasks.end())
            eval_tasks.push_back(*cfg.held_out_style);
    }
    if (!task_filter.empty()) {
        std::vector<StyleTag> filtered;
        for (const std::string& name : task_filter) filtered.push_back(parse_task(name));
        eval_tasks = filtered;
    }

    json tasks_json = json::object();
    for (StyleTag style : eval_tasks) {
        const TaskEval ev = evaluate_single_style(cfg, dataset, index, backbone, &bank, enc, style);
        json t;
        for (int k : cfg.eval_ks) t[recall_key(k)] = ev.recall.at(k);
        t["num_queries"] = ev.num_queries;
        if (cfg.measure_latency) {
            const LatencyReport lat = measure_latency(index, test_queries(dataset, style), backbone,
                                                      &bank, enc, cfg.latency_reps);
            t["latency_ms"] = lat.embed.mean_ms + lat.rank.mean_ms;
        } else {
            t["latency_ms"] = nullptr;
        }
        if (baseline_index) {
            const TaskEval base =
                evaluate_single_style(cfg, dataset, *baseline_index, backbone, nullptr, enc, style);
            for (int k : cfg.eval_ks) t["baseline_" + recall_key(k)] = base.recall.at(k);
        }
        tasks_json[task_name(style)] = t;
    }

    json fusion_json = json::object();
    if (task_filter.empty()) {
        for (const auto& styles : cfg.fusion_tasks) {
            const TaskEval ev = evaluate_fusion(cfg, dataset, index, backbone, &bank, enc, styles);
            json t;
            for (int k : cfg.eval_ks) t[recall_key(k)] = ev.recall.at(k);
            t["num_queries"] = ev.num_queries;
            t["latency_ms"] = nullptr;
            fusion_json[fusion_task_name(styles)] = t;
        }
    }

    json j;
    j["format_version"] = 1;
    j["seed"] = cfg.seed;
    j["num_targets"] = static_cast<int>(index.size());
    j["provenance"] = {{"backbone_sha256", hex(backbone.content_hash())},
                       {"bank_sha256", hex(bank_hash(bank))},
                       {"manifest_sha256", hex(dataset_manifest_hash(cfg.effective_dataset_dir()))},
                       {"index_sha256", hex(index_hash(index))}};
    // Frozen-backbone check carried over from the tuning stage.
    {
        std::ifstream tr(cfg.out_dir / "train_report.json");
        if (tr) {
            const json t = json::parse(tr);
            j["frozen_backbone"] = {
                {"hash_before_tuning", t.at("backbone_hash_before").get<std::string>()},
                {"hash_after_tuning", t.at("backbone_hash_after").get<std::string>()},
                {"unchanged", t.at("backbone_hash_before") == t.at("backbone_hash_after")}};
        }
    }
    j["tasks"] = tasks_json;
    j["fusion"] = fusion_json;

    std::ofstream out(cfg.out_dir / "results.json", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("stage_evaluate: cannot write results.json");
    out << j.dump(2) << "\n";
}

EvalResults run_pipeline(const RunConfig& cfg) {
    validate_run_config(cfg);
    stage_generate(cfg);
    stage_warmup(cfg);
    stage_train(cfg);
    stage_index(cfg);
    stage_evaluate(cfg);
    return read_results(cfg.out_dir / "results.json");
}

namespace {

TaskMetrics task_metrics_from_json(const json& t) {
    TaskMetrics m;
    for (auto it = t.begin(); it != t.end(); ++it) {
        const std::string& key = it.key();
        if (key.rfind("baseline_r_at_", 0) == 0)
            m.baseline_recall[std::stoi(key.substr(14))] = it.value().get<double>();
        else if (key.rfind("r_at_", 0) == 0)
            m.recall[std::stoi(key.substr(5))] = it.value().get<double>();
    }
    m.num_queries = t.at("num_queries").get<int>();
    if (t.contains("latency_ms") && !t.at("latency_ms").is_null())
        m.latency_ms = t.at("latency_ms").get<double>();
    return m;
}

}  // namespace

EvalResults read_results(const std::filesystem::path& results_json) {
    std::ifstream in(results_json);
    if (!in) throw std::runtime_error("cannot open results " + results_json.string());
    const json j = json::parse(in);
    EvalResults r;
    r.seed = j.at("seed").get<uint64_t>();
    r.num_targets = j.at("num_targets").get<int>();
    r.backbone_sha256 = j.at("provenance").at("backbone_sha256").get<std::string>();
    r.bank_sha256 = j.at("provenance").at("bank_sha256").get<std::string>();
    r.manifest_sha256 = j.at("provenance").at("manifest_sha256").get<std::string>();
    r.index_sha256 = j.at("provenance").at("index_sha256").get<std::string>();
    if (j.contains("frozen_backbone")) {
        r.backbone_hash_before_tuning = j.at("frozen_backbone").at("hash_before_tuning").get<std::string>();
        r.backbone_hash_after_tuning = j.at("frozen_backbone").at("hash_after_tuning").get<std::string>();
        r.backbone_unchanged = j.at("frozen_backbone").at("unchanged").get<bool>();
    }
    for (auto it = j.at("tasks").begin(); it != j.at("tasks").end(); ++it)
        r.tasks[it.key()] = task_metrics_from_json(it.value());
    if (j.contains("fusion"))
        for (auto it = j.at("fusion").begin(); it != j.at("fusion").end(); ++it)
            r.fusion[it.key()] = task_metrics_from_json(it.value());
    return r;
}

std::vector<AblationRow> ablate(const RunConfig& base, const std::string& axis,
                                std::vector<std::string> values) {
    if (values.empty()) {
        if (axis == "insertion_mode") values = {"deep", "shallow"};
        else if (axis == "n") values = {"1", "2", "4", "8"};
        else if (axis == "N") values = {"4", "8", "12", "16"};
        else throw std::invalid_argument("ablate: unknown axis '" + axis + "'");
    }

    // One dataset shared by every row.
    RunConfig shared = base;
    shared.dataset_dir = base.out_dir / "dataset";
    stage_generate(shared);
    const std::string dataset_sha = hex(dataset_manifest_hash(shared.dataset_dir));

    std::vector<AblationRow> rows;
    for (const std::string& value : values) {
        RunConfig cfg = shared;
        cfg.out_dir = base.out_dir / ("ablate_" + axis + "_" + value);
        if (axis == "insertion_mode") cfg.bank.mode = parse_insertion_mode(value);
        else if (axis == "n") cfg.bank.select = std::stoi(value);
        else if (axis == "N") cfg.bank.entries = std::stoi(value);
        AblationRow row;
        row.value = value;
        row.dataset_sha256 = dataset_sha;
        row.results = run_pipeline(cfg);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_ablation_table(const std::string& axis, const std::vector<AblationRow>& rows,
                                  const std::vector<int>& ks) {
    std::ostringstream out;
    out << axis;
    if (!rows.empty())
        for (const auto& [name, metrics] : rows.front().results.tasks)
            for (int k : ks) out << "\t" << name << "@" << k;
    out << "\n";
    for (const AblationRow& row : rows) {
        out << row.value;
        for (const auto& [name, metrics] : row.results.tasks)
            for (int k : ks) out << "\t" << metrics.recall.at(k);
        out << "\n";
    }
    return out.str();
}

}  // namespace stylebank
