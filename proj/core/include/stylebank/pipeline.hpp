#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stylebank/encoder.hpp"
#include "stylebank/retrieval.hpp"
#include "stylebank/training.hpp"

namespace stylebank {

struct BankConfig {
    int entries = 12;
    int select = 4;
    int tokens_per_entry = 1;
    InsertionMode mode = InsertionMode::deep;
};

/// One config drives every stage. Per-module seeds derive from the root seed
/// unless the config file pins them explicitly.
struct RunConfig {
    uint64_t seed = 42;
    std::filesystem::path out_dir = "run";
    std::filesystem::path dataset_dir;  // empty -> out_dir/dataset
    GenerateConfig dataset;
    BackboneConfig backbone;
    BankConfig bank;
    WarmupConfig warmup;
    TrainConfig train;
    std::vector<StyleTag> tasks = {StyleTag::text, StyleTag::sketch, StyleTag::art,
                                   StyleTag::lowres};
    std::vector<std::vector<StyleTag>> fusion_tasks = {{StyleTag::text, StyleTag::sketch}};
    std::vector<StyleTag> eval_tasks;  // empty -> tasks, plus held_out_style when set
    std::vector<int> eval_ks = {1, 5};
    bool eval_baseline = true;
    std::optional<StyleTag> held_out_style;  // dropped from bank init and tuning tasks
    // Wall-clock latency in results.json is opt-in: it breaks byte-for-byte
    // reproducibility of the results file.
    bool measure_latency = false;
    int latency_reps = 5;

    std::filesystem::path effective_dataset_dir() const {
        return dataset_dir.empty() ? out_dir / "dataset" : dataset_dir;
    }
};

RunConfig default_run_config();
RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json_text(const RunConfig& cfg);
// Fails fast (before any stage runs) on inconsistent settings, e.g. n > N.
void validate_run_config(const RunConfig& cfg);

std::string task_name(StyleTag query_style);                        // "sketch2image"
std::string fusion_task_name(const std::vector<StyleTag>& styles);  // "text+sketch2image"
StyleTag parse_task(const std::string& name);
std::vector<StyleTag> parse_fusion_task(const std::string& name);

struct TaskMetrics {
    std::map<int, double> recall;           // k -> R@k
    std::map<int, double> baseline_recall;  // empty when baseline evaluation is off
    int num_queries = 0;
    std::optional<double> latency_ms;
};

struct EvalResults {
    uint64_t seed = 0;
    int num_targets = 0;
    std::string backbone_sha256, bank_sha256, manifest_sha256, index_sha256;
    std::string backbone_hash_before_tuning, backbone_hash_after_tuning;
    bool backbone_unchanged = false;
    std::map<std::string, TaskMetrics> tasks;
    std::map<std::string, TaskMetrics> fusion;
};

// Stage functions are file-mediated: each consumes only artifacts written by
// earlier stages plus the config, so CLI subcommands and run_pipeline share them.
void stage_generate(const RunConfig& cfg);
void stage_warmup(const RunConfig& cfg);
void stage_train(const RunConfig& cfg);
void stage_index(const RunConfig& cfg);
void stage_evaluate(const RunConfig& cfg, const std::vector<std::string>& task_filter = {});

EvalResults run_pipeline(const RunConfig& cfg);
EvalResults read_results(const std::filesystem::path& results_json);

struct AblationRow {
    std::string value;
    std::string dataset_sha256;
    EvalResults results;
};

// One pipeline run per axis value with the shared seed and a shared dataset.
// Axis is one of "insertion_mode", "n", "N"; empty values pick the defaults
// {deep, shallow}, {1, 2, 4, 8}, {4, 8, 12, 16}.
std::vector<AblationRow> ablate(const RunConfig& base, const std::string& axis,
                                std::vector<std::string> values = {});
std::string format_ablation_table(const std::string& axis, const std::vector<AblationRow>& rows,
                                  const std::vector<int>& ks);

// Re-derives the prototype encoder every stage uses; it is config-determined
// and never persisted.
PrototypeEncoder pipeline_prototype_encoder(const RunConfig& cfg);

}  // namespace stylebank
