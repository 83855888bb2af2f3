#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "stylebank/encoder.hpp"
#include "stylebank/prototype.hpp"

namespace stylebank {

/// One anchor/positive/negative draw with the prototypes the lookup step needs.
struct TripletBatch {
    QuerySample anchor;
    QuerySample positive;
    QuerySample negative;
    std::vector<double> anchor_proto;
    std::vector<double> positive_proto;
    std::vector<double> negative_proto;
};

struct RetrievalTask {
    StyleTag query_style = StyleTag::sketch;
    StyleTag target_style = StyleTag::natural;
};

struct TrainConfig {
    double margin = 0.2;
    double lambda = 0.5;
    double learning_rate = 1e-2;
    int epochs = 10;
    int batch_size = 16;
    uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> epoch_joint;
    std::vector<double> epoch_triplet;
    std::vector<double> epoch_alignment;
    std::vector<double> epoch_wall_ms;
    std::string backbone_hash_before;
    std::string backbone_hash_after;
    size_t trainable_scalars = 0;
    size_t total_scalars = 0;
    int steps = 0;
};

// d(a, b) = 1 - <a, b> for unit vectors; rejects non-normalized inputs.
double distance(const Embedding& a, const Embedding& b);
double triplet_loss(const Embedding& xf, const Embedding& xr, const Embedding& xh, double margin);

// Anchor uniform over the train split of the query style; positive is the same
// (class, instance) in the target style; negative uniform over other-class
// target-style samples.
TripletBatch sample_triplet(const Dataset& dataset, const RetrievalTask& task,
                            const PrototypeEncoder& enc, std::mt19937_64& rng);

struct BankGradients {
    std::map<int, std::vector<double>> key_grads;        // entry id -> d
    std::map<int, std::vector<Mat>> value_grads;         // entry id -> per stored layer
    double joint = 0.0;
    double triplet = 0.0;
    double alignment = 0.0;
};

// Mean triplet loss plus lambda times the mean anchor-key alignment term.
double joint_loss(const std::vector<TripletBatch>& batch, const PromptBank& bank,
                  const Backbone& backbone, double lambda, double margin);

// Exact gradients of the joint loss for the entries selected anywhere in the
// batch; the top-n selection itself is non-differentiable and contributes none.
BankGradients compute_gradients(const std::vector<TripletBatch>& batch, const PromptBank& bank,
                                const Backbone& backbone, const TrainConfig& cfg);

// Prompt tuning loop: per step sample triplets, look up, expand, encode, take
// one SGD step on the selected keys and prompt values. Backbone stays frozen.
// `log` receives one JSON line per step when non-null.
TrainReport fit(const Dataset& dataset, PromptBank& bank, const Backbone& backbone,
                const PrototypeEncoder& enc, const TrainConfig& cfg,
                const std::vector<RetrievalTask>& tasks, std::ostream* log = nullptr);

// Graph helpers shared with the warmup path.
Graph::Id triplet_loss_node(Graph& g, Graph::Id anchor, Graph::Id positive, Graph::Id negative,
                            double margin);
Graph::Id forward_sample_graph(Graph& g, const BackboneLeaves& bl, const BackboneConfig& cfg,
                               const QuerySample& sample, const PromptBank* bank,
                               const LookupResult* lk, const SelectedLeaves* sel);

}  // namespace stylebank
