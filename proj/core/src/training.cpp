#include "stylebank/training.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace stylebank {

namespace {

void check_unit(const Embedding& e, const char* who) {
    const double n = l2_norm(e.v);
    if (std::fabs(n - 1.0) > 1e-6)
        throw std::invalid_argument(std::string(who) + ": input embedding is not unit-norm");
}

}  // namespace

double distance(const Embedding& a, const Embedding& b) {
    check_unit(a, "distance");
    check_unit(b, "distance");
    return 1.0 - dot(a.v, b.v);
}

double triplet_loss(const Embedding& xf, const Embedding& xr, const Embedding& xh, double margin) {
    const double v = margin + distance(xf, xr) - distance(xf, xh);
    return v > 0.0 ? v : 0.0;
}

TripletBatch sample_triplet(const Dataset& dataset, const RetrievalTask& task,
                            const PrototypeEncoder& enc, std::mt19937_64& rng) {
    if (dataset.manifest.num_classes < 2)
        throw std::invalid_argument("sample_triplet: need at least 2 classes");
    const auto pairs = dataset.split_pairs(true);
    if (pairs.empty()) throw std::invalid_argument("sample_triplet: empty train split");

    std::uniform_int_distribution<size_t> pick(0, pairs.size() - 1);
    const auto [c, i] = pairs[pick(rng)];
    TripletBatch t;
    t.anchor = dataset.sample(c, i, task.query_style);
    t.positive = dataset.sample(c, i, task.target_style);
    // Uniform over different-class target-style samples.
    while (true) {
        const auto [cn, in] = pairs[pick(rng)];
        if (cn == c) continue;
        t.negative = dataset.sample(cn, in, task.target_style);
        break;
    }
    t.anchor_proto = query_prototype(t.anchor, enc);
    t.positive_proto = query_prototype(t.positive, enc);
    t.negative_proto = query_prototype(t.negative, enc);
    return t;
}

Graph::Id triplet_loss_node(Graph& g, Graph::Id anchor, Graph::Id positive, Graph::Id negative,
                            double margin) {
    // d(a, b) = 1 - <a, b>; both distances share the 1-offset so it cancels.
    Graph::Id d_pos = g.add_const(g.scale(g.dot_rows(anchor, positive), -1.0), 1.0);
    Graph::Id d_neg = g.add_const(g.scale(g.dot_rows(anchor, negative), -1.0), 1.0);
    return g.relu(g.add_const(g.sub(d_pos, d_neg), margin));
}

Graph::Id forward_sample_graph(Graph& g, const BackboneLeaves& bl, const BackboneConfig& cfg,
                               const QuerySample& sample, const PromptBank* bank,
                               const LookupResult* lk, const SelectedLeaves* sel) {
    Graph::Id xe;
    std::vector<uint8_t> mask;
    if (sample.modality == Modality::image) {
        xe = image_tokens_graph(g, bl, cfg, sample.image);
        mask.assign(cfg.n_patches(), 1);
    } else {
        xe = text_tokens_graph(g, bl, cfg, sample.text, &mask);
    }
    return encode_graph(g, bl, cfg, xe, mask, bank, lk, sel);
}

namespace {

// gamma(prototype, key) with the prototype folded to a unit constant; the key
// stays a graph node so the alignment term can move it.
Graph::Id gamma_node(Graph& g, const std::vector<double>& prototype, Graph::Id key) {
    std::vector<double> p = prototype;
    l2_normalize(p);
    Mat pm(1, static_cast<int>(p.size()));
    for (size_t c = 0; c < p.size(); ++c) pm(0, static_cast<int>(c)) = p[c];
    const Graph::Id pleaf = g.leaf(std::move(pm), false);
    const Graph::Id key_norm = g.sqrt_scalar(g.dot_rows(key, key));
    const Graph::Id cos = g.div_scalars(g.dot_rows(pleaf, key), key_norm);
    return g.add_const(g.scale(cos, -1.0), 1.0);
}

struct LossParts {
    Graph::Id joint;
    double triplet_mean = 0.0;
    double alignment_mean = 0.0;
};

LossParts build_joint_loss(Graph& g, const std::vector<TripletBatch>& batch, const PromptBank& bank,
                           const Backbone& backbone, double lambda, double margin, bool trainable,
                           SelectedLeaves& sel) {
    if (batch.empty()) throw std::invalid_argument("joint loss: empty batch");
    BackboneLeaves bl = add_backbone_leaves(g, backbone, false);

    std::vector<Graph::Id> trip_terms;
    std::vector<Graph::Id> align_terms;
    for (const TripletBatch& t : batch) {
        const LookupResult lk_a = lookup(bank, t.anchor_proto);
        const LookupResult lk_p = lookup(bank, t.positive_proto);
        const LookupResult lk_n = lookup(bank, t.negative_proto);
        add_selected_prompt_leaves(g, bank, lk_a, trainable, sel);
        add_selected_prompt_leaves(g, bank, lk_p, trainable, sel);
        add_selected_prompt_leaves(g, bank, lk_n, trainable, sel);

        const Graph::Id ea = forward_sample_graph(g, bl, backbone.cfg, t.anchor, &bank, &lk_a, &sel);
        const Graph::Id ep = forward_sample_graph(g, bl, backbone.cfg, t.positive, &bank, &lk_p, &sel);
        const Graph::Id en = forward_sample_graph(g, bl, backbone.cfg, t.negative, &bank, &lk_n, &sel);
        trip_terms.push_back(triplet_loss_node(g, ea, ep, en, margin));

        // Alignment acts on the anchor's selection only (q(x) is the anchor prototype).
        std::vector<Graph::Id> gammas;
        for (int id : lk_a.selected_ids) gammas.push_back(gamma_node(g, t.anchor_proto, sel.keys.at(id)));
        Graph::Id align = gammas.front();
        for (size_t i = 1; i < gammas.size(); ++i) align = g.add(align, gammas[i]);
        align_terms.push_back(align);
    }

    const Graph::Id trip_mean = g.mean_scalars(trip_terms);
    const Graph::Id align_mean = g.mean_scalars(align_terms);
    LossParts parts;
    parts.joint = g.add(trip_mean, g.scale(align_mean, lambda));
    parts.triplet_mean = g.scalar(trip_mean);
    parts.alignment_mean = g.scalar(align_mean);
    return parts;
}

}  // namespace

double joint_loss(const std::vector<TripletBatch>& batch, const PromptBank& bank,
                  const Backbone& backbone, double lambda, double margin) {
    Graph g;
    SelectedLeaves sel;
    const LossParts parts = build_joint_loss(g, batch, bank, backbone, lambda, margin, false, sel);
    return g.scalar(parts.joint);
}

BankGradients compute_gradients(const std::vector<TripletBatch>& batch, const PromptBank& bank,
                                const Backbone& backbone, const TrainConfig& cfg) {
    if (!backbone.frozen) throw std::logic_error("compute_gradients: backbone must be frozen");
    Graph g;
    SelectedLeaves sel;
    const LossParts parts =
        build_joint_loss(g, batch, bank, backbone, cfg.lambda, cfg.margin, true, sel);
    BankGradients out;
    out.joint = g.scalar(parts.joint);
    out.triplet = parts.triplet_mean;
    out.alignment = parts.alignment_mean;
    if (!std::isfinite(out.joint)) throw std::runtime_error("compute_gradients: non-finite loss");
    g.backward(parts.joint);
    for (const auto& [id, leaf] : sel.keys) {
        const Mat& gk = g.grad(leaf);
        out.key_grads[id].assign(gk.v.begin(), gk.v.end());
    }
    for (const auto& [id, leaves] : sel.values) {
        std::vector<Mat> grads;
        for (Graph::Id leaf : leaves) grads.push_back(g.grad(leaf));
        out.value_grads[id] = std::move(grads);
    }
    return out;
}

TrainReport fit(const Dataset& dataset, PromptBank& bank, const Backbone& backbone,
                const PrototypeEncoder& enc, const TrainConfig& cfg,
                const std::vector<RetrievalTask>& tasks, std::ostream* log) {
    if (!backbone.frozen) throw std::logic_error("fit: backbone must be frozen");
    if (tasks.empty()) throw std::invalid_argument("fit: no tasks");
    if (cfg.batch_size < 1 || cfg.epochs < 0 || cfg.learning_rate <= 0.0 || cfg.margin <= 0.0 ||
        cfg.lambda < 0.0)
        throw std::invalid_argument("fit: bad training config");

    TrainReport report;
    const Digest before = backbone.content_hash();
    report.backbone_hash_before = hex(before);
    for (const BankEntry& e : bank.entries) {
        report.trainable_scalars += e.key.size();
        for (const Mat& v : e.values) report.trainable_scalars += v.size();
    }
    report.total_scalars = backbone.total_scalars() + report.trainable_scalars;

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<size_t> task_pick(0, tasks.size() - 1);

    const size_t anchors = dataset.split_pairs(true).size() * tasks.size();
    const int steps_per_epoch =
        static_cast<int>((anchors + cfg.batch_size - 1) / static_cast<size_t>(cfg.batch_size));

    int global_step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double sum_joint = 0.0, sum_trip = 0.0, sum_align = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step, ++global_step) {
            std::vector<TripletBatch> batch;
            batch.reserve(cfg.batch_size);
            for (int b = 0; b < cfg.batch_size; ++b)
                batch.push_back(sample_triplet(dataset, tasks[task_pick(rng)], enc, rng));

            BankGradients grads;
            try {
                grads = compute_gradients(batch, bank, backbone, cfg);
            } catch (const std::runtime_error& e) {
                throw std::runtime_error("fit: aborted at step " + std::to_string(global_step) +
                                         ": " + e.what());
            }
            for (const auto& [id, gk] : grads.key_grads) {
                auto& key = bank.entries[id].key;
                for (size_t c = 0; c < key.size(); ++c) key[c] -= cfg.learning_rate * gk[c];
            }
            for (const auto& [id, gv] : grads.value_grads) {
                auto& values = bank.entries[id].values;
                for (size_t layer = 0; layer < gv.size(); ++layer)
                    axpy_inplace(values[layer], -cfg.learning_rate, gv[layer]);
            }

            sum_joint += grads.joint;
            sum_trip += grads.triplet;
            sum_align += grads.alignment;
            if (log) {
                *log << "{\"epoch\":" << epoch << ",\"step\":" << global_step
                     << ",\"triplet\":" << grads.triplet << ",\"alignment\":" << grads.alignment
                     << ",\"joint\":" << grads.joint << ",\"backbone_hash\":\""
                     << hex(backbone.content_hash()) << "\"}\n";
            }
        }
        report.epoch_joint.push_back(sum_joint / steps_per_epoch);
        report.epoch_triplet.push_back(sum_trip / steps_per_epoch);
        report.epoch_alignment.push_back(sum_align / steps_per_epoch);
        const auto t1 = std::chrono::steady_clock::now();
        report.epoch_wall_ms.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    report.steps = global_step;
    report.backbone_hash_after = hex(backbone.content_hash());
    if (report.backbone_hash_after != report.backbone_hash_before)
        throw std::logic_error("fit: frozen backbone changed during prompt tuning");
    return report;
}

}  // namespace stylebank
