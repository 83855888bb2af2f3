#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include "stylebank/training.hpp"

namespace stylebank {

WarmupReport warmup_backbone(const Dataset& dataset, Backbone& backbone, const WarmupConfig& cfg) {
    if (backbone.frozen) throw std::logic_error("warmup_backbone: backbone is already frozen");
    if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.learning_rate <= 0.0 || cfg.margin <= 0.0)
        throw std::invalid_argument("warmup_backbone: bad config");
    const auto pairs = dataset.split_pairs(true);
    if (pairs.empty()) throw std::invalid_argument("warmup_backbone: empty dataset");
    if (dataset.manifest.num_classes < 2)
        throw std::invalid_argument("warmup_backbone: need at least 2 classes");

    WarmupReport report;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<size_t> pick(0, pairs.size() - 1);
    std::uniform_int_distribution<int> coin(0, 1);

    // Both directions count: a text anchor against image targets and the reverse.
    const size_t anchors = pairs.size() * 2;
    const int steps_per_epoch =
        static_cast<int>((anchors + cfg.batch_size - 1) / static_cast<size_t>(cfg.batch_size));

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double epoch_loss = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            Graph g;
            BackboneLeaves bl = add_backbone_leaves(g, backbone, true);
            std::vector<Graph::Id> terms;
            for (int b = 0; b < cfg.batch_size; ++b) {
                const auto [c, i] = pairs[pick(rng)];
                int cn, in;
                do {
                    const auto [c2, i2] = pairs[pick(rng)];
                    cn = c2;
                    in = i2;
                } while (cn == c);
                const bool text_anchor = coin(rng) == 0;
                const QuerySample anchor =
                    dataset.sample(c, i, text_anchor ? StyleTag::text : StyleTag::natural);
                const QuerySample positive =
                    dataset.sample(c, i, text_anchor ? StyleTag::natural : StyleTag::text);
                const QuerySample negative =
                    dataset.sample(cn, in, text_anchor ? StyleTag::natural : StyleTag::text);
                const Graph::Id ea =
                    forward_sample_graph(g, bl, backbone.cfg, anchor, nullptr, nullptr, nullptr);
                const Graph::Id ep =
                    forward_sample_graph(g, bl, backbone.cfg, positive, nullptr, nullptr, nullptr);
                const Graph::Id en =
                    forward_sample_graph(g, bl, backbone.cfg, negative, nullptr, nullptr, nullptr);
                terms.push_back(triplet_loss_node(g, ea, ep, en, cfg.margin));
            }
            const Graph::Id loss = g.mean_scalars(terms);
            const double value = g.scalar(loss);
            if (!std::isfinite(value))
                throw std::runtime_error("warmup_backbone: non-finite loss at epoch " +
                                         std::to_string(epoch) + " step " + std::to_string(step));
            epoch_loss += value;
            if (value > 0.0) {
                g.backward(loss);
                std::vector<Mat*> params = backbone.params();
                for (size_t p = 0; p < params.size(); ++p)
                    axpy_inplace(*params[p], -cfg.learning_rate, g.grad(bl.all[p]));
            }
        }
        report.epoch_mean_loss.push_back(epoch_loss / steps_per_epoch);
        const auto t1 = std::chrono::steady_clock::now();
        report.epoch_wall_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }

    backbone.frozen = true;
    report.hash_after = backbone.content_hash();
    return report;
}

}  // namespace stylebank
