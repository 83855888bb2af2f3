#include "stylebank/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace stylebank {

namespace {

QuerySample make_image_sample(int class_id, int instance_id, StyleTag style, int image_size,
                              uint64_t seed) {
    SynthImage natural = render_natural_image(class_id, instance_id, 4, image_size);
    QuerySample q;
    q.modality = Modality::image;
    q.style = style;
    q.class_id = class_id;
    q.instance_id = instance_id;
    q.image = style == StyleTag::natural ? natural : apply_style(natural, style, seed);
    return q;
}

QuerySample make_text_sample(int class_id, int instance_id) {
    QuerySample q;
    q.modality = Modality::text;
    q.style = StyleTag::text;
    q.class_id = class_id;
    q.instance_id = instance_id;
    q.text = render_text(class_id, instance_id, kDefaultVocabSize, 16, 4);
    return q;
}

}  // namespace

GradCheckResult gradient_check(const GradCheckConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();

    BackboneConfig bc;
    bc.layers = cfg.layers;
    bc.d = cfg.d;
    bc.heads = cfg.heads;
    bc.mlp_ratio = cfg.mlp_ratio;
    bc.patch_size = cfg.patch_size;
    bc.image_size = cfg.image_size;
    bc.seed = derive_seed(cfg.seed, "gradcheck/backbone");
    Backbone backbone = make_backbone(bc);
    backbone.frozen = true;

    const PrototypeEncoder enc = make_prototype_encoder(
        cfg.d, cfg.patch_size, cfg.image_size, 3, kDefaultVocabSize,
        derive_seed(cfg.seed, "gradcheck/proto"));

    // A couple of style prototypes so some keys start structured.
    std::vector<StylePrototype> protos;
    {
        std::vector<std::vector<double>> sketch_feats, text_feats;
        for (int c = 0; c < 2; ++c) {
            sketch_feats.push_back(embed_style_sample(
                make_image_sample(c, 0, StyleTag::sketch, cfg.image_size, 11 + c), enc));
            text_feats.push_back(embed_style_sample(make_text_sample(c, 1), enc));
        }
        protos.push_back(compute_prototype(sketch_feats, StyleTag::sketch));
        protos.push_back(compute_prototype(text_feats, StyleTag::text));
    }
    PromptBank bank = new_bank(cfg.entries, cfg.n_select, cfg.layers, cfg.d, cfg.mode,
                               derive_seed(cfg.seed, "gradcheck/bank"), protos,
                               cfg.tokens_per_entry);

    std::mt19937_64 rng(derive_seed(cfg.seed, "gradcheck/batch"));
    std::vector<TripletBatch> batch;
    for (int b = 0; b < cfg.batch; ++b) {
        TripletBatch t;
        if (b % 2 == 0) {
            t.anchor = make_image_sample(0, b, StyleTag::sketch, cfg.image_size, rng());
            t.positive = make_image_sample(0, b, StyleTag::natural, cfg.image_size, rng());
            t.negative = make_image_sample(1, b, StyleTag::natural, cfg.image_size, rng());
        } else {
            t.anchor = make_text_sample(1, b);
            t.positive = make_image_sample(1, b, StyleTag::natural, cfg.image_size, rng());
            t.negative = make_image_sample(2, b, StyleTag::natural, cfg.image_size, rng());
        }
        t.anchor_proto = query_prototype(t.anchor, enc);
        t.positive_proto = query_prototype(t.positive, enc);
        t.negative_proto = query_prototype(t.negative, enc);
        batch.push_back(std::move(t));
    }

    TrainConfig tc;
    tc.lambda = cfg.lambda;
    tc.margin = cfg.margin;
    const BankGradients analytic = compute_gradients(batch, bank, backbone, tc);

    GradCheckResult result;
    const double h = cfg.step;
    auto rel_error = [](double a, double fd) {
        const double denom = std::max({std::fabs(a), std::fabs(fd), 1e-8});
        return std::fabs(a - fd) / denom;
    };
    auto record = [&](double a, double fd, const std::string& where) {
        const double err = rel_error(a, fd);
        ++result.scalars_checked;
        if (err > result.max_rel_error) {
            result.max_rel_error = err;
            result.worst_location = where;
        }
    };
    auto loss_at = [&](PromptBank& perturbed) {
        return joint_loss(batch, perturbed, backbone, cfg.lambda, cfg.margin);
    };

    for (int e = 0; e < bank.size(); ++e) {
        const auto key_it = analytic.key_grads.find(e);
        for (int c = 0; c < bank.d; ++c) {
            PromptBank p = bank;
            p.entries[e].key[c] += h;
            const double fp = loss_at(p);
            p.entries[e].key[c] -= 2 * h;
            const double fm = loss_at(p);
            const double fd = (fp - fm) / (2 * h);
            const double a = key_it == analytic.key_grads.end() ? 0.0 : key_it->second[c];
            record(a, fd, "key[" + std::to_string(e) + "][" + std::to_string(c) + "]");
        }
        const auto val_it = analytic.value_grads.find(e);
        for (int layer = 0; layer < bank.value_layers; ++layer) {
            for (size_t idx = 0; idx < bank.entries[e].values[layer].v.size(); ++idx) {
                PromptBank p = bank;
                p.entries[e].values[layer].v[idx] += h;
                const double fp = loss_at(p);
                p.entries[e].values[layer].v[idx] -= 2 * h;
                const double fm = loss_at(p);
                const double fd = (fp - fm) / (2 * h);
                const double a =
                    val_it == analytic.value_grads.end() ? 0.0 : val_it->second[layer].v[idx];
                record(a, fd, "value[" + std::to_string(e) + "][" + std::to_string(layer) + "][" +
                                  std::to_string(idx) + "]");
            }
        }
    }

    const auto t1 = std::chrono::steady_clock::now();
    result.elapsed_s = std::chrono::duration<double>(t1 - t0).count();
    result.pass = result.max_rel_error < cfg.threshold;
    return result;
}

}  // namespace stylebank
