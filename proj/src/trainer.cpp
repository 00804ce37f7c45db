#include "convfit/trainer.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

#include "convfit/pairing.hpp"
#include "convfit/rng.hpp"

namespace convfit {

namespace {

Tensor clone_tensor(const Tensor& t) {
    return Tensor::from(t.shape(), t.value(), t.requires_grad());
}

// One flattened training example for stage 2.
struct FlatPair {
    std::size_t a;
    std::size_t b;
    bool positive;
};

}  // namespace

Checkpoint train_stage1(const std::vector<ResponsePair>& corpus,
                        const EncoderConfig& enc_cfg,
                        const EncoderParams& init_params,
                        const OptimConfig& opt_cfg,
                        const LossConfig& loss_cfg) {
    enc_cfg.validate();
    opt_cfg.validate(true);
    loss_cfg.validate();
    if (enc_cfg.mode != "trainable")
        throw std::invalid_argument(
            "train_stage1: encoder mode must be trainable");
    if (init_params.projection_enabled)
        throw std::invalid_argument(
            "train_stage1: params already carry a projection head");
    if (corpus.size() < opt_cfg.batch_size)
        throw std::invalid_argument(
            "train_stage1: corpus smaller than one batch");

    EncoderParams params;
    params.embedding_table = clone_tensor(init_params.embedding_table);

    AdamW opt(opt_cfg);
    opt.add_param("embedding_table", params.embedding_table);

    const std::size_t batches_per_epoch = corpus.size() / opt_cfg.batch_size;
    const std::size_t total_steps = opt_cfg.epochs * batches_per_epoch;

    std::vector<double> loss_history;
    loss_history.reserve(total_steps);
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < opt_cfg.epochs; ++epoch) {
        auto batches = make_mneg_batches(corpus, opt_cfg.batch_size,
                                         opt_cfg.seed + epoch);
        for (const auto& batch : batches) {
            std::vector<std::string> contexts, responses;
            contexts.reserve(batch.size());
            responses.reserve(batch.size());
            for (const auto& pair : batch) {
                contexts.push_back(pair.context);
                responses.push_back(pair.response);
            }
            Tape t;
            Tensor c = encode(t, contexts, params, enc_cfg);
            Tensor r = encode(t, responses, params, enc_cfg);
            Tensor loss = mneg_loss(t, c, r, loss_cfg);
            loss_history.push_back(loss.item());
            opt.zero_grad();
            t.backward(loss);
            opt.step(lr_at(step, total_steps, opt_cfg));
            ++step;
        }
    }

    nlohmann::json meta = {{"stage", "s1"},
                           {"seed", opt_cfg.seed},
                           {"epochs", opt_cfg.epochs},
                           {"batch_size", opt_cfg.batch_size},
                           {"total_steps", total_steps},
                           {"lineage", "fresh"},
                           {"loss_history", loss_history}};
    return make_checkpoint(enc_cfg, params, std::move(meta));
}

Checkpoint train_stage2(const std::vector<LabeledUtterance>& data,
                        const std::string& loss_kind, std::size_t n,
                        const EncoderConfig& enc_cfg,
                        const std::optional<Checkpoint>& init,
                        const OptimConfig& opt_cfg,
                        const LossConfig& loss_cfg,
                        const EmbeddingStore* store) {
    enc_cfg.validate();
    loss_cfg.validate();
    OptimConfig checked = opt_cfg;
    if (checked.epochs == 0) checked.epochs = 1;  // 0 means "setup only"
    checked.validate();
    if (loss_kind != "smax" && loss_kind != "cos" && loss_kind != "ocl")
        throw std::invalid_argument("train_stage2: unknown loss kind '" +
                                    loss_kind + "'");
    const bool external = enc_cfg.mode == "external";
    if (external && store == nullptr)
        throw std::invalid_argument(
            "train_stage2: external mode needs an embedding store");
    if (!external && store != nullptr)
        throw std::invalid_argument(
            "train_stage2: embedding store given but mode is trainable");
    if (init && !(init->enc_cfg == enc_cfg))
        throw std::invalid_argument(
            "train_stage2: encoder config does not match init checkpoint");

    EncoderParams params;
    std::string lineage = "fresh";
    if (init) {
        params = params_from_checkpoint(*init);
        lineage = init->meta.value("stage", std::string("unknown")) + ":" +
                  checkpoint_fingerprint(*init);
    } else if (!external) {
        params = init_encoder(enc_cfg, opt_cfg.seed);
    }
    if (!params.projection_enabled) {
        const std::size_t input_dim =
            external ? store->dim : enc_cfg.embed_dim;
        reset_projection(params, input_dim, enc_cfg.projection_dim,
                         opt_cfg.seed);
    }

    PairSet pairs = build_pairs(data, n, derive_seed(opt_cfg.seed, 2));

    // Positives interleaved with their own negatives, construction order.
    std::vector<FlatPair> flat;
    flat.reserve(pairs.positives.size() + pairs.negatives.size());
    for (std::size_t p = 0; p < pairs.positives.size(); ++p) {
        flat.push_back(
            {pairs.positives[p].first, pairs.positives[p].second, true});
        for (std::size_t k = 0; k < 2 * n; ++k) {
            const auto& neg = pairs.negatives[p * 2 * n + k];
            flat.push_back({neg.first, neg.second, false});
        }
    }

    SmaxHead head = init_smax_head(enc_cfg.projection_dim,
                                   derive_seed(opt_cfg.seed, 3));

    AdamW opt(checked);
    if (!external) opt.add_param("embedding_table", params.embedding_table);
    opt.add_param("proj_weight", params.proj_weight);
    opt.add_param("proj_bias", params.proj_bias);
    if (loss_kind == "smax") opt.add_param("smax_w", head.W);

    const std::size_t B = opt_cfg.batch_size;
    const std::size_t batches_per_epoch = (flat.size() + B - 1) / B;
    const std::size_t total_steps = opt_cfg.epochs * batches_per_epoch;

    std::vector<double> loss_history;
    loss_history.reserve(total_steps);
    Rng order_rng(derive_seed(opt_cfg.seed, 4));
    std::vector<std::size_t> order(flat.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < opt_cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += B) {
            const std::size_t stop = std::min(order.size(), start + B);
            std::vector<std::string> left, right;
            std::vector<bool> positive;
            left.reserve(stop - start);
            right.reserve(stop - start);
            positive.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i) {
                const FlatPair& fp = flat[order[i]];
                const LabeledUtterance& a = data[fp.a];
                const LabeledUtterance& b = data[fp.b];
                left.push_back(external ? a.id : a.text);
                right.push_back(external ? b.id : b.text);
                positive.push_back(fp.positive);
            }
            Tape t;
            Tensor xi = external ? encode_external(t, left, *store, params)
                                 : encode(t, left, params, enc_cfg);
            Tensor xj = external ? encode_external(t, right, *store, params)
                                 : encode(t, right, params, enc_cfg);
            Tensor loss;
            if (loss_kind == "smax")
                loss = smax_loss(t, xi, xj, positive, head);
            else if (loss_kind == "cos")
                loss = cos_loss(t, xi, xj, positive, loss_cfg);
            else
                loss = ocl_loss(t, xi, xj, positive, loss_cfg, true);
            loss_history.push_back(loss.item());
            opt.zero_grad();
            t.backward(loss);
            opt.step(lr_at(step, total_steps, opt_cfg));
            ++step;
        }
    }

    nlohmann::json meta = {
        {"stage", "s2"},
        {"seed", opt_cfg.seed},
        {"epochs", opt_cfg.epochs},
        {"batch_size", B},
        {"total_steps", total_steps},
        {"loss_kind", loss_kind},
        {"n", n},
        {"lineage", lineage},
        {"optimizer", "fresh"},
        {"pair_counts",
         {{"positives", pairs.positives.size()},
          {"negatives", pairs.negatives.size()}}},
        {"loss_history", loss_history}};
    return make_checkpoint(enc_cfg, params, std::move(meta));
}

}  // namespace convfit
