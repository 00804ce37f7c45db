#include "convfit/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "convfit/encoder.hpp"
#include "convfit/kernels.hpp"
#include "convfit/rng.hpp"

namespace convfit {

void MlpConfig::validate() const {
    if (hidden_dims.size() != 2)
        throw std::invalid_argument("mlp: exactly two hidden layers");
    for (std::size_t w : hidden_dims)
        if (w == 0) throw std::invalid_argument("mlp: hidden width must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
        throw std::invalid_argument("mlp: dropout must be in [0, 1)");
    if (lr <= 0.0) throw std::invalid_argument("mlp: lr must be positive");
    if (epochs == 0) throw std::invalid_argument("mlp: epochs must be >= 1");
    if (batch_size == 0)
        throw std::invalid_argument("mlp: batch_size must be >= 1");
}

namespace {

// Hidden activations for one batch; a null mask means dropout off.
Tensor forward(Tape& t, const Tensor& x, const MlpParams& params,
               const std::vector<Tensor>& masks) {
    Tensor h = x;
    const std::size_t layers = params.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        h = add_rowvec(t, matmul(t, h, params.weights[l]), params.biases[l]);
        if (l + 1 < layers) {
            h = relu(t, h);
            if (!masks.empty() && masks[l].defined()) h = mul(t, h, masks[l]);
        }
    }
    return h;
}

Tensor cross_entropy(Tape& t, const Tensor& logits,
                     const std::vector<std::size_t>& targets) {
    Tensor total;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        Tensor r = row(t, logits, i);
        Tensor term = sub(t, log_sum_exp(t, r), element(t, r, targets[i]));
        total = total.defined() ? add(t, total, term) : term;
    }
    return scale(t, total, 1.0 / static_cast<double>(targets.size()));
}

Tensor batch_rows(const std::vector<double>& embeddings, std::size_t dim,
                  const std::vector<std::size_t>& rows) {
    std::vector<double> buf;
    buf.reserve(rows.size() * dim);
    for (std::size_t r : rows)
        buf.insert(buf.end(), embeddings.begin() + r * dim,
                   embeddings.begin() + (r + 1) * dim);
    return Tensor::from({rows.size(), dim}, std::move(buf), false);
}

}  // namespace

MlpParams train_mlp(const std::vector<double>& embeddings, std::size_t dim,
                    const std::vector<std::string>& labels,
                    const MlpConfig& cfg) {
    cfg.validate();
    if (dim == 0 || labels.empty() ||
        embeddings.size() != labels.size() * dim)
        throw std::invalid_argument(
            "train_mlp: embedding buffer does not match labels");

    MlpParams params;
    {
        std::set<std::string> distinct(labels.begin(), labels.end());
        params.classes.assign(distinct.begin(), distinct.end());
    }
    if (params.classes.size() < 2)
        throw std::invalid_argument("train_mlp: need at least 2 classes");

    std::map<std::string, std::size_t> class_index;
    for (std::size_t c = 0; c < params.classes.size(); ++c)
        class_index[params.classes[c]] = c;
    std::vector<std::size_t> targets;
    targets.reserve(labels.size());
    for (const auto& l : labels) targets.push_back(class_index.at(l));

    const std::vector<std::size_t> widths = {dim, cfg.hidden_dims[0],
                                             cfg.hidden_dims[1],
                                             params.classes.size()};
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        params.weights.push_back(
            xavier_uniform({widths[l], widths[l + 1]}, widths[l],
                           widths[l + 1], derive_seed(cfg.seed, l)));
        params.biases.push_back(Tensor::zeros({widths[l + 1]}, true));
    }

    const std::size_t n = labels.size();
    const std::size_t bpe = (n + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total_steps = cfg.epochs * bpe;
    const double keep = 1.0 - cfg.dropout;

    Rng order_rng(derive_seed(cfg.seed, 10));
    Rng mask_rng(derive_seed(cfg.seed, 11));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    const auto& kn = kernels::active();
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        order_rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            const std::vector<std::size_t> rows(order.begin() + start,
                                                order.begin() + stop);
            std::vector<std::size_t> batch_targets;
            batch_targets.reserve(rows.size());
            for (std::size_t r : rows) batch_targets.push_back(targets[r]);

            // Inverted dropout: kept units scaled by 1/keep at train time.
            std::vector<Tensor> masks(2);
            if (cfg.dropout > 0.0)
                for (std::size_t l = 0; l < 2; ++l) {
                    std::vector<double> mv(rows.size() * cfg.hidden_dims[l]);
                    for (auto& v : mv)
                        v = mask_rng.unit() < keep ? 1.0 / keep : 0.0;
                    masks[l] = Tensor::from({rows.size(), cfg.hidden_dims[l]},
                                            std::move(mv), false);
                }

            Tape t;
            Tensor x = batch_rows(embeddings, dim, rows);
            Tensor logits = forward(t, x, params, masks);
            Tensor loss = cross_entropy(t, logits, batch_targets);
            if (!std::isfinite(loss.item()))
                throw std::runtime_error("train_mlp: non-finite loss");

            for (auto& w : params.weights) w.zero_grad();
            for (auto& b : params.biases) b.zero_grad();
            t.backward(loss);

            const double lr_t =
                cfg.lr * static_cast<double>(total_steps - step) /
                static_cast<double>(total_steps);
            for (auto& w : params.weights)
                kn.axpy(-lr_t, w.grad().data(), w.value().data(),
                        w.numel());
            for (auto& b : params.biases)
                kn.axpy(-lr_t, b.grad().data(), b.value().data(),
                        b.numel());
            ++step;
        }
    }
    return params;
}

std::vector<std::string> mlp_predict(const std::vector<double>& embeddings,
                                     std::size_t dim,
                                     const MlpParams& params) {
    if (params.weights.empty() || params.weights[0].shape()[0] != dim)
        throw std::invalid_argument("mlp_predict: dimension mismatch");
    if (embeddings.size() % dim != 0)
        throw std::invalid_argument(
            "mlp_predict: buffer is not a whole number of rows");
    const std::size_t m = embeddings.size() / dim;
    std::vector<std::size_t> rows(m);
    for (std::size_t i = 0; i < m; ++i) rows[i] = i;

    Tape t;
    Tensor logits =
        forward(t, batch_rows(embeddings, dim, rows), params, {});
    const std::size_t classes = params.classes.size();
    std::vector<std::string> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c)
            if (logits.value()[i * classes + c] >
                logits.value()[i * classes + best])
                best = c;
        out.push_back(params.classes[best]);
    }
    return out;
}

Checkpoint mlp_to_checkpoint(const MlpParams& params,
                             const EncoderConfig& enc_cfg,
                             nlohmann::json meta) {
    Checkpoint ck;
    ck.enc_cfg = enc_cfg;
    ck.meta = std::move(meta);
    ck.meta["stage"] = "mlp-baseline";
    ck.meta["classes"] = params.classes;
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        const auto pack = [&](const std::string& name, const Tensor& t) {
            TensorEntry e;
            e.name = name;
            e.shape = t.shape();
            e.data.reserve(t.numel());
            for (double v : t.value())
                e.data.push_back(static_cast<float>(v));
            ck.tensors.push_back(std::move(e));
        };
        pack("mlp.w" + std::to_string(l), params.weights[l]);
        pack("mlp.b" + std::to_string(l), params.biases[l]);
    }
    return ck;
}

MlpParams mlp_from_checkpoint(const Checkpoint& ck) {
    MlpParams params;
    params.classes =
        ck.meta.at("classes").get<std::vector<std::string>>();
    for (std::size_t l = 0;; ++l) {
        const TensorEntry* w = ck.find("mlp.w" + std::to_string(l));
        const TensorEntry* b = ck.find("mlp.b" + std::to_string(l));
        if (w == nullptr && b == nullptr) break;
        if (w == nullptr || b == nullptr)
            throw CheckpointCorruptError(
                "mlp checkpoint: layer " + std::to_string(l) +
                " is incomplete");
        const auto unpack = [](const TensorEntry& e) {
            std::vector<double> v(e.data.begin(), e.data.end());
            return Tensor::from(e.shape, std::move(v), true);
        };
        params.weights.push_back(unpack(*w));
        params.biases.push_back(unpack(*b));
    }
    if (params.weights.empty())
        throw CheckpointCorruptError("mlp checkpoint: no layers");
    return params;
}

}  // namespace convfit
