#include "convfit/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "convfit/encoder.hpp"
#include "convfit/kernels.hpp"

namespace convfit {

void LossConfig::validate() const {
    if (!(D > 0.0)) throw std::invalid_argument("losses: D must be positive");
    if (!(0.0 <= delta_neg && delta_neg < delta_pos && delta_pos <= 1.0))
        throw std::invalid_argument(
            "losses: need 0 <= delta_neg < delta_pos <= 1");
    if (!(0.0 < delta_m && delta_m <= 2.0))
        throw std::invalid_argument("losses: delta_m must be in (0, 2]");
    if (mneg_form != "paper" && mneg_form != "softmax")
        throw std::invalid_argument("losses: mneg_form must be paper or softmax");
}

SmaxHead init_smax_head(std::size_t d_o, std::uint64_t seed) {
    return {xavier_uniform({3 * d_o, 2}, 3 * d_o, 2, seed)};
}

namespace {

void check_pair_batch(const Tensor& xi, const Tensor& xj,
                      const std::vector<bool>& is_positive, const char* op) {
    if (xi.shape().size() != 2 || xj.shape().size() != 2)
        throw std::invalid_argument(std::string(op) + ": inputs must be 2-D");
    if (xi.shape() != xj.shape())
        throw std::invalid_argument(std::string(op) +
                                    ": pair sides have different shapes");
    if (xi.shape()[0] == 0)
        throw std::invalid_argument(std::string(op) + ": empty batch");
    if (is_positive.size() != xi.shape()[0])
        throw std::invalid_argument(std::string(op) +
                                    ": flag count does not match rows");
}

}  // namespace

Tensor mneg_loss(Tape& t, const Tensor& contexts, const Tensor& responses,
                 const LossConfig& cfg) {
    cfg.validate();
    if (contexts.shape().size() != 2 || responses.shape().size() != 2 ||
        contexts.shape() != responses.shape())
        throw std::invalid_argument(
            "mneg_loss: contexts and responses must share a 2-D shape");
    const std::size_t B = contexts.shape()[0];
    if (B < 2)
        throw std::invalid_argument(
            "mneg_loss: batch below 2 leaves no in-batch negatives");
    const bool include_diagonal = cfg.mneg_form == "softmax";

    std::vector<Tensor> crows(B), rrows(B);
    for (std::size_t i = 0; i < B; ++i) {
        crows[i] = row(t, contexts, i);
        rrows[i] = row(t, responses, i);
    }

    Tensor loss = Tensor::scalar(0.0, contexts.requires_grad() ||
                                          responses.requires_grad());
    for (std::size_t i = 0; i < B; ++i) {
        std::vector<Tensor> off_diag;
        Tensor matched;
        for (std::size_t j = 0; j < B; ++j) {
            Tensor s =
                scale(t, cosine_similarity(t, crows[i], rrows[j]), cfg.D);
            if (j == i) matched = s;
            if (j != i || include_diagonal) off_diag.push_back(s);
        }
        loss = add(t, loss, sub(t, log_sum_exp(t, concat(t, off_diag)),
                                matched));
    }
    return loss;
}

Tensor smax_loss(Tape& t, const Tensor& xi, const Tensor& xj,
                 const std::vector<bool>& is_positive, const SmaxHead& head) {
    check_pair_batch(xi, xj, is_positive, "smax_loss");
    const std::size_t P = xi.shape()[0];
    const std::size_t d = xi.shape()[1];
    if (head.W.shape() != Shape{3 * d, 2})
        throw std::invalid_argument(
            "smax_loss: head does not match the embedding dimension");

    Tensor total = Tensor::scalar(0.0, xi.requires_grad() ||
                                           xj.requires_grad() ||
                                           head.W.requires_grad());
    for (std::size_t p = 0; p < P; ++p) {
        Tensor a = row(t, xi, p);
        Tensor b = row(t, xj, p);
        Tensor feats = concat(t, {a, b, abs(t, sub(t, a, b))});
        Tensor logits =
            reshape(t, matmul(t, reshape(t, feats, {1, 3 * d}), head.W), {2});
        const std::size_t target = is_positive[p] ? 1 : 0;
        total = add(t, total, sub(t, log_sum_exp(t, logits),
                                  element(t, logits, target)));
    }
    return scale(t, total, 1.0 / static_cast<double>(P));
}

Tensor cos_loss(Tape& t, const Tensor& xi, const Tensor& xj,
                const std::vector<bool>& is_positive, const LossConfig& cfg) {
    cfg.validate();
    check_pair_batch(xi, xj, is_positive, "cos_loss");
    const std::size_t P = xi.shape()[0];

    Tensor total =
        Tensor::scalar(0.0, xi.requires_grad() || xj.requires_grad());
    for (std::size_t p = 0; p < P; ++p) {
        Tensor c = cosine_similarity(t, row(t, xi, p), row(t, xj, p));
        const double delta = is_positive[p] ? cfg.delta_pos : cfg.delta_neg;
        total = add(t, total, square(t, sub(t, Tensor::scalar(delta), c)));
    }
    return scale(t, total, 1.0 / static_cast<double>(P));
}

OclKeptSets ocl_kept_pairs(const std::vector<double>& dcos,
                           const std::vector<bool>& is_positive, bool online) {
    OclKeptSets kept;
    if (!online) {
        for (std::size_t p = 0; p < dcos.size(); ++p)
            (is_positive[p] ? kept.positives : kept.negatives).push_back(p);
        return kept;
    }

    bool any_pos = false, any_neg = false;
    double max_pos = 0.0, min_neg = 0.0;
    for (std::size_t p = 0; p < dcos.size(); ++p) {
        if (is_positive[p]) {
            if (!any_pos || dcos[p] > max_pos) max_pos = dcos[p];
            any_pos = true;
        } else {
            if (!any_neg || dcos[p] < min_neg) min_neg = dcos[p];
            any_neg = true;
        }
    }

    for (std::size_t p = 0; p < dcos.size(); ++p) {
        if (is_positive[p]) {
            if (!any_neg || dcos[p] > min_neg) kept.positives.push_back(p);
        } else {
            if (!any_pos || dcos[p] < max_pos) kept.negatives.push_back(p);
        }
    }
    return kept;
}

Tensor ocl_loss(Tape& t, const Tensor& xi, const Tensor& xj,
                const std::vector<bool>& is_positive, const LossConfig& cfg,
                bool online) {
    cfg.validate();
    check_pair_batch(xi, xj, is_positive, "ocl_loss");
    const std::size_t P = xi.shape()[0];
    const std::size_t d = xi.shape()[1];

    // Plain-value cosine distances drive the hard-pair selection; the
    // differentiable terms are built only for kept pairs.
    const auto& iv = xi.value();
    const auto& jv = xj.value();
    std::vector<double> dcos(P);
    for (std::size_t p = 0; p < P; ++p) {
        const double* a = iv.data() + p * d;
        const double* b = jv.data() + p * d;
        const double na2 = kernels::active().sumsq(a, d);
        const double nb2 = kernels::active().sumsq(b, d);
        if (na2 == 0.0 || nb2 == 0.0)
            throw std::domain_error("ocl_loss: zero-norm row");
        dcos[p] = 1.0 - kernels::active().dot(a, b, d) /
                            (std::sqrt(na2) * std::sqrt(nb2));
    }
    const OclKeptSets kept = ocl_kept_pairs(dcos, is_positive, online);

    Tensor total =
        Tensor::scalar(0.0, xi.requires_grad() || xj.requires_grad());
    auto dist_node = [&](std::size_t p) {
        return sub(t, Tensor::scalar(1.0),
                   cosine_similarity(t, row(t, xi, p), row(t, xj, p)));
    };
    for (std::size_t p : kept.positives)
        total = add(t, total, square(t, dist_node(p)));
    for (std::size_t p : kept.negatives)
        total = add(t, total,
                    square(t, relu(t, sub(t, Tensor::scalar(cfg.delta_m),
                                          dist_node(p)))));
    return total;
}

}  // namespace convfit
