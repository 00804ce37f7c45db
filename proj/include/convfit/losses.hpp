#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convfit/tensor.hpp"

// The four training objectives, each a differentiable scalar over encoded
// batches. Response ranking scores every context against every response
// in the batch; the three pair losses consume aligned rows of (x_i, x_j)
// with a positive/negative flag per row.

namespace convfit {

struct LossConfig {
    double D = 20.0;          // similarity scale for response ranking
    double delta_pos = 0.8;   // target cosine for positive pairs
    double delta_neg = 0.3;   // target cosine for negative pairs
    double delta_m = 0.5;     // distance margin for negatives
    std::string mneg_form = "paper";  // or "softmax"

    void validate() const;  // throws std::invalid_argument
};

struct SmaxHead {
    Tensor W;  // [3*d_o, 2], no bias
};

SmaxHead init_smax_head(std::size_t d_o, std::uint64_t seed);

// -sum_i S(c_i,r_i) + sum_i log sum_{j != i} exp(S(c_i,r_j)) with
// S = D * cos. The `softmax` form includes the diagonal in the log-sum,
// turning each row into a standard softmax cross-entropy.
Tensor mneg_loss(Tape& t, const Tensor& contexts, const Tensor& responses,
                 const LossConfig& cfg);

// Mean binary cross-entropy over logits (x_i (+) x_j (+) |x_i-x_j|) W;
// class 1 means "same intent". The head is train-time only.
Tensor smax_loss(Tape& t, const Tensor& xi, const Tensor& xj,
                 const std::vector<bool>& is_positive, const SmaxHead& head);

// Mean of (delta - cos(x_i,x_j))^2 with delta = delta_pos on positive
// rows and delta_neg on negative rows.
Tensor cos_loss(Tape& t, const Tensor& xi, const Tensor& xj,
                const std::vector<bool>& is_positive, const LossConfig& cfg);

// Sum over pairs of dcos^2 (positives) and relu(delta_m - dcos)^2
// (negatives), dcos = 1 - cos. Online mining keeps only in-batch hard
// pairs; see ocl_kept_pairs for the exact rule.
Tensor ocl_loss(Tape& t, const Tensor& xi, const Tensor& xj,
                const std::vector<bool>& is_positive, const LossConfig& cfg,
                bool online);

struct OclKeptSets {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
};

// Offline keeps everything. Online keeps negatives with dcos strictly
// below the largest positive dcos and positives with dcos strictly above
// the smallest negative dcos; if the batch has no positives or no
// negatives at all, the side that exists is kept whole.
OclKeptSets ocl_kept_pairs(const std::vector<double>& dcos,
                           const std::vector<bool>& is_positive, bool online);

}  // namespace convfit
