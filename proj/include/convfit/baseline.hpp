#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convfit/checkpoint.hpp"
#include "convfit/tensor.hpp"

// Comparison arm: a 2-layer ReLU MLP with aggressive inverted dropout,
// trained by plain SGD over frozen sentence embeddings, predicting one of
// the training classes by argmax.

namespace convfit {

struct MlpConfig {
    std::vector<std::size_t> hidden_dims = {64, 64};
    double dropout = 0.75;
    double lr = 0.5;  // decays linearly to 0 over the whole run
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;

    void validate() const;  // throws std::invalid_argument
};

struct MlpParams {
    std::vector<std::string> classes;  // sorted; output column order
    std::vector<Tensor> weights;       // [in x out] per layer
    std::vector<Tensor> biases;        // [out] per layer
};

// Embeddings are a flat row-major N x dim buffer and are never written
// to or differentiated through. Throws on a non-finite loss.
MlpParams train_mlp(const std::vector<double>& embeddings, std::size_t dim,
                    const std::vector<std::string>& labels,
                    const MlpConfig& cfg);

// Argmax over logits per row, dropout off; ties go to the lowest class
// index.
std::vector<std::string> mlp_predict(const std::vector<double>& embeddings,
                                     std::size_t dim,
                                     const MlpParams& params);

// Classifier in the common checkpoint container, stage "mlp-baseline".
Checkpoint mlp_to_checkpoint(const MlpParams& params,
                             const EncoderConfig& enc_cfg,
                             nlohmann::json meta);
MlpParams mlp_from_checkpoint(const Checkpoint& ck);

}  // namespace convfit
