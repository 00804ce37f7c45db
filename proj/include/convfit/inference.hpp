#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "convfit/checkpoint.hpp"
#include "convfit/data.hpp"
#include "convfit/encoder.hpp"

// Nearest-neighbour intent detection: encode a pool of labelled
// exemplars once, then classify queries by cosine similarity against it.
// Pools are plain values; augmenting one returns a new pool and needs no
// retraining. A fingerprint ties every pool to the exact checkpoint that
// encoded it, and classify refuses mismatched pairs.

namespace convfit {

// Inference-ready encoder: frozen parameters plus the identity of the
// checkpoint they came from. In external mode `store` must outlive the
// state and queries are utterance ids into it.
struct EncoderState {
    EncoderConfig cfg;
    EncoderParams params;
    std::string fingerprint;
    const EmbeddingStore* store = nullptr;
};

EncoderState encoder_state_from(const Checkpoint& ck,
                                const EmbeddingStore* store = nullptr);

// Row-major exemplar matrix with parallel ids and labels.
struct ExemplarPool {
    std::size_t dim = 0;
    std::vector<std::string> ids;
    std::vector<std::string> labels;
    std::vector<double> vectors;  // ids.size() rows of dim values
    std::string fingerprint;

    std::size_t rows() const { return ids.size(); }

    bool operator==(const ExemplarPool&) const = default;
};

// Encodes every utterance with the given encoder. Rejects rows that
// encode to the zero vector, naming the utterance.
ExemplarPool build_pool(const std::vector<LabeledUtterance>& data,
                        const EncoderState& enc);

// New pool with the extra utterances appended; the input is untouched.
ExemplarPool augment_pool(const ExemplarPool& pool,
                          const std::vector<LabeledUtterance>& extra,
                          const EncoderState& enc);

struct Prediction {
    std::string label;
    std::vector<std::string> neighbor_ids;     // top-k, most similar first
    std::vector<std::string> neighbor_labels;  // parallel to neighbor_ids
    std::vector<double> similarities;          // parallel, cosine values
};

// k = 1 returns the best exemplar's label; k > 1 takes the majority over
// the top k, breaking ties by larger summed similarity and then by
// lexicographic label order. Neighbour ranking breaks similarity ties by
// pool row order.
Prediction classify(const std::string& query, const ExemplarPool& pool,
                    std::size_t k, const EncoderState& enc);

// Same decision rule on an already-encoded query; no fingerprint check.
Prediction classify_vector(const std::vector<double>& query,
                           const ExemplarPool& pool, std::size_t k);

// Vectors as an EmbeddingStore TSV; ids, labels and the fingerprint in a
// sidecar ("#fingerprint=<hex>", then id<TAB>label rows in pool order).
void save_pool(const ExemplarPool& pool, const std::string& vectors_path,
               const std::string& labels_path);
ExemplarPool load_pool(const std::string& vectors_path,
                       const std::string& labels_path);

}  // namespace convfit
