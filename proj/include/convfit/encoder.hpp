#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "convfit/tensor.hpp"
#include "convfit/text.hpp"

// Sentence encoder: hashed n-gram lookup into a trainable embedding
// table, mean pooling over features, and an optional Tanh down-projection
// head that training attaches before the pair-loss stage. The external
// mode feeds frozen, precomputed vectors through the head instead.

namespace convfit {

struct EncoderConfig {
    std::size_t embed_dim = 64;
    std::size_t hash_buckets = 1u << 16;
    std::size_t max_seq_len = 48;
    std::vector<std::size_t> ngram_orders = {1, 2};
    std::size_t projection_dim = 32;
    std::string mode = "trainable";  // or "external"

    void validate() const;  // throws std::invalid_argument

    bool operator==(const EncoderConfig&) const = default;
};

struct EncoderParams {
    Tensor embedding_table;  // [hash_buckets, embed_dim]
    Tensor proj_weight;      // [input_dim, projection_dim], once attached
    Tensor proj_bias;        // [projection_dim]
    bool projection_enabled = false;
};

// Fresh trainable encoder: seeded uniform table, no projection head yet.
EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed);

// Attaches (or replaces) the projection head: Xavier-uniform weight,
// zero bias, projection_enabled = true. input_dim is embed_dim for the
// trainable mode or the store dimension for external vectors.
void reset_projection(EncoderParams& params, std::size_t input_dim,
                      std::size_t projection_dim, std::uint64_t seed);

std::size_t output_dim(const EncoderParams& params);

// [batch x dim]; rows participate in the tape when params require grad.
// A text with no features pools to the zero vector.
Tensor encode(Tape& t, const std::vector<std::string>& texts,
              const EncoderParams& params, const EncoderConfig& cfg);

// Precomputed utterance vectors, TSV-backed.
struct EmbeddingStore {
    std::size_t dim = 0;
    std::vector<std::string> ids;  // insertion order
    std::vector<double> data;      // ids.size() rows of dim values

    void add(const std::string& id, const std::vector<double>& vec);
    bool contains(const std::string& id) const;
    const double* lookup(const std::string& id) const;  // throws, names id

    // Format: header "#dim=<d>", then id<TAB>space-separated floats.
    static EmbeddingStore load(const std::string& path);
    void save(const std::string& path) const;

  private:
    std::unordered_map<std::string, std::size_t> index_;
};

// Frozen store vectors through the trainable projection head.
Tensor encode_external(Tape& t, const std::vector<std::string>& ids,
                       const EmbeddingStore& store,
                       const EncoderParams& params);

// Uniform in ±sqrt(6/(fan_in+fan_out)), filled row-major.
Tensor xavier_uniform(const Shape& shape, std::size_t fan_in,
                      std::size_t fan_out, std::uint64_t seed,
                      bool requires_grad = true);

}  // namespace convfit
