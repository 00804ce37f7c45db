#include "convfit/encoder.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "convfit/kernels.hpp"
#include "convfit/rng.hpp"

namespace convfit {

void EncoderConfig::validate() const {
    if (embed_dim == 0) throw std::invalid_argument("encoder: embed_dim must be positive");
    if (hash_buckets == 0)
        throw std::invalid_argument("encoder: hash_buckets must be positive");
    if (max_seq_len == 0)
        throw std::invalid_argument("encoder: max_seq_len must be at least 1");
    if (projection_dim == 0)
        throw std::invalid_argument("encoder: projection_dim must be at least 1");
    if (ngram_orders.empty())
        throw std::invalid_argument("encoder: ngram_orders must be nonempty");
    for (std::size_t n : ngram_orders)
        if (n == 0)
            throw std::invalid_argument("encoder: ngram order 0 is meaningless");
    if (mode != "trainable" && mode != "external")
        throw std::invalid_argument("encoder: mode must be trainable or external");
}

Tensor xavier_uniform(const Shape& shape, std::size_t fan_in,
                      std::size_t fan_out, std::uint64_t seed,
                      bool requires_grad) {
    Tensor t = Tensor::zeros(shape, requires_grad);
    const double limit =
        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Rng rng(seed);
    for (auto& v : t.value()) v = rng.uniform(-limit, limit);
    return t;
}

EncoderParams init_encoder(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    EncoderParams p;
    p.embedding_table =
        Tensor::zeros({cfg.hash_buckets, cfg.embed_dim}, true);
    const double limit = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
    Rng rng(derive_seed(seed, 0));
    for (auto& v : p.embedding_table.value()) v = rng.uniform(-limit, limit);
    p.projection_enabled = false;
    return p;
}

void reset_projection(EncoderParams& params, std::size_t input_dim,
                      std::size_t projection_dim, std::uint64_t seed) {
    params.proj_weight = xavier_uniform({input_dim, projection_dim}, input_dim,
                                        projection_dim, derive_seed(seed, 1));
    params.proj_bias = Tensor::zeros({projection_dim}, true);
    params.projection_enabled = true;
}

std::size_t output_dim(const EncoderParams& params) {
    if (params.projection_enabled) return params.proj_bias.numel();
    return params.embedding_table.shape()[1];
}

namespace {

// Mean of embedding-table rows selected by each text's features, as one
// recorded op; gradients land only in the touched rows.
Tensor pool_features(Tape& t, const std::vector<std::vector<Feature>>& feats,
                     const Tensor& table) {
    const std::size_t dim = table.shape()[1];
    Tensor out = Tensor::zeros({feats.size(), dim}, table.requires_grad());
    const auto& tv = table.value();
    auto& ov = out.value();
    for (std::size_t b = 0; b < feats.size(); ++b) {
        std::size_t total = 0;
        for (const auto& f : feats[b]) total += f.count;
        if (total == 0) continue;
        for (const auto& f : feats[b])
            kernels::active().axpy(
                static_cast<double>(f.count) / static_cast<double>(total),
                tv.data() + f.id * dim, ov.data() + b * dim, dim);
    }
    if (out.requires_grad())
        t.record([table = table, out = out, feats, dim]() mutable {
            const auto& g = out.grad();
            auto& dt = table.grad();
            for (std::size_t b = 0; b < feats.size(); ++b) {
                std::size_t total = 0;
                for (const auto& f : feats[b]) total += f.count;
                if (total == 0) continue;
                for (const auto& f : feats[b])
                    kernels::active().axpy(
                        static_cast<double>(f.count) /
                            static_cast<double>(total),
                        g.data() + b * dim, dt.data() + f.id * dim, dim);
            }
        });
    return out;
}

Tensor apply_projection(Tape& t, const Tensor& pooled,
                        const EncoderParams& params) {
    if (pooled.shape()[1] != params.proj_weight.shape()[0])
        throw std::invalid_argument(
            "encoder: projection input dimension mismatch");
    Tensor h = matmul(t, pooled, params.proj_weight);
    return tanh(t, add_rowvec(t, h, params.proj_bias));
}

}  // namespace

Tensor encode(Tape& t, const std::vector<std::string>& texts,
              const EncoderParams& params, const EncoderConfig& cfg) {
    cfg.validate();
    if (cfg.mode != "trainable")
        throw std::invalid_argument("encode: config is not in trainable mode");
    if (!params.embedding_table.defined() ||
        params.embedding_table.shape() !=
            Shape{cfg.hash_buckets, cfg.embed_dim})
        throw std::invalid_argument(
            "encode: embedding table does not match config dimensions");

    std::vector<std::vector<Feature>> feats;
    feats.reserve(texts.size());
    for (const auto& text : texts)
        feats.push_back(featurize(tokenize(text, cfg.max_seq_len),
                                  cfg.ngram_orders, cfg.hash_buckets));

    Tensor pooled = pool_features(t, feats, params.embedding_table);
    if (!params.projection_enabled) return pooled;
    return apply_projection(t, pooled, params);
}

void EmbeddingStore::add(const std::string& id,
                         const std::vector<double>& vec) {
    if (dim == 0) dim = vec.size();
    if (vec.size() != dim)
        throw std::invalid_argument("embedding store: dimension mismatch for '" +
                                    id + "'");
    if (index_.count(id) != 0)
        throw std::invalid_argument("embedding store: duplicate id '" + id +
                                    "'");
    double norm2 = 0.0;
    for (double v : vec) norm2 += v * v;
    if (norm2 == 0.0)
        throw std::invalid_argument("embedding store: zero vector for '" + id +
                                    "'");
    index_[id] = ids.size();
    ids.push_back(id);
    data.insert(data.end(), vec.begin(), vec.end());
}

bool EmbeddingStore::contains(const std::string& id) const {
    return index_.count(id) != 0;
}

const double* EmbeddingStore::lookup(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
        throw std::out_of_range("embedding store: no vector for id '" + id +
                                "'");
    return data.data() + it->second * dim;
}

EmbeddingStore EmbeddingStore::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("embedding store: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("#dim=", 0) != 0)
        throw std::runtime_error("embedding store: missing #dim= header in " +
                                 path);
    const std::size_t d = std::stoul(line.substr(5));
    if (d == 0)
        throw std::runtime_error("embedding store: dimension must be positive");

    EmbeddingStore store;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw std::runtime_error("embedding store: malformed row in " +
                                     path);
        std::istringstream rest(line.substr(tab + 1));
        std::vector<double> vec;
        vec.reserve(d);
        double v;
        while (rest >> v) vec.push_back(v);
        if (vec.size() != d)
            throw std::runtime_error("embedding store: row has " +
                                     std::to_string(vec.size()) +
                                     " values, expected " + std::to_string(d));
        store.add(line.substr(0, tab), vec);
    }
    store.dim = d;
    return store;
}

void EmbeddingStore::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("embedding store: cannot write " + path);
    out << "#dim=" << dim << "\n";
    char buf[40];
    for (std::size_t r = 0; r < ids.size(); ++r) {
        out << ids[r];
        for (std::size_t j = 0; j < dim; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", data[r * dim + j]);
            out << (j == 0 ? '\t' : ' ') << buf;
        }
        out << "\n";
    }
}

Tensor encode_external(Tape& t, const std::vector<std::string>& ids,
                       const EmbeddingStore& store,
                       const EncoderParams& params) {
    if (!params.projection_enabled)
        throw std::invalid_argument(
            "encode_external: projection head not attached");
    Tensor frozen = Tensor::zeros({ids.size(), store.dim});
    auto& fv = frozen.value();
    for (std::size_t b = 0; b < ids.size(); ++b) {
        const double* src = store.lookup(ids[b]);
        for (std::size_t j = 0; j < store.dim; ++j)
            fv[b * store.dim + j] = src[j];
    }
    return apply_projection(t, frozen, params);
}

}  // namespace convfit
