#include "convfit/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include "convfit/kernels.hpp"
#include "convfit/tensor.hpp"

namespace convfit {

namespace {

Tensor frozen(const Tensor& t) {
    return Tensor::from(t.shape(), t.value(), false);
}

// Encodes a batch without touching any tape.
std::vector<double> encode_rows(const std::vector<std::string>& keys,
                                const EncoderState& enc) {
    Tape t;
    Tensor out = enc.store != nullptr
                     ? encode_external(t, keys, *enc.store, enc.params)
                     : encode(t, keys, enc.params, enc.cfg);
    return out.value();
}

void check_fingerprint(const ExemplarPool& pool, const EncoderState& enc,
                       const char* what) {
    if (pool.fingerprint != enc.fingerprint)
        throw std::runtime_error(
            std::string(what) + ": pool fingerprint " + pool.fingerprint +
            " does not match encoder " + enc.fingerprint);
}

void append_rows(ExemplarPool& pool,
                 const std::vector<LabeledUtterance>& data,
                 const EncoderState& enc) {
    if (data.empty()) return;
    std::vector<std::string> keys;
    keys.reserve(data.size());
    for (const auto& u : data)
        keys.push_back(enc.store != nullptr ? u.id : u.text);
    const std::vector<double> rows = encode_rows(keys, enc);
    const std::size_t dim = rows.size() / data.size();
    if (pool.rows() == 0)
        pool.dim = dim;
    else if (pool.dim != dim)
        throw std::invalid_argument("pool: row dimension mismatch");
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double* row = rows.data() + i * dim;
        if (k.sumsq(row, dim) == 0.0)
            throw std::domain_error("pool: utterance '" + data[i].id +
                                    "' encodes to the zero vector");
        pool.ids.push_back(data[i].id);
        pool.labels.push_back(data[i].label);
        pool.vectors.insert(pool.vectors.end(), row, row + dim);
    }
}

}  // namespace

EncoderState encoder_state_from(const Checkpoint& ck,
                                const EmbeddingStore* store) {
    EncoderState enc;
    enc.cfg = ck.enc_cfg;
    enc.fingerprint = checkpoint_fingerprint(ck);
    enc.store = store;
    if ((enc.cfg.mode == "external") != (store != nullptr))
        throw std::invalid_argument(
            enc.cfg.mode == "external"
                ? "encoder state: external mode needs an embedding store"
                : "encoder state: store given but mode is trainable");
    EncoderParams loaded = params_from_checkpoint(ck);
    if (loaded.embedding_table.defined())
        enc.params.embedding_table = frozen(loaded.embedding_table);
    enc.params.projection_enabled = loaded.projection_enabled;
    if (loaded.projection_enabled) {
        enc.params.proj_weight = frozen(loaded.proj_weight);
        enc.params.proj_bias = frozen(loaded.proj_bias);
    }
    return enc;
}

ExemplarPool build_pool(const std::vector<LabeledUtterance>& data,
                        const EncoderState& enc) {
    if (data.empty())
        throw std::invalid_argument("build_pool: no utterances");
    ExemplarPool pool;
    pool.fingerprint = enc.fingerprint;
    append_rows(pool, data, enc);
    return pool;
}

ExemplarPool augment_pool(const ExemplarPool& pool,
                          const std::vector<LabeledUtterance>& extra,
                          const EncoderState& enc) {
    check_fingerprint(pool, enc, "augment_pool");
    ExemplarPool out = pool;
    append_rows(out, extra, enc);
    return out;
}

Prediction classify_vector(const std::vector<double>& query,
                           const ExemplarPool& pool, std::size_t k) {
    const std::size_t m = pool.rows();
    if (m == 0) throw std::invalid_argument("classify: empty pool");
    if (k == 0) throw std::invalid_argument("classify: k must be >= 1");
    if (k > m) throw std::invalid_argument("classify: k exceeds pool size");
    if (query.size() != pool.dim)
        throw std::invalid_argument("classify: query dimension mismatch");

    const auto& kn = kernels::active();
    const double qnorm = std::sqrt(kn.sumsq(query.data(), query.size()));
    if (qnorm == 0.0)
        throw std::domain_error("classify: query encodes to the zero vector");

    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = pool.vectors.data() + i * pool.dim;
        const double rnorm = std::sqrt(kn.sumsq(row, pool.dim));
        const double cos = kn.dot(query.data(), row, pool.dim) /
                           (qnorm * rnorm);
        scored.emplace_back(cos, i);
    }
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) {
                  if (a.first != b.first) return a.first > b.first;
                  return a.second < b.second;
              });

    Prediction pred;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t row = scored[i].second;
        pred.neighbor_ids.push_back(pool.ids[row]);
        pred.neighbor_labels.push_back(pool.labels[row]);
        pred.similarities.push_back(scored[i].first);
    }

    if (k == 1) {
        pred.label = pred.neighbor_labels[0];
        return pred;
    }
    struct Tally {
        std::size_t votes = 0;
        double similarity = 0.0;
    };
    std::map<std::string, Tally> tallies;
    for (std::size_t i = 0; i < k; ++i) {
        Tally& t = tallies[pred.neighbor_labels[i]];
        ++t.votes;
        t.similarity += pred.similarities[i];
    }
    const std::string* best = nullptr;
    for (const auto& [label, t] : tallies) {
        if (best == nullptr) {
            best = &label;
            continue;
        }
        const Tally& bt = tallies.at(*best);
        if (t.votes > bt.votes ||
            (t.votes == bt.votes && t.similarity > bt.similarity))
            best = &label;
        // Equal votes and similarity keep the earlier label, which the
        // ordered map already made the lexicographic minimum.
    }
    pred.label = *best;
    return pred;
}

Prediction classify(const std::string& query, const ExemplarPool& pool,
                    std::size_t k, const EncoderState& enc) {
    check_fingerprint(pool, enc, "classify");
    return classify_vector(encode_rows({query}, enc), pool, k);
}

void save_pool(const ExemplarPool& pool, const std::string& vectors_path,
               const std::string& labels_path) {
    EmbeddingStore store;
    store.dim = pool.dim;
    for (std::size_t i = 0; i < pool.rows(); ++i)
        store.add(pool.ids[i],
                  {pool.vectors.begin() + i * pool.dim,
                   pool.vectors.begin() + (i + 1) * pool.dim});
    store.save(vectors_path);

    std::ofstream out(labels_path);
    if (!out)
        throw std::runtime_error("pool: cannot write " + labels_path);
    out << "#fingerprint=" << pool.fingerprint << "\n";
    for (std::size_t i = 0; i < pool.rows(); ++i)
        out << pool.ids[i] << "\t" << pool.labels[i] << "\n";
    if (!out.good()) throw std::runtime_error("pool: write failed");
}

ExemplarPool load_pool(const std::string& vectors_path,
                       const std::string& labels_path) {
    EmbeddingStore store = EmbeddingStore::load(vectors_path);

    std::ifstream in(labels_path);
    if (!in)
        throw std::runtime_error("pool: cannot read " + labels_path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("#fingerprint=", 0) != 0)
        throw std::runtime_error("pool: " + labels_path +
                                 " has no fingerprint line");
    ExemplarPool pool;
    pool.fingerprint = line.substr(std::string("#fingerprint=").size());
    pool.dim = store.dim;
    std::size_t lineno = 1;
    std::unordered_set<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size())
            throw std::runtime_error("pool: " + labels_path + ":" +
                                     std::to_string(lineno) +
                                     ": expected id<TAB>label");
        const std::string id = line.substr(0, tab);
        if (!seen.insert(id).second)
            throw std::runtime_error("pool: " + labels_path + ":" +
                                     std::to_string(lineno) +
                                     ": duplicate label for id '" + id + "'");
        const double* row = store.lookup(id);  // throws on unknown id
        pool.ids.push_back(id);
        pool.labels.push_back(line.substr(tab + 1));
        pool.vectors.insert(pool.vectors.end(), row, row + store.dim);
    }
    if (pool.rows() != store.ids.size())
        throw std::runtime_error("pool: " + labels_path +
                                 " does not cover every vector");
    return pool;
}

}  // namespace convfit
