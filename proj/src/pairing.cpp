#include "convfit/pairing.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

#include "convfit/rng.hpp"

namespace convfit {

PairSet build_pairs(const std::vector<LabeledUtterance>& data, std::size_t n,
                    std::uint64_t seed,
                    std::size_t max_positives_per_anchor) {
    if (n == 0) throw std::invalid_argument("build_pairs: n must be at least 1");

    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < data.size(); ++i)
        by_label[data[i].label].push_back(i);
    if (by_label.size() < 2)
        throw std::invalid_argument("build_pairs: need at least 2 classes");
    for (const auto& [label, members] : by_label)
        if (members.size() < 2)
            throw std::invalid_argument("build_pairs: class '" + label +
                                        "' has only one utterance");

    Rng rng(seed);
    PairSet set;
    set.n = n;

    // Positives in dataset order of the anchor; the per-anchor cap
    // subsamples the partner list, preserving order.
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::vector<std::size_t> partners;
        for (std::size_t j : by_label[data[i].label])
            if (j > i) partners.push_back(j);
        if (max_positives_per_anchor > 0 &&
            partners.size() > max_positives_per_anchor) {
            auto picks = rng.sample(partners.size(), max_positives_per_anchor);
            std::sort(picks.begin(), picks.end());
            std::vector<std::size_t> kept;
            kept.reserve(picks.size());
            for (std::size_t p : picks) kept.push_back(partners[p]);
            partners = std::move(kept);
        }
        for (std::size_t j : partners) set.positives.emplace_back(i, j);
    }

    // Out-of-class candidates per label, in dataset order.
    std::map<std::string, std::vector<std::size_t>> negatives_for;
    for (const auto& [label, members] : by_label) {
        auto& cand = negatives_for[label];
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data[i].label != label) cand.push_back(i);
    }

    for (const auto& [i, j] : set.positives) {
        const auto& cand = negatives_for[data[i].label];
        if (cand.size() < n)
            throw std::invalid_argument(
                "build_pairs: class '" + data[i].label + "' has only " +
                std::to_string(cand.size()) +
                " out-of-class utterances, need " + std::to_string(n));
        for (std::size_t p : rng.sample(cand.size(), n))
            set.negatives.emplace_back(i, cand[p]);
        for (std::size_t p : rng.sample(cand.size(), n))
            set.negatives.emplace_back(cand[p], j);
    }
    return set;
}

std::vector<std::vector<ResponsePair>> make_mneg_batches(
    const std::vector<ResponsePair>& pairs, std::size_t batch_size,
    std::uint64_t seed) {
    if (batch_size < 2)
        throw std::invalid_argument(
            "make_mneg_batches: batch size below 2 leaves no in-batch "
            "negatives");
    if (pairs.size() < batch_size)
        throw std::invalid_argument("make_mneg_batches: only " +
                                    std::to_string(pairs.size()) +
                                    " pairs for batch size " +
                                    std::to_string(batch_size));
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    std::vector<std::vector<ResponsePair>> batches;
    const std::size_t full = pairs.size() / batch_size;
    batches.reserve(full);
    for (std::size_t b = 0; b < full; ++b) {
        std::vector<ResponsePair> batch;
        batch.reserve(batch_size);
        for (std::size_t k = 0; k < batch_size; ++k)
            batch.push_back(pairs[order[b * batch_size + k]]);
        batches.push_back(std::move(batch));
    }
    return batches;
}

std::vector<LabeledUtterance> sample_few_shot(
    const std::vector<LabeledUtterance>& data, std::size_t shots_per_class,
    std::uint64_t seed) {
    if (shots_per_class == 0)
        throw std::invalid_argument("sample_few_shot: need at least 1 shot");

    std::map<std::string, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < data.size(); ++i)
        by_label[data[i].label].push_back(i);

    Rng rng(seed);
    std::vector<LabeledUtterance> out;
    out.reserve(by_label.size() * shots_per_class);
    for (const auto& [label, members] : by_label) {
        if (members.size() < shots_per_class)
            throw std::invalid_argument(
                "sample_few_shot: class '" + label + "' has " +
                std::to_string(members.size()) + " examples, need " +
                std::to_string(shots_per_class));
        auto picks = rng.sample(members.size(), shots_per_class);
        std::sort(picks.begin(), picks.end());
        for (std::size_t p : picks) out.push_back(data[members[p]]);
    }
    return out;
}

}  // namespace convfit
