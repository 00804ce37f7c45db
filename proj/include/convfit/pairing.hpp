#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "convfit/data.hpp"

// Pair construction for both training stages and N-shot subsampling.
// Everything here is a pure seeded function of its inputs.

namespace convfit {

struct PairSet {
    // Index pairs into the dataset build_pairs was given.
    std::vector<std::pair<std::size_t, std::size_t>> positives;
    std::vector<std::pair<std::size_t, std::size_t>> negatives;
    std::size_t n = 0;  // negatives drawn per positive, per side

    bool operator==(const PairSet&) const = default;
};

// Positives: all within-class pairs (i<j in dataset order), optionally
// capped per anchor by a seeded subsample. Negatives: for each positive
// (i,j), n draws without replacement of out-of-class utterances paired as
// (i, neg), then n more paired as (neg, j).
PairSet build_pairs(const std::vector<LabeledUtterance>& data, std::size_t n,
                    std::uint64_t seed,
                    std::size_t max_positives_per_anchor = 50);

// Seeded shuffle, then consecutive blocks of exactly batch_size; the
// remainder is dropped because the in-batch objective needs every slot.
std::vector<std::vector<ResponsePair>> make_mneg_batches(
    const std::vector<ResponsePair>& pairs, std::size_t batch_size,
    std::uint64_t seed);

// Exactly shots_per_class utterances per class, drawn uniformly without
// replacement; output ordered by class name, then original order.
std::vector<LabeledUtterance> sample_few_shot(
    const std::vector<LabeledUtterance>& data, std::size_t shots_per_class,
    std::uint64_t seed);

}  // namespace convfit
