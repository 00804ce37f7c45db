#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Tokenization and hashed n-gram features. Tokens are lowercased
// (ASCII), split on Unicode whitespace, with ASCII punctuation stripped
// from token edges. Features are FNV-1a hashes of n-gram strings taken
// modulo the bucket count; multiplicity is preserved.

namespace convfit {

struct Feature {
    std::size_t id;     // bucket index
    std::size_t count;  // multiplicity within the utterance

    bool operator==(const Feature&) const = default;
};

std::uint64_t fnv1a64(std::string_view s);

// Truncates to max_seq_len tokens. Empty input gives an empty list.
std::vector<std::string> tokenize(const std::string& text,
                                  std::size_t max_seq_len);

// Contiguous n-grams for every order, joined with an 0x1f separator
// before hashing so "ab"+"c" and "a"+"bc" land in different buckets.
// Result is sorted by id.
std::vector<Feature> featurize(const std::vector<std::string>& tokens,
                               const std::vector<std::size_t>& ngram_orders,
                               std::size_t hash_buckets);

}  // namespace convfit
