#include "convfit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "convfit/rng.hpp"
#include "convfit/text.hpp"

namespace convfit {
namespace {

const std::vector<std::string> kSyllables = {
    "ba", "de", "ki", "mo", "ru", "sa", "te", "vu",
    "za", "ne", "po", "li", "fa", "go", "hu", "wi"};

// Carrier frames shared by every intent; "K" marks the keyword slot and
// "F" the filler slot. Heavy frame overlap across intents is deliberate:
// it keeps raw surface similarity uninformative about the label.
const std::vector<std::vector<std::string>> kFrames = {
    {"i", "need", "help", "with", "my", "K", "F"},
    {"please", "sort", "out", "the", "K", "for", "me", "F"},
    {"there", "is", "an", "issue", "with", "the", "K", "F"},
    {"how", "can", "i", "get", "the", "K", "fixed", "F"},
    {"my", "K", "is", "not", "working", "F"},
    {"can", "you", "check", "the", "K", "F"},
    {"what", "happened", "to", "my", "K", "F"},
    {"tell", "me", "about", "the", "K", "F"},
};

const std::vector<std::vector<std::string>> kFillers = {
    {"today"},
    {"right", "now"},
    {"again"},
    {"as", "soon", "as", "possible"},
    {"please"},
    {"for", "me"},
    {"this", "time"},
    {"once", "more"},
};

constexpr std::size_t kKeywordVariants = 4;
constexpr std::size_t kMaxRegenerations = 20;

// m-th word of an unbounded synthetic vocabulary; distinct m give
// distinct words, and none collide with the English carrier tokens.
std::string synth_word(std::size_t m) {
    const std::size_t s = kSyllables.size();
    return kSyllables[m % s] + kSyllables[(m / s) % s] +
           kSyllables[(m / (s * s)) % s];
}

std::string intent_label(std::size_t i) {
    std::ostringstream out;
    out << "intent_" << i;
    return out.str();
}

// Keyword words for intent i: a stem present in every utterance of the
// intent followed by its variants. `family` selects disjoint
// vocabularies (0 = task intents, 1 = the separate response-ranking
// vocabulary); the family prefix is not a syllable, so the families can
// never collide.
std::vector<std::string> keywords_for(std::size_t i, std::size_t family) {
    const std::string prefix = family == 0 ? "" : "yo";
    std::vector<std::string> words;
    words.push_back(prefix + synth_word(i * 8));
    for (std::size_t k = 0; k < kKeywordVariants; ++k)
        words.push_back(prefix + synth_word(i * 8 + 1 + k));
    return words;
}

// One utterance: frame with the keyword phrase and a filler spliced in,
// then token-drop noise on everything except the keyword phrase.
std::vector<std::string> sample_tokens(std::size_t intent,
                                       std::size_t family,
                                       const SyntheticSpec& spec, Rng& rng) {
    const auto& frame =
        kFrames[(intent * 3 + rng.index(spec.templates_per_intent)) %
                kFrames.size()];
    const auto words = keywords_for(intent, family);
    const std::string& stem = words[0];
    const std::string& variant = words[1 + rng.index(kKeywordVariants)];
    const auto& filler = kFillers[rng.index(spec.fillers_per_slot)];

    std::vector<std::string> tokens;
    for (const auto& slot : frame) {
        if (slot == "K") {
            tokens.push_back(stem);
            tokens.push_back(variant);
        } else if (slot == "F") {
            for (const auto& w : filler) {
                if (rng.unit() >= spec.noise) tokens.push_back(w);
            }
        } else {
            if (rng.unit() >= spec.noise) tokens.push_back(slot);
        }
    }
    return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

// Draws `count` utterances for one intent whose surface forms are absent
// from `taken`, extending `taken` as it goes.
std::vector<std::string> draw_disjoint(std::size_t intent, std::size_t count,
                                       const SyntheticSpec& spec, Rng& rng,
                                       std::unordered_set<std::string>& taken,
                                       const char* split) {
    std::vector<std::string> texts;
    const std::size_t max_attempts = 200 * count + 200;
    std::size_t attempts = 0;
    while (texts.size() < count) {
        if (++attempts > max_attempts) {
            std::ostringstream msg;
            msg << "generate_synthetic: cannot draw " << count
                << " distinct " << split << " utterances for "
                << intent_label(intent)
                << "; enlarge templates_per_intent, fillers_per_slot, or "
                   "noise";
            throw std::runtime_error(msg.str());
        }
        std::string text = join_tokens(sample_tokens(intent, 0, spec, rng));
        if (taken.insert(text).second) texts.push_back(std::move(text));
    }
    return texts;
}

// Nearest-centroid accuracy over raw term counts, the separability bar
// each candidate corpus must clear.
double centroid_accuracy(const std::vector<LabeledUtterance>& train,
                         const std::vector<LabeledUtterance>& test) {
    std::map<std::string, std::unordered_map<std::string, double>> centroids;
    std::map<std::string, double> counts;
    for (const auto& u : train) {
        for (const auto& tok : tokenize(u.text, 64))
            centroids[u.label][tok] += 1.0;
        counts[u.label] += 1.0;
    }
    for (auto& [label, centroid] : centroids)
        for (auto& [tok, value] : centroid) value /= counts[label];

    std::size_t hits = 0;
    for (const auto& u : test) {
        std::unordered_map<std::string, double> bow;
        for (const auto& tok : tokenize(u.text, 64)) bow[tok] += 1.0;
        double best = 0.0;
        std::string best_label;
        for (const auto& [label, centroid] : centroids) {
            double dot = 0.0, norm_c = 0.0, norm_b = 0.0;
            for (const auto& [tok, value] : centroid) {
                norm_c += value * value;
                auto it = bow.find(tok);
                if (it != bow.end()) dot += value * it->second;
            }
            for (const auto& [tok, value] : bow) norm_b += value * value;
            const double denom = std::sqrt(norm_c) * std::sqrt(norm_b);
            const double sim = denom > 0.0 ? dot / denom : 0.0;
            if (best_label.empty() || sim > best) {
                best = sim;
                best_label = label;
            }
        }
        if (best_label == u.label) ++hits;
    }
    return test.empty() ? 0.0 : static_cast<double>(hits) / test.size();
}

SyntheticData generate_once(const SyntheticSpec& spec, std::uint64_t seed) {
    SyntheticData out;
    Rng rng(seed);

    std::unordered_set<std::string> taken;
    for (std::size_t i = 0; i < spec.n_intents; ++i) {
        const std::string label = intent_label(i);
        out.intent_keywords[label] = keywords_for(i, 0);
        auto train_texts =
            draw_disjoint(i, spec.train_per_intent, spec, rng, taken, "train");
        auto test_texts =
            draw_disjoint(i, spec.test_per_intent, spec, rng, taken, "test");
        for (std::size_t j = 0; j < train_texts.size(); ++j) {
            std::ostringstream id;
            id << "tr_" << i << "_" << j;
            out.train.push_back({id.str(), train_texts[j], label});
        }
        for (std::size_t j = 0; j < test_texts.size(); ++j) {
            std::ostringstream id;
            id << "te_" << i << "_" << j;
            out.test.push_back({id.str(), test_texts[j], label});
        }
    }

    const std::size_t family = spec.shared_vocab_with_s1 ? 0 : 1;
    for (std::size_t j = 0; j < spec.s1_pairs; ++j) {
        const std::size_t intent = j % spec.n_intents;
        std::string context =
            join_tokens(sample_tokens(intent, family, spec, rng));
        std::string response;
        do {
            response = join_tokens(sample_tokens(intent, family, spec, rng));
        } while (response == context);
        out.s1_corpus.push_back({std::move(context), std::move(response)});
    }
    return out;
}

}  // namespace

void SyntheticSpec::validate() const {
    if (n_intents < 2)
        throw std::invalid_argument("synthetic: n_intents must be >= 2");
    if (n_intents > 512)
        throw std::invalid_argument(
            "synthetic: n_intents exceeds the keyword vocabulary (512)");
    if (noise < 0.0 || noise >= 1.0)
        throw std::invalid_argument("synthetic: noise must be in [0, 1)");
    if (templates_per_intent == 0)
        throw std::invalid_argument(
            "synthetic: templates_per_intent must be >= 1");
    if (fillers_per_slot == 0 || fillers_per_slot > kFillers.size())
        throw std::invalid_argument(
            "synthetic: fillers_per_slot must be between 1 and " +
            std::to_string(kFillers.size()));
    if (train_per_intent == 0 || test_per_intent == 0)
        throw std::invalid_argument(
            "synthetic: train_per_intent and test_per_intent must be >= 1");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    for (std::size_t attempt = 0; attempt < kMaxRegenerations; ++attempt) {
        SyntheticData data = generate_once(
            spec, attempt == 0 ? spec.seed : derive_seed(spec.seed, attempt));
        if (centroid_accuracy(data.train, data.test) >= 0.95) return data;
    }
    throw std::runtime_error(
        "generate_synthetic: no candidate corpus reached 0.95 "
        "nearest-centroid accuracy");
}

}  // namespace convfit
