#include "convfit/text.hpp"

#include <algorithm>
#include <map>

namespace convfit {

namespace {

bool is_unicode_space(std::uint32_t cp) {
    switch (cp) {
        case 0x09: case 0x0a: case 0x0b: case 0x0c: case 0x0d:
        case 0x20: case 0x85: case 0xa0: case 0x1680:
        case 0x2028: case 0x2029: case 0x202f: case 0x205f: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200a;
    }
}

bool is_ascii_punct(unsigned char c) {
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
           (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

// Decodes one UTF-8 code point starting at i, advancing i. Malformed
// bytes are passed through as single-byte code points.
std::uint32_t next_codepoint(const std::string& s, std::size_t& i,
                             std::size_t& len) {
    const unsigned char c0 = static_cast<unsigned char>(s[i]);
    std::size_t want = 0;
    std::uint32_t cp = c0;
    if (c0 < 0x80) {
        want = 0;
    } else if ((c0 & 0xe0) == 0xc0) {
        want = 1;
        cp = c0 & 0x1f;
    } else if ((c0 & 0xf0) == 0xe0) {
        want = 2;
        cp = c0 & 0x0f;
    } else if ((c0 & 0xf8) == 0xf0) {
        want = 3;
        cp = c0 & 0x07;
    }
    std::size_t j = i + 1;
    for (std::size_t k = 0; k < want; ++k, ++j) {
        if (j >= s.size() ||
            (static_cast<unsigned char>(s[j]) & 0xc0) != 0x80) {
            len = 1;
            i += 1;
            return c0;  // malformed: emit the lead byte alone
        }
        cp = (cp << 6) | (static_cast<unsigned char>(s[j]) & 0x3f);
    }
    len = want + 1;
    i += len;
    return cp;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> tokenize(const std::string& text,
                                  std::size_t max_seq_len) {
    std::vector<std::string> tokens;
    std::string current;

    auto flush = [&]() {
        // Strip ASCII punctuation from both edges, then lowercase.
        std::size_t b = 0;
        std::size_t e = current.size();
        while (b < e && is_ascii_punct(static_cast<unsigned char>(current[b])))
            ++b;
        while (e > b &&
               is_ascii_punct(static_cast<unsigned char>(current[e - 1])))
            --e;
        if (e > b && tokens.size() < max_seq_len) {
            std::string tok = current.substr(b, e - b);
            for (char& c : tok)
                if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
            tokens.push_back(std::move(tok));
        }
        current.clear();
    };

    std::size_t i = 0;
    while (i < text.size() && tokens.size() < max_seq_len) {
        const std::size_t start = i;
        std::size_t len = 0;
        const std::uint32_t cp = next_codepoint(text, i, len);
        if (is_unicode_space(cp))
            flush();
        else
            current.append(text, start, len);
    }
    flush();
    return tokens;
}

std::vector<Feature> featurize(const std::vector<std::string>& tokens,
                               const std::vector<std::size_t>& ngram_orders,
                               std::size_t hash_buckets) {
    std::map<std::size_t, std::size_t> counts;
    std::string joined;
    for (std::size_t n : ngram_orders) {
        if (n == 0 || n > tokens.size()) continue;
        for (std::size_t start = 0; start + n <= tokens.size(); ++start) {
            joined.clear();
            for (std::size_t k = 0; k < n; ++k) {
                if (k > 0) joined.push_back('\x1f');
                joined += tokens[start + k];
            }
            ++counts[static_cast<std::size_t>(fnv1a64(joined) % hash_buckets)];
        }
    }
    std::vector<Feature> out;
    out.reserve(counts.size());
    for (const auto& [id, count] : counts) out.push_back({id, count});
    return out;
}

}  // namespace convfit
