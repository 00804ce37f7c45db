#include "convfit/checkpoint.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "convfit/text.hpp"

namespace convfit {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'C', 'F', 'I', 'T'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) |
           (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_f32(std::vector<unsigned char>& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

float get_f32(const unsigned char* p) {
    const std::uint32_t bits = get_u32(p);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

json encoder_to_json(const EncoderConfig& cfg) {
    return {{"embed_dim", cfg.embed_dim},
            {"hash_buckets", cfg.hash_buckets},
            {"max_seq_len", cfg.max_seq_len},
            {"ngram_orders", cfg.ngram_orders},
            {"projection_dim", cfg.projection_dim},
            {"mode", cfg.mode}};
}

EncoderConfig encoder_from_json(const json& j) {
    EncoderConfig cfg;
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    cfg.hash_buckets = j.at("hash_buckets").get<std::size_t>();
    cfg.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    cfg.ngram_orders = j.at("ngram_orders").get<std::vector<std::size_t>>();
    cfg.projection_dim = j.at("projection_dim").get<std::size_t>();
    cfg.mode = j.at("mode").get<std::string>();
    return cfg;
}

}  // namespace

std::uint32_t crc32_ieee(const unsigned char* data, std::size_t n) {
    static const auto table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t crc = 0xffffffffu;
    for (std::size_t i = 0; i < n; ++i)
        crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc ^ 0xffffffffu;
}

const TensorEntry* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck) {
    json dir = json::array();
    std::size_t offset = 0;
    for (const auto& t : ck.tensors) {
        const std::size_t bytes = t.data.size() * 4;
        dir.push_back({{"name", t.name},
                       {"shape", t.shape},
                       {"offset", offset},
                       {"length", bytes}});
        offset += bytes;
    }
    json header = {{"encoder", encoder_to_json(ck.enc_cfg)},
                   {"meta", ck.meta},
                   {"tensors", dir}};
    const std::string header_str = header.dump();

    std::vector<unsigned char> out;
    out.reserve(12 + header_str.size() + offset + 4);
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, Checkpoint::kVersion);
    put_u32(out, static_cast<std::uint32_t>(header_str.size()));
    out.insert(out.end(), header_str.begin(), header_str.end());
    for (const auto& t : ck.tensors)
        for (float f : t.data) put_f32(out, f);
    put_u32(out, crc32_ieee(out.data(), out.size()));
    return out;
}

Checkpoint parse_checkpoint(const unsigned char* data, std::size_t size) {
    if (size < 16 || std::memcmp(data, kMagic, 4) != 0)
        throw CheckpointCorruptError(
            "checkpoint: missing CFIT magic or file too short");
    const std::uint32_t version = get_u32(data + 4);
    if (version != Checkpoint::kVersion)
        throw CheckpointVersionError(
            "checkpoint: version " + std::to_string(version) +
            " does not match reader version " +
            std::to_string(Checkpoint::kVersion));
    const std::uint32_t header_len = get_u32(data + 8);
    if (12 + static_cast<std::size_t>(header_len) + 4 > size)
        throw CheckpointCorruptError("checkpoint: truncated header");

    const std::uint32_t stored_crc = get_u32(data + size - 4);
    if (crc32_ieee(data, size - 4) != stored_crc)
        throw CheckpointCorruptError("checkpoint: checksum failure");

    json header = json::parse(data + 12, data + 12 + header_len, nullptr,
                              false);
    if (header.is_discarded())
        throw CheckpointCorruptError("checkpoint: malformed JSON header");

    Checkpoint ck;
    ck.enc_cfg = encoder_from_json(header.at("encoder"));
    ck.meta = header.at("meta");

    const unsigned char* payload = data + 12 + header_len;
    const std::size_t payload_size = size - 12 - header_len - 4;
    for (const auto& entry : header.at("tensors")) {
        TensorEntry t;
        t.name = entry.at("name").get<std::string>();
        t.shape = entry.at("shape").get<Shape>();
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        const std::size_t length = entry.at("length").get<std::size_t>();
        if (offset + length > payload_size || length % 4 != 0)
            throw CheckpointCorruptError(
                "checkpoint: tensor '" + t.name +
                "' extends beyond the payload");
        std::size_t numel = 1;
        for (std::size_t d : t.shape) numel *= d;
        if (numel * 4 != length)
            throw CheckpointCorruptError("checkpoint: tensor '" + t.name +
                                         "' shape disagrees with length");
        t.data.reserve(length / 4);
        for (std::size_t i = 0; i < length; i += 4)
            t.data.push_back(get_f32(payload + offset + i));
        ck.tensors.push_back(std::move(t));
    }
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    const auto bytes = serialize_checkpoint(ck);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    std::vector<unsigned char> bytes(
        (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes.data(), bytes.size());
}

std::string checkpoint_fingerprint(const Checkpoint& ck) {
    const auto bytes = serialize_checkpoint(ck);
    const std::uint64_t h = fnv1a64(std::string_view(
        reinterpret_cast<const char*>(bytes.data()), bytes.size()));
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
}

namespace {

TensorEntry pack_tensor(const std::string& name, const Tensor& t) {
    TensorEntry e;
    e.name = name;
    e.shape = t.shape();
    e.data.reserve(t.numel());
    for (double v : t.value()) e.data.push_back(static_cast<float>(v));
    return e;
}

Tensor unpack_tensor(const TensorEntry& e, bool requires_grad) {
    std::vector<double> values;
    values.reserve(e.data.size());
    for (float f : e.data) values.push_back(static_cast<double>(f));
    return Tensor::from(e.shape, std::move(values), requires_grad);
}

}  // namespace

Checkpoint make_checkpoint(const EncoderConfig& cfg,
                           const EncoderParams& params, nlohmann::json meta) {
    Checkpoint ck;
    ck.enc_cfg = cfg;
    ck.meta = std::move(meta);
    ck.meta["projection_enabled"] = params.projection_enabled;
    if (params.embedding_table.defined())
        ck.tensors.push_back(
            pack_tensor("embedding_table", params.embedding_table));
    if (params.projection_enabled) {
        ck.tensors.push_back(pack_tensor("proj_weight", params.proj_weight));
        ck.tensors.push_back(pack_tensor("proj_bias", params.proj_bias));
    }
    return ck;
}

EncoderParams params_from_checkpoint(const Checkpoint& ck) {
    EncoderParams params;
    if (const TensorEntry* e = ck.find("embedding_table"))
        params.embedding_table = unpack_tensor(*e, true);
    params.projection_enabled =
        ck.meta.value("projection_enabled", false);
    if (params.projection_enabled) {
        const TensorEntry* w = ck.find("proj_weight");
        const TensorEntry* b = ck.find("proj_bias");
        if (w == nullptr || b == nullptr)
            throw CheckpointCorruptError(
                "checkpoint: projection enabled but head tensors missing");
        params.proj_weight = unpack_tensor(*w, true);
        params.proj_bias = unpack_tensor(*b, true);
    }
    return params;
}

void add_optimizer_state(Checkpoint& ck, const AdamW& opt) {
    for (const auto& slot : opt.slots()) {
        TensorEntry m;
        m.name = "opt.m." + slot.name;
        m.shape = {slot.m.size()};
        m.data.reserve(slot.m.size());
        for (double v : slot.m) m.data.push_back(static_cast<float>(v));
        ck.tensors.push_back(std::move(m));

        TensorEntry s;
        s.name = "opt.v." + slot.name;
        s.shape = {slot.v.size()};
        s.data.reserve(slot.v.size());
        for (double v : slot.v) s.data.push_back(static_cast<float>(v));
        ck.tensors.push_back(std::move(s));
    }
    ck.meta["opt_step"] = opt.step_count();
}

void restore_optimizer_state(const Checkpoint& ck, AdamW& opt) {
    for (const auto& slot : opt.slots()) {
        const TensorEntry* m = ck.find("opt.m." + slot.name);
        const TensorEntry* v = ck.find("opt.v." + slot.name);
        if (m == nullptr || v == nullptr)
            throw std::invalid_argument(
                "checkpoint: no optimizer state for '" + slot.name + "'");
        std::vector<double> md(m->data.begin(), m->data.end());
        std::vector<double> vd(v->data.begin(), v->data.end());
        opt.load_state(slot.name, std::move(md), std::move(vd));
    }
    opt.set_step_count(ck.meta.value("opt_step", std::size_t{0}));
}

}  // namespace convfit
