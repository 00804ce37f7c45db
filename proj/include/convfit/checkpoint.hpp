#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "convfit/encoder.hpp"
#include "convfit/optim.hpp"
#include "convfit/tensor.hpp"

// Binary checkpoint container. Layout: magic "CFIT", u32 version, u32
// JSON header length, the UTF-8 JSON header (encoder config, metadata,
// tensor directory with byte offsets), raw little-endian f32 tensor
// payloads, and a trailing CRC32 over everything before it. Values are
// stored single-precision, so save followed by load is the identity on
// the stored floats.

namespace convfit {

struct CheckpointVersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CheckpointCorruptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TensorEntry {
    std::string name;
    Shape shape;
    std::vector<float> data;

    bool operator==(const TensorEntry&) const = default;
};

struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    EncoderConfig enc_cfg;
    std::vector<TensorEntry> tensors;
    nlohmann::json meta;  // stage, seed, lineage, ...

    const TensorEntry* find(const std::string& name) const;
};

std::uint32_t crc32_ieee(const unsigned char* data, std::size_t n);

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(const unsigned char* data, std::size_t size);

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a over the serialized bytes, as 16 hex digits. Binds exemplar
// pools to the exact parameters that produced them.
std::string checkpoint_fingerprint(const Checkpoint& ck);

// Parameter packing. Tensor values are narrowed to f32 on the way in and
// widened back on the way out.
Checkpoint make_checkpoint(const EncoderConfig& cfg,
                           const EncoderParams& params, nlohmann::json meta);
EncoderParams params_from_checkpoint(const Checkpoint& ck);

// Optimizer moments as extra "opt.m.*" / "opt.v.*" entries plus an
// "opt_step" metadata field.
void add_optimizer_state(Checkpoint& ck, const AdamW& opt);
void restore_optimizer_state(const Checkpoint& ck, AdamW& opt);

}  // namespace convfit
