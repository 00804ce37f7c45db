#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "convfit/checkpoint.hpp"
#include "convfit/data.hpp"
#include "convfit/encoder.hpp"
#include "convfit/losses.hpp"
#include "convfit/optim.hpp"

// The two training stages. Both are pure functions of (data, configs,
// seed): the input parameters are copied, every shuffle and init is
// seeded, and the returned checkpoint is bit-reproducible. Metadata
// carries the stage, lineage, pair counts and the per-step loss curve.

namespace convfit {

// Response-ranking stage. Contexts and responses go through the same
// encoder (shared parameters, applied twice per batch). Each epoch
// reshuffles the corpus with seed+epoch; trailing pairs that do not fill
// a batch are dropped because the in-batch objective needs every slot.
// The result carries no projection head.
Checkpoint train_stage1(const std::vector<ResponsePair>& corpus,
                        const EncoderConfig& enc_cfg,
                        const EncoderParams& params,
                        const OptimConfig& opt_cfg,
                        const LossConfig& loss_cfg);

// Task-contrastive stage. loss_kind is "smax", "cos" or "ocl" (online
// hard-pair mining). Pairs are built once from the seed with n negatives
// per positive per side; each epoch walks the flattened positive+negative
// list in a fresh seeded order, keeping short final batches. Starts from
// `init` when given (encoder config must match) or from a fresh seeded
// encoder, and attaches a fresh projection head when the starting point
// has none. The smax scoring head is trained alongside but never enters
// the checkpoint. With epochs == 0 the setup still runs but no step is
// taken, so parameters present in `init` come back unchanged. External
// encoder mode trains the head over frozen store vectors looked up by
// utterance id.
Checkpoint train_stage2(const std::vector<LabeledUtterance>& data,
                        const std::string& loss_kind, std::size_t n,
                        const EncoderConfig& enc_cfg,
                        const std::optional<Checkpoint>& init,
                        const OptimConfig& opt_cfg,
                        const LossConfig& loss_cfg,
                        const EmbeddingStore* store = nullptr);

}  // namespace convfit
