#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "convfit/baseline.hpp"
#include "convfit/checkpoint.hpp"
#include "convfit/data.hpp"
#include "convfit/encoder.hpp"
#include "convfit/losses.hpp"
#include "convfit/metrics.hpp"
#include "convfit/optim.hpp"
#include "convfit/synthetic.hpp"

// Experiment driver: per-seed train/evaluate runs over a JSON-described
// configuration, aggregated into report files. Both stages are optional,
// so the four on/off combinations (including the untrained-encoder
// nearest-neighbour run) share one code path.

namespace convfit {

struct ExperimentPaths {
    std::string train_data = "data/train.jsonl";
    std::string test_data = "data/test.jsonl";
    std::string s1_corpus = "data/s1.jsonl";
    std::string checkpoint_dir = "checkpoints";
    std::string report_dir = "reports";
};

struct ExperimentConfig {
    ExperimentPaths paths;
    bool run_s1 = true;
    bool run_s2 = true;
    std::string loss_kind = "ocl";
    std::size_t n = 3;             // negatives per positive, times two
    std::string n_shot = "10";     // "10", "30", or "full"
    std::size_t k = 1;             // neighbours at classification time
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    EncoderConfig encoder{.hash_buckets = 1u << 14};
    OptimConfig s1_optim{.lr = 0.05, .epochs = 3};
    OptimConfig s2_optim{.lr = 0.05, .epochs = 10};
    LossConfig loss;
    SyntheticSpec synthetic;
    MlpConfig mlp;

    void validate() const;  // throws std::invalid_argument
    std::string variant() const;
    // Examples per intent, or nullopt when the full training set is used.
    std::optional<std::size_t> shots() const;
};

// Partial configs are fine: absent keys keep their defaults, unknown
// keys are an error. Both throw std::invalid_argument on bad input.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Exactly `shots` examples per label, drawn without replacement, seeded.
// Labels are visited in sorted order, so the draw is order-independent.
std::vector<LabeledUtterance> n_shot_subset(
    const std::vector<LabeledUtterance>& train, std::size_t shots,
    std::uint64_t seed);

struct PipelineResult {
    std::string variant;
    std::string n_shot;
    std::vector<EvalReport> runs;      // one per seed
    std::vector<double> silhouettes;   // test-set coherence per seed
    EvalReport aggregate;
    std::string report_path;
    std::string table_path;
    std::string table_text;
};

// Per seed: optional response-ranking stage, optional task-contrastive
// stage, exemplar pool from the same N-shot subset the tuning saw,
// nearest-neighbour classification of the test set. Writes the
// aggregate report JSON and a one-row accuracy table; both files are
// byte-stable across reruns of the same config.
PipelineResult run_pipeline(const ExperimentConfig& cfg);

struct AugmentProbeResult {
    std::vector<std::string> pool_names;  // "10", "30", "full"
    std::vector<EvalReport> aggregates;   // parallel to pool_names
    std::string report_path;
};

// Trains once per seed at 10-shot, then evaluates against progressively
// larger exemplar pools (10/30/full per intent) without retraining.
AugmentProbeResult augment_probe(const ExperimentConfig& cfg);

struct MlpBaselineResult {
    std::vector<EvalReport> runs;
    EvalReport aggregate;
    std::string report_path;
};

// Classifier baseline: frozen encoder (untrained, or response-ranked
// when run_s1 is set), an MLP trained on the N-shot embeddings, argmax
// prediction on the test set.
MlpBaselineResult run_mlp_baseline(const ExperimentConfig& cfg);

// Encoded dataset as an embedding TSV plus a labels sidecar carrying the
// encoder fingerprint; the pair reloads through load_pool.
void export_embeddings(const Checkpoint& ck,
                       const std::vector<LabeledUtterance>& data,
                       const std::string& out_path);

}  // namespace convfit
