#include "convfit/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "convfit/inference.hpp"
#include "convfit/pairing.hpp"
#include "convfit/rng.hpp"
#include "convfit/trainer.hpp"

namespace convfit {
namespace {

namespace fs = std::filesystem;

void reject_unknown_keys(const nlohmann::json& j, const char* section,
                         const std::set<std::string>& known) {
    if (!j.is_object())
        throw std::invalid_argument(std::string("config: ") + section +
                                    " must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key))
            throw std::invalid_argument(std::string("config: unknown key '") +
                                        key + "' in " + section);
    }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            throw std::invalid_argument(
                std::string("config: key '") + key + "' has the wrong type");
        }
    }
}

ExperimentPaths paths_from_json(const nlohmann::json& j,
                                ExperimentPaths base) {
    reject_unknown_keys(j, "paths",
                        {"train_data", "test_data", "s1_corpus",
                         "checkpoint_dir", "report_dir"});
    read_key(j, "train_data", base.train_data);
    read_key(j, "test_data", base.test_data);
    read_key(j, "s1_corpus", base.s1_corpus);
    read_key(j, "checkpoint_dir", base.checkpoint_dir);
    read_key(j, "report_dir", base.report_dir);
    return base;
}

EncoderConfig encoder_from_json(const nlohmann::json& j, EncoderConfig base) {
    reject_unknown_keys(j, "encoder",
                        {"embed_dim", "hash_buckets", "max_seq_len",
                         "ngram_orders", "projection_dim", "mode"});
    read_key(j, "embed_dim", base.embed_dim);
    read_key(j, "hash_buckets", base.hash_buckets);
    read_key(j, "max_seq_len", base.max_seq_len);
    read_key(j, "ngram_orders", base.ngram_orders);
    read_key(j, "projection_dim", base.projection_dim);
    read_key(j, "mode", base.mode);
    return base;
}

OptimConfig optim_from_json(const nlohmann::json& j, const char* section,
                            OptimConfig base) {
    reject_unknown_keys(j, section,
                        {"lr", "warmup_fraction", "weight_decay", "beta1",
                         "beta2", "eps", "epochs", "batch_size"});
    read_key(j, "lr", base.lr);
    read_key(j, "warmup_fraction", base.warmup_fraction);
    read_key(j, "weight_decay", base.weight_decay);
    read_key(j, "beta1", base.beta1);
    read_key(j, "beta2", base.beta2);
    read_key(j, "eps", base.eps);
    read_key(j, "epochs", base.epochs);
    read_key(j, "batch_size", base.batch_size);
    return base;
}

LossConfig loss_from_json(const nlohmann::json& j, LossConfig base) {
    reject_unknown_keys(
        j, "loss", {"D", "delta_pos", "delta_neg", "delta_m", "mneg_form"});
    read_key(j, "D", base.D);
    read_key(j, "delta_pos", base.delta_pos);
    read_key(j, "delta_neg", base.delta_neg);
    read_key(j, "delta_m", base.delta_m);
    read_key(j, "mneg_form", base.mneg_form);
    return base;
}

SyntheticSpec synthetic_from_json(const nlohmann::json& j,
                                  SyntheticSpec base) {
    reject_unknown_keys(j, "synthetic",
                        {"n_intents", "templates_per_intent",
                         "fillers_per_slot", "noise", "shared_vocab_with_s1",
                         "seed", "train_per_intent", "test_per_intent",
                         "s1_pairs"});
    read_key(j, "n_intents", base.n_intents);
    read_key(j, "templates_per_intent", base.templates_per_intent);
    read_key(j, "fillers_per_slot", base.fillers_per_slot);
    read_key(j, "noise", base.noise);
    read_key(j, "shared_vocab_with_s1", base.shared_vocab_with_s1);
    read_key(j, "seed", base.seed);
    read_key(j, "train_per_intent", base.train_per_intent);
    read_key(j, "test_per_intent", base.test_per_intent);
    read_key(j, "s1_pairs", base.s1_pairs);
    return base;
}

MlpConfig mlp_from_json(const nlohmann::json& j, MlpConfig base) {
    reject_unknown_keys(
        j, "mlp", {"hidden_dims", "dropout", "lr", "epochs", "batch_size"});
    read_key(j, "hidden_dims", base.hidden_dims);
    read_key(j, "dropout", base.dropout);
    read_key(j, "lr", base.lr);
    read_key(j, "epochs", base.epochs);
    read_key(j, "batch_size", base.batch_size);
    return base;
}

void require_readable(const std::string& path, const char* what) {
    if (!fs::exists(path))
        throw std::invalid_argument(std::string("config: ") + what + " '" +
                                    path + "' does not exist");
}

std::string shot_tag(const std::string& n_shot) {
    return n_shot == "full" ? "full" : n_shot + "shot";
}

// Groups rows by label without losing dataset order inside a group.
std::map<std::string, std::vector<std::size_t>> rows_by_label(
    const std::vector<LabeledUtterance>& data) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < data.size(); ++i)
        groups[data[i].label].push_back(i);
    return groups;
}

// Writes text to path only through a complete stream, so a failed write
// surfaces as an exception rather than a truncated report.
void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' to write");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::string format_mean_std(const EvalReport& r) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(4) << r.mean << " +/- "
        << r.std_dev;
    return out.str();
}

std::string render_table(const std::string& variant, const std::string& n_shot,
                         const EvalReport& aggregate) {
    const std::vector<std::string> columns = {"10", "30", "full"};
    std::ostringstream out;
    out << std::left << std::setw(16) << "variant";
    for (const auto& c : columns)
        out << std::setw(18) << (c == "full" ? c : c + "-shot");
    out << "\n" << std::setw(16) << variant;
    for (const auto& c : columns)
        out << std::setw(18) << (c == n_shot ? format_mean_std(aggregate) : "-");
    out << "\n";
    return out.str();
}

// Rows of `data` encoded with a frozen checkpointed encoder, in order.
std::vector<double> encode_dataset(const EncoderState& enc,
                                   const std::vector<LabeledUtterance>& data,
                                   std::size_t& dim_out) {
    std::vector<std::string> texts;
    for (const auto& u : data) texts.push_back(u.text);
    Tape tape;
    const Tensor m = encode(tape, texts, enc.params, enc.cfg);
    dim_out = m.shape()[1];
    return m.value();
}

// Runs the configured stages for one seed and saves the result; the
// returned checkpoint already carries the f32-rounded parameters the
// saved file holds, so in-memory use matches a reload exactly.
Checkpoint train_for_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                          const std::vector<LabeledUtterance>& pool_data,
                          const std::vector<ResponsePair>& s1_corpus) {
    std::optional<Checkpoint> ck;
    if (cfg.run_s1) {
        OptimConfig o1 = cfg.s1_optim;
        o1.seed = seed;
        ck = train_stage1(s1_corpus, cfg.encoder,
                          init_encoder(cfg.encoder, seed), o1, cfg.loss);
    }
    if (cfg.run_s2) {
        OptimConfig o2 = cfg.s2_optim;
        o2.seed = seed;
        ck = train_stage2(pool_data, cfg.loss_kind, cfg.n, cfg.encoder, ck,
                          o2, cfg.loss);
    }
    if (!ck) {
        ck = make_checkpoint(cfg.encoder, init_encoder(cfg.encoder, seed),
                             {{"stage", "untrained"}, {"seed", seed}});
    }
    const fs::path ck_path =
        fs::path(cfg.paths.checkpoint_dir) /
        (cfg.variant() + "_" + shot_tag(cfg.n_shot) + "_seed" +
         std::to_string(seed) + ".ckpt");
    save_checkpoint(*ck, ck_path.string());
    return *ck;
}

std::vector<std::string> classify_all(const std::vector<LabeledUtterance>& test,
                                      const ExemplarPool& pool, std::size_t k,
                                      const EncoderState& enc) {
    std::vector<std::string> predictions;
    for (const auto& u : test)
        predictions.push_back(classify(u.text, pool, k, enc).label);
    return predictions;
}

std::vector<std::string> labels_of(const std::vector<LabeledUtterance>& data) {
    std::vector<std::string> out;
    for (const auto& u : data) out.push_back(u.label);
    return out;
}

struct SeedRun {
    EvalReport report;
    double silhouette_score = 0.0;
};

// One complete train/evaluate pass for a single seed. `pool_data` is
// both the tuning set and the exemplar pool, per the N-shot discipline.
SeedRun run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                 const std::vector<LabeledUtterance>& pool_data,
                 const std::vector<LabeledUtterance>& test,
                 const std::vector<ResponsePair>& s1_corpus) {
    const Checkpoint ck = train_for_seed(cfg, seed, pool_data, s1_corpus);
    const EncoderState enc = encoder_state_from(ck);
    const ExemplarPool pool = build_pool(pool_data, enc);

    SeedRun out;
    out.report = make_report(classify_all(test, pool, cfg.k, enc),
                             labels_of(test), seed, "cosine");
    std::size_t dim = 0;
    const std::vector<double> rows = encode_dataset(enc, test, dim);
    out.silhouette_score = silhouette(rows, dim, labels_of(test), "cosine");
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    encoder.validate();
    s1_optim.validate(true);
    s2_optim.validate();
    loss.validate();
    synthetic.validate();
    mlp.validate();
    if (encoder.mode != "trainable")
        throw std::invalid_argument(
            "config: the pipeline drives a trainable text encoder");
    if (loss_kind != "smax" && loss_kind != "cos" && loss_kind != "ocl")
        throw std::invalid_argument("config: loss_kind must be smax, cos, "
                                    "or ocl, got '" + loss_kind + "'");
    if (n == 0) throw std::invalid_argument("config: n must be >= 1");
    if (n_shot != "10" && n_shot != "30" && n_shot != "full")
        throw std::invalid_argument(
            "config: n_shot must be \"10\", \"30\", or \"full\"");
    if (k == 0) throw std::invalid_argument("config: k must be >= 1");
    if (seeds.empty())
        throw std::invalid_argument("config: seeds must be nonempty");
}

std::string ExperimentConfig::variant() const {
    if (run_s1 && run_s2) return "s1+s2-" + loss_kind;
    if (run_s2) return "s2-" + loss_kind;
    if (run_s1) return "s1";
    return "untrained";
}

std::optional<std::size_t> ExperimentConfig::shots() const {
    if (n_shot == "full") return std::nullopt;
    return n_shot == "10" ? std::size_t{10} : std::size_t{30};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object())
        throw std::invalid_argument("config: top level must be an object");
    reject_unknown_keys(j, "the top level",
                        {"paths", "run_s1", "run_s2", "loss_kind", "n",
                         "n_shot", "k", "seeds", "encoder", "s1_optim",
                         "s2_optim", "loss", "synthetic", "mlp"});
    ExperimentConfig cfg;
    if (j.contains("paths")) cfg.paths = paths_from_json(j["paths"], cfg.paths);
    read_key(j, "run_s1", cfg.run_s1);
    read_key(j, "run_s2", cfg.run_s2);
    read_key(j, "loss_kind", cfg.loss_kind);
    read_key(j, "n", cfg.n);
    read_key(j, "n_shot", cfg.n_shot);
    read_key(j, "k", cfg.k);
    read_key(j, "seeds", cfg.seeds);
    if (j.contains("encoder"))
        cfg.encoder = encoder_from_json(j["encoder"], cfg.encoder);
    if (j.contains("s1_optim"))
        cfg.s1_optim = optim_from_json(j["s1_optim"], "s1_optim", cfg.s1_optim);
    if (j.contains("s2_optim"))
        cfg.s2_optim = optim_from_json(j["s2_optim"], "s2_optim", cfg.s2_optim);
    if (j.contains("loss")) cfg.loss = loss_from_json(j["loss"], cfg.loss);
    if (j.contains("synthetic"))
        cfg.synthetic = synthetic_from_json(j["synthetic"], cfg.synthetic);
    if (j.contains("mlp")) cfg.mlp = mlp_from_json(j["mlp"], cfg.mlp);
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config: '" + path + "' is not valid "
                                    "JSON: " + e.what());
    }
    return config_from_json(j);
}

std::vector<LabeledUtterance> n_shot_subset(
    const std::vector<LabeledUtterance>& train, std::size_t shots,
    std::uint64_t seed) {
    return sample_few_shot(train, shots, derive_seed(seed, 20));
}

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    require_readable(cfg.paths.train_data, "train_data");
    require_readable(cfg.paths.test_data, "test_data");
    if (cfg.run_s1) require_readable(cfg.paths.s1_corpus, "s1_corpus");

    const auto train = load_task_jsonl(cfg.paths.train_data);
    const auto test = load_task_jsonl(cfg.paths.test_data);
    std::vector<ResponsePair> s1_corpus;
    if (cfg.run_s1) s1_corpus = load_response_jsonl(cfg.paths.s1_corpus);

    fs::create_directories(cfg.paths.checkpoint_dir);
    fs::create_directories(cfg.paths.report_dir);

    PipelineResult result;
    result.variant = cfg.variant();
    result.n_shot = cfg.n_shot;
    for (std::uint64_t seed : cfg.seeds) {
        const auto pool_data =
            cfg.shots() ? n_shot_subset(train, *cfg.shots(), seed) : train;
        SeedRun run = run_seed(cfg, seed, pool_data, test, s1_corpus);
        result.runs.push_back(std::move(run.report));
        result.silhouettes.push_back(run.silhouette_score);
    }
    result.aggregate = evaluate_runs(result.runs);

    nlohmann::json report;
    report["variant"] = result.variant;
    report["n_shot"] = result.n_shot;
    report["k"] = cfg.k;
    report["n"] = cfg.n;
    report["loss_kind"] = cfg.loss_kind;
    report["aggregate"] = result.aggregate.to_json();
    report["runs"] = nlohmann::json::array();
    for (const auto& r : result.runs) report["runs"].push_back(r.to_json());
    report["silhouettes"] = result.silhouettes;

    const std::string stem = result.variant + "_" + shot_tag(cfg.n_shot);
    result.report_path =
        (fs::path(cfg.paths.report_dir) / (stem + ".json")).string();
    result.table_path =
        (fs::path(cfg.paths.report_dir) / (stem + ".txt")).string();
    write_file(result.report_path, report.dump(2) + "\n");
    result.table_text =
        render_table(result.variant, cfg.n_shot, result.aggregate);
    write_file(result.table_path, result.table_text);
    return result;
}

AugmentProbeResult augment_probe(const ExperimentConfig& cfg) {
    cfg.validate();
    require_readable(cfg.paths.train_data, "train_data");
    require_readable(cfg.paths.test_data, "test_data");
    if (cfg.run_s1) require_readable(cfg.paths.s1_corpus, "s1_corpus");

    const auto train = load_task_jsonl(cfg.paths.train_data);
    const auto test = load_task_jsonl(cfg.paths.test_data);
    std::vector<ResponsePair> s1_corpus;
    if (cfg.run_s1) s1_corpus = load_response_jsonl(cfg.paths.s1_corpus);

    fs::create_directories(cfg.paths.checkpoint_dir);
    fs::create_directories(cfg.paths.report_dir);

    ExperimentConfig trained = cfg;
    trained.n_shot = "10";

    AugmentProbeResult result;
    result.pool_names = {"10", "30", "full"};
    std::vector<std::vector<EvalReport>> per_pool(result.pool_names.size());
    for (std::uint64_t seed : cfg.seeds) {
        const auto shot10 = n_shot_subset(train, 10, seed);
        const EncoderState enc = encoder_state_from(
            train_for_seed(trained, seed, shot10, s1_corpus));

        std::set<std::string> in_pool;
        for (const auto& u : shot10) in_pool.insert(u.id);
        std::vector<LabeledUtterance> rest;
        for (const auto& u : train)
            if (!in_pool.count(u.id)) rest.push_back(u);

        Rng rng(derive_seed(seed, 21));
        std::vector<LabeledUtterance> next20;
        std::vector<LabeledUtterance> remainder;
        for (const auto& [label, rows] : rows_by_label(rest)) {
            if (rows.size() < 20)
                throw std::invalid_argument(
                    "augment_probe: label '" + label +
                    "' cannot grow to a 30-shot pool");
            std::set<std::size_t> picked;
            for (std::size_t i : rng.sample(rows.size(), 20))
                picked.insert(i);
            for (std::size_t i = 0; i < rows.size(); ++i)
                (picked.count(i) ? next20 : remainder)
                    .push_back(rest[rows[i]]);
        }

        const ExemplarPool pool10 = build_pool(shot10, enc);
        const ExemplarPool pool30 = augment_pool(pool10, next20, enc);
        const ExemplarPool pool_full = augment_pool(pool30, remainder, enc);

        const std::vector<const ExemplarPool*> pools = {&pool10, &pool30,
                                                        &pool_full};
        for (std::size_t p = 0; p < pools.size(); ++p)
            per_pool[p].push_back(
                make_report(classify_all(test, *pools[p], cfg.k, enc),
                            labels_of(test), seed, "cosine"));
    }

    nlohmann::json report;
    report["probe"] = "pool-augmentation";
    report["variant"] = trained.variant();
    report["trained_shots"] = 10;
    for (std::size_t p = 0; p < result.pool_names.size(); ++p) {
        result.aggregates.push_back(evaluate_runs(per_pool[p]));
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& r : per_pool[p]) runs.push_back(r.to_json());
        report["pools"][result.pool_names[p]] = {
            {"aggregate", result.aggregates[p].to_json()}, {"runs", runs}};
    }
    result.report_path =
        (fs::path(cfg.paths.report_dir) / "augment_probe.json").string();
    write_file(result.report_path, report.dump(2) + "\n");
    return result;
}

MlpBaselineResult run_mlp_baseline(const ExperimentConfig& cfg) {
    cfg.validate();
    require_readable(cfg.paths.train_data, "train_data");
    require_readable(cfg.paths.test_data, "test_data");
    if (cfg.run_s1) require_readable(cfg.paths.s1_corpus, "s1_corpus");

    const auto train = load_task_jsonl(cfg.paths.train_data);
    const auto test = load_task_jsonl(cfg.paths.test_data);
    std::vector<ResponsePair> s1_corpus;
    if (cfg.run_s1) s1_corpus = load_response_jsonl(cfg.paths.s1_corpus);

    fs::create_directories(cfg.paths.checkpoint_dir);
    fs::create_directories(cfg.paths.report_dir);

    MlpBaselineResult result;
    for (std::uint64_t seed : cfg.seeds) {
        Checkpoint ck;
        if (cfg.run_s1) {
            OptimConfig o1 = cfg.s1_optim;
            o1.seed = seed;
            ck = train_stage1(s1_corpus, cfg.encoder,
                              init_encoder(cfg.encoder, seed), o1, cfg.loss);
        } else {
            ck = make_checkpoint(cfg.encoder, init_encoder(cfg.encoder, seed),
                                 {{"stage", "untrained"}, {"seed", seed}});
        }
        const EncoderState enc = encoder_state_from(ck);

        const auto subset =
            cfg.shots() ? n_shot_subset(train, *cfg.shots(), seed) : train;
        std::size_t dim = 0;
        const std::vector<double> x_train = encode_dataset(enc, subset, dim);
        std::vector<std::string> y_train;
        for (const auto& u : subset) y_train.push_back(u.label);

        MlpConfig mlp_cfg = cfg.mlp;
        mlp_cfg.seed = seed;
        const MlpParams params = train_mlp(x_train, dim, y_train, mlp_cfg);

        const fs::path ck_path =
            fs::path(cfg.paths.checkpoint_dir) /
            ("mlp_" + shot_tag(cfg.n_shot) + "_seed" + std::to_string(seed) +
             ".ckpt");
        save_checkpoint(
            mlp_to_checkpoint(params, cfg.encoder,
                              {{"seed", seed},
                               {"encoder", cfg.run_s1 ? "s1" : "untrained"}}),
            ck_path.string());

        std::size_t test_dim = 0;
        const std::vector<double> x_test = encode_dataset(enc, test, test_dim);
        result.runs.push_back(make_report(mlp_predict(x_test, test_dim, params),
                                          labels_of(test), seed, "cosine"));
    }
    result.aggregate = evaluate_runs(result.runs);

    nlohmann::json report;
    report["baseline"] = "mlp";
    report["encoder"] = cfg.run_s1 ? "s1" : "untrained";
    report["n_shot"] = cfg.n_shot;
    report["aggregate"] = result.aggregate.to_json();
    report["runs"] = nlohmann::json::array();
    for (const auto& r : result.runs) report["runs"].push_back(r.to_json());
    result.report_path =
        (fs::path(cfg.paths.report_dir) /
         ("mlp_" + shot_tag(cfg.n_shot) + ".json"))
            .string();
    write_file(result.report_path, report.dump(2) + "\n");
    return result;
}

void export_embeddings(const Checkpoint& ck,
                       const std::vector<LabeledUtterance>& data,
                       const std::string& out_path) {
    if (data.empty())
        throw std::invalid_argument("export_embeddings: no rows to export");
    const EncoderState enc = encoder_state_from(ck);
    ExemplarPool pool;
    pool.fingerprint = enc.fingerprint;
    pool.vectors = encode_dataset(enc, data, pool.dim);
    for (const auto& u : data) {
        pool.ids.push_back(u.id);
        pool.labels.push_back(u.label);
    }
    save_pool(pool, out_path, out_path + ".labels");
}

}  // namespace convfit
