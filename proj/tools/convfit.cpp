#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "convfit/checkpoint.hpp"
#include "convfit/data.hpp"
#include "convfit/inference.hpp"
#include "convfit/metrics.hpp"
#include "convfit/pipeline.hpp"
#include "convfit/synthetic.hpp"
#include "convfit/trainer.hpp"

// Command-line driver. Exit codes: 0 success, 1 configuration problem
// (bad flags, bad config file, missing inputs), 2 runtime failure.

namespace fs = std::filesystem;
using namespace convfit;

namespace {

struct GlobalArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void require_readable(const std::string& path, const char* what) {
    if (!fs::exists(path))
        throw std::invalid_argument(std::string("config: ") + what + " '" +
                                    path + "' does not exist");
}

void create_parent_dirs(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

// Loads the config (defaults when none is given) and anchors relative
// paths under --out-dir.
ExperimentConfig effective_config(const GlobalArgs& g) {
    ExperimentConfig cfg = g.config_path.empty()
                               ? ExperimentConfig{}
                               : load_config(g.config_path);
    auto resolve = [&](std::string& p) {
        if (!p.empty() && fs::path(p).is_relative())
            p = (fs::path(g.out_dir) / p).lexically_normal().string();
    };
    resolve(cfg.paths.train_data);
    resolve(cfg.paths.test_data);
    resolve(cfg.paths.s1_corpus);
    resolve(cfg.paths.checkpoint_dir);
    resolve(cfg.paths.report_dir);
    return cfg;
}

std::uint64_t run_seed_of(const GlobalArgs& g, const ExperimentConfig& cfg) {
    return g.seed_set ? g.seed : cfg.seeds.front();
}

int cmd_gen_data(const GlobalArgs& g) {
    ExperimentConfig cfg = effective_config(g);
    if (g.seed_set) cfg.synthetic.seed = g.seed;
    const SyntheticData data = generate_synthetic(cfg.synthetic);
    create_parent_dirs(cfg.paths.train_data);
    create_parent_dirs(cfg.paths.test_data);
    create_parent_dirs(cfg.paths.s1_corpus);
    save_task_jsonl(cfg.paths.train_data, data.train);
    save_task_jsonl(cfg.paths.test_data, data.test);
    save_response_jsonl(cfg.paths.s1_corpus, data.s1_corpus);
    std::cout << "wrote " << data.train.size() << " train rows to "
              << cfg.paths.train_data << "\n"
              << "wrote " << data.test.size() << " test rows to "
              << cfg.paths.test_data << "\n"
              << "wrote " << data.s1_corpus.size() << " response pairs to "
              << cfg.paths.s1_corpus << "\n";
    return 0;
}

int cmd_s1_train(const GlobalArgs& g) {
    const ExperimentConfig cfg = effective_config(g);
    cfg.validate();
    require_readable(cfg.paths.s1_corpus, "s1_corpus");
    const auto corpus = load_response_jsonl(cfg.paths.s1_corpus);
    const std::uint64_t seed = run_seed_of(g, cfg);
    OptimConfig opt = cfg.s1_optim;
    opt.seed = seed;
    const Checkpoint ck = train_stage1(
        corpus, cfg.encoder, init_encoder(cfg.encoder, seed), opt, cfg.loss);
    fs::create_directories(cfg.paths.checkpoint_dir);
    const std::string path =
        (fs::path(cfg.paths.checkpoint_dir) /
         ("s1_seed" + std::to_string(seed) + ".ckpt"))
            .string();
    save_checkpoint(ck, path);
    const auto history = ck.meta.at("loss_history").get<std::vector<double>>();
    nlohmann::json out = {{"checkpoint", path},
                          {"steps", history.size()},
                          {"final_loss", history.empty() ? 0.0 : history.back()},
                          {"fingerprint", checkpoint_fingerprint(ck)}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_s2_train(const GlobalArgs& g, const std::string& init_path) {
    const ExperimentConfig cfg = effective_config(g);
    cfg.validate();
    require_readable(cfg.paths.train_data, "train_data");
    const auto train = load_task_jsonl(cfg.paths.train_data);
    const std::uint64_t seed = run_seed_of(g, cfg);
    const auto subset =
        cfg.shots() ? n_shot_subset(train, *cfg.shots(), seed) : train;
    std::optional<Checkpoint> init;
    if (!init_path.empty()) {
        require_readable(init_path, "init checkpoint");
        init = load_checkpoint(init_path);
    }
    OptimConfig opt = cfg.s2_optim;
    opt.seed = seed;
    const Checkpoint ck = train_stage2(subset, cfg.loss_kind, cfg.n,
                                       cfg.encoder, init, opt, cfg.loss);
    fs::create_directories(cfg.paths.checkpoint_dir);
    const std::string path =
        (fs::path(cfg.paths.checkpoint_dir) /
         ("s2_seed" + std::to_string(seed) + ".ckpt"))
            .string();
    save_checkpoint(ck, path);
    const auto history = ck.meta.at("loss_history").get<std::vector<double>>();
    nlohmann::json out = {{"checkpoint", path},
                          {"steps", history.size()},
                          {"final_loss", history.empty() ? 0.0 : history.back()},
                          {"fingerprint", checkpoint_fingerprint(ck)},
                          {"tuning_rows", subset.size()}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_eval(const GlobalArgs& g) {
    ExperimentConfig cfg = effective_config(g);
    if (g.seed_set) cfg.seeds = {g.seed};
    const PipelineResult r = run_pipeline(cfg);
    std::cout << r.table_text << "report: " << r.report_path << "\n"
              << "table: " << r.table_path << "\n";
    return 0;
}

int cmd_predict(const std::string& ck_path, const std::string& vectors_path,
                const std::string& labels_path, const std::string& text,
                std::size_t k) {
    require_readable(ck_path, "checkpoint");
    require_readable(vectors_path, "pool vectors");
    require_readable(labels_path, "pool labels");
    const Checkpoint ck = load_checkpoint(ck_path);
    const ExemplarPool pool = load_pool(vectors_path, labels_path);
    const EncoderState enc = encoder_state_from(ck);
    const Prediction p = classify(text, pool, k, enc);
    nlohmann::json neighbors = nlohmann::json::array();
    for (std::size_t i = 0; i < p.neighbor_ids.size(); ++i)
        neighbors.push_back({{"id", p.neighbor_ids[i]},
                             {"label", p.neighbor_labels[i]},
                             {"similarity", p.similarities[i]}});
    nlohmann::json out = {{"label", p.label}, {"neighbors", neighbors}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_silhouette(const std::string& ck_path, const std::string& data_path) {
    require_readable(ck_path, "checkpoint");
    require_readable(data_path, "data");
    const Checkpoint ck = load_checkpoint(ck_path);
    const auto data = load_task_jsonl(data_path);
    const ExemplarPool pool = build_pool(data, encoder_state_from(ck));
    const double score =
        silhouette(pool.vectors, pool.dim, pool.labels, "cosine");
    nlohmann::json out = {{"silhouette", score},
                          {"metric", "cosine"},
                          {"rows", pool.rows()}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_export(const std::string& ck_path, const std::string& data_path,
               const std::string& out_path) {
    require_readable(ck_path, "checkpoint");
    require_readable(data_path, "data");
    const Checkpoint ck = load_checkpoint(ck_path);
    const auto data = load_task_jsonl(data_path);
    create_parent_dirs(out_path);
    export_embeddings(ck, data, out_path);
    nlohmann::json out = {{"vectors", out_path},
                          {"labels", out_path + ".labels"},
                          {"rows", data.size()}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_augment_probe(const GlobalArgs& g) {
    ExperimentConfig cfg = effective_config(g);
    if (g.seed_set) cfg.seeds = {g.seed};
    const AugmentProbeResult r = augment_probe(cfg);
    nlohmann::json pools;
    for (std::size_t i = 0; i < r.pool_names.size(); ++i)
        pools[r.pool_names[i]] = {{"mean", r.aggregates[i].mean},
                                  {"std", r.aggregates[i].std_dev}};
    nlohmann::json out = {{"pools", pools}, {"report", r.report_path}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

int cmd_mlp_baseline(const GlobalArgs& g) {
    ExperimentConfig cfg = effective_config(g);
    if (g.seed_set) cfg.seeds = {g.seed};
    const MlpBaselineResult r = run_mlp_baseline(cfg);
    nlohmann::json out = {{"mean", r.aggregate.mean},
                          {"std", r.aggregate.std_dev},
                          {"report", r.report_path}};
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage conversational encoder tuning with "
                 "nearest-neighbour intent detection"};
    app.require_subcommand(1);

    GlobalArgs g;
    auto* config_opt =
        app.add_option("--config", g.config_path, "JSON experiment config");
    auto* seed_opt = app.add_option("--seed", g.seed,
                                    "Override the run seed (or the dataset "
                                    "seed for gen-data)");
    app.add_option("--out-dir", g.out_dir,
                   "Directory that relative config paths resolve against");
    (void)config_opt;

    auto* gen = app.add_subcommand("gen-data",
                                   "Generate the synthetic task datasets and "
                                   "response-ranking corpus");
    auto* s1 = app.add_subcommand("s1-train",
                                  "Train the response-ranking stage");
    auto* s2 = app.add_subcommand("s2-train",
                                  "Train the task-contrastive stage");
    std::string init_path;
    s2->add_option("--init", init_path,
                   "Checkpoint to initialize from (stage-1 output)");
    auto* eval = app.add_subcommand("eval",
                                    "Run the full per-seed pipeline and "
                                    "aggregate a report");
    auto* predict = app.add_subcommand("predict",
                                       "Classify one utterance against a "
                                       "saved exemplar pool");
    std::string ck_path, vectors_path, labels_path, text, data_path, out_path;
    std::size_t k = 1;
    predict->add_option("--checkpoint", ck_path, "Encoder checkpoint")
        ->required();
    predict->add_option("--pool-vectors", vectors_path, "Pool vectors TSV")
        ->required();
    predict->add_option("--pool-labels", labels_path, "Pool labels sidecar")
        ->required();
    predict->add_option("--text", text, "Utterance to classify")->required();
    predict->add_option("--k", k, "Neighbours to vote over");
    auto* sil = app.add_subcommand("silhouette",
                                   "Cluster coherence of a labeled dataset "
                                   "under a checkpointed encoder");
    sil->add_option("--checkpoint", ck_path, "Encoder checkpoint")->required();
    sil->add_option("--data", data_path, "Labeled JSONL dataset")->required();
    auto* exp = app.add_subcommand("export-embeddings",
                                   "Encode a dataset to an embedding TSV "
                                   "plus labels sidecar");
    exp->add_option("--checkpoint", ck_path, "Encoder checkpoint")->required();
    exp->add_option("--data", data_path, "Labeled JSONL dataset")->required();
    exp->add_option("--out", out_path, "Output TSV path")->required();
    auto* probe = app.add_subcommand("augment-probe",
                                     "Train at 10-shot, then widen the "
                                     "exemplar pool at inference only");
    auto* mlp = app.add_subcommand("mlp-baseline",
                                   "Frozen-encoder MLP classifier baseline");

    for (CLI::App* sub : {gen, s1, s2, eval, predict, sil, exp, probe, mlp})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    g.seed_set = seed_opt->count() > 0;

    try {
        if (app.got_subcommand(gen)) return cmd_gen_data(g);
        if (app.got_subcommand(s1)) return cmd_s1_train(g);
        if (app.got_subcommand(s2)) return cmd_s2_train(g, init_path);
        if (app.got_subcommand(eval)) return cmd_eval(g);
        if (app.got_subcommand(predict))
            return cmd_predict(ck_path, vectors_path, labels_path, text, k);
        if (app.got_subcommand(sil)) return cmd_silhouette(ck_path, data_path);
        if (app.got_subcommand(exp))
            return cmd_export(ck_path, data_path, out_path);
        if (app.got_subcommand(probe)) return cmd_augment_probe(g);
        if (app.got_subcommand(mlp)) return cmd_mlp_baseline(g);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
