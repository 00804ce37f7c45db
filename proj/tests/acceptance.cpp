// End-to-end acceptance gate: ten checks covering gradients, loss and
// metric oracles, pair discipline, retrieval invariance, the synthetic
// few-shot experiments, and persistence. Prints one PASS/FAIL line per
// check and exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "convfit/checkpoint.hpp"
#include "convfit/data.hpp"
#include "convfit/gradcheck.hpp"
#include "convfit/inference.hpp"
#include "convfit/losses.hpp"
#include "convfit/metrics.hpp"
#include "convfit/pairing.hpp"
#include "convfit/pipeline.hpp"
#include "convfit/rng.hpp"
#include "convfit/synthetic.hpp"
#include "convfit/tensor.hpp"
#include "convfit/trainer.hpp"
#include "oracles.hpp"

using namespace convfit;
namespace fs = std::filesystem;

namespace {

Tensor rows_tensor(const oracles::Mat& rows, bool rg = true) {
    const std::size_t r = rows.size();
    const std::size_t c = rows[0].size();
    std::vector<double> flat;
    flat.reserve(r * c);
    for (const auto& row : rows)
        flat.insert(flat.end(), row.begin(), row.end());
    return Tensor::from({r, c}, std::move(flat), rg);
}

oracles::Mat random_rows(Rng& rng, std::size_t r, std::size_t c) {
    oracles::Mat m(r, oracles::Vec(c));
    for (auto& row : m)
        for (auto& v : row) v = rng.uniform(-1.5, 1.5);
    return m;
}

std::vector<bool> random_flags(Rng& rng, std::size_t p) {
    std::vector<bool> flags(p);
    bool any = false;
    for (std::size_t i = 0; i < p; ++i) {
        flags[i] = rng.index(2) == 1;
        any = any || flags[i];
    }
    if (!any) flags[rng.index(p)] = true;
    return flags;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// 1. Analytic gradients of every loss form agree with central finite
// differences across 50 random configurations: max rel err < 1e-4.
Outcome check_gradients() {
    Rng rng(41);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        LossConfig cfg;
        cfg.D = rng.uniform(1.0, 8.0);
        cfg.delta_pos = rng.uniform(0.6, 0.95);
        cfg.delta_neg = rng.uniform(0.05, 0.4);
        cfg.delta_m = rng.uniform(0.2, 1.0);
        const std::size_t d = 2 + rng.index(3);
        double err = 0.0;
        switch (trial % 6) {
            case 0:
            case 1: {
                cfg.mneg_form = trial % 6 == 0 ? "paper" : "softmax";
                const std::size_t B = 2 + rng.index(4);
                Tensor c = rows_tensor(random_rows(rng, B, d));
                Tensor r = rows_tensor(random_rows(rng, B, d));
                auto build = [&](Tape& t) { return mneg_loss(t, c, r, cfg); };
                err = finite_difference_check(build, {c, r}).max_rel_err;
                break;
            }
            case 2: {
                const std::size_t P = 2 + rng.index(4);
                Tensor xi = rows_tensor(random_rows(rng, P, d));
                Tensor xj = rows_tensor(random_rows(rng, P, d));
                const auto flags = random_flags(rng, P);
                SmaxHead head = init_smax_head(d, rng.next_u64());
                auto build = [&](Tape& t) {
                    return smax_loss(t, xi, xj, flags, head);
                };
                err = finite_difference_check(build, {xi, xj, head.W})
                          .max_rel_err;
                break;
            }
            case 3: {
                const std::size_t P = 2 + rng.index(4);
                Tensor xi = rows_tensor(random_rows(rng, P, d));
                Tensor xj = rows_tensor(random_rows(rng, P, d));
                const auto flags = random_flags(rng, P);
                auto build = [&](Tape& t) {
                    return cos_loss(t, xi, xj, flags, cfg);
                };
                err = finite_difference_check(build, {xi, xj}).max_rel_err;
                break;
            }
            default: {
                const bool online = trial % 6 == 5;
                const std::size_t P = 2 + rng.index(4);
                Tensor xi = rows_tensor(random_rows(rng, P, d));
                Tensor xj = rows_tensor(random_rows(rng, P, d));
                const auto flags = random_flags(rng, P);
                auto build = [&](Tape& t) {
                    return ocl_loss(t, xi, xj, flags, cfg, online);
                };
                err = finite_difference_check(build, {xi, xj}).max_rel_err;
                break;
            }
        }
        worst = std::max(worst, err);
    }
    std::ostringstream detail;
    detail << "max rel err " << worst << " over 50 configs (limit 1e-4)";
    return {worst < 1e-4, detail.str()};
}

// 2. Loss values match scalar brute-force recomputation to 1e-9 on 200
// random small batches; online mining keeps exactly the brute-force
// hard-pair sets.
Outcome check_loss_oracles() {
    Rng rng(42);
    double worst = 0.0;
    std::size_t mined_mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        LossConfig cfg;
        const std::size_t d = 2 + rng.index(4);
        const std::size_t B = 2 + rng.index(7);
        const std::size_t P = 1 + rng.index(8);

        const auto ctx = random_rows(rng, B, d);
        const auto rsp = random_rows(rng, B, d);
        for (const char* form : {"paper", "softmax"}) {
            cfg.mneg_form = form;
            Tape t;
            const double got =
                mneg_loss(t, rows_tensor(ctx), rows_tensor(rsp), cfg).item();
            const double want = oracles::response_ranking_loss(
                ctx, rsp, cfg.D, std::string(form) == "softmax");
            worst = std::max(worst, std::fabs(got - want));
        }

        const auto xi = random_rows(rng, P, d);
        const auto xj = random_rows(rng, P, d);
        const auto flags = random_flags(rng, P);
        {
            SmaxHead head = init_smax_head(d, rng.next_u64());
            Tape t;
            const double got =
                smax_loss(t, rows_tensor(xi), rows_tensor(xj), flags, head)
                    .item();
            const double want =
                oracles::pair_softmax_loss(xi, xj, flags, head.W.value());
            worst = std::max(worst, std::fabs(got - want));
        }
        {
            Tape t;
            const double got =
                cos_loss(t, rows_tensor(xi), rows_tensor(xj), flags, cfg)
                    .item();
            const double want = oracles::pair_cosine_loss(
                xi, xj, flags, cfg.delta_pos, cfg.delta_neg);
            worst = std::max(worst, std::fabs(got - want));
        }
        for (bool online : {false, true}) {
            Tape t;
            const double got = ocl_loss(t, rows_tensor(xi), rows_tensor(xj),
                                        flags, cfg, online)
                                   .item();
            const double want = oracles::contrastive_loss(
                xi, xj, flags, cfg.delta_m, online);
            worst = std::max(worst, std::fabs(got - want));
        }
        std::vector<double> dcos(P);
        for (std::size_t p = 0; p < P; ++p)
            dcos[p] = 1.0 - oracles::cosine(xi[p], xj[p]);
        const OclKeptSets got_sets = ocl_kept_pairs(dcos, flags, true);
        const oracles::KeptPairs want_sets =
            oracles::hard_pair_filter(dcos, flags, true);
        if (got_sets.positives != want_sets.positives ||
            got_sets.negatives != want_sets.negatives)
            ++mined_mismatches;
    }
    std::ostringstream detail;
    detail << "max abs diff " << worst << " over 200 batches (limit 1e-9), "
           << mined_mismatches << " mined-set mismatches";
    return {worst < 1e-9 && mined_mismatches == 0, detail.str()};
}

// 3. Pair construction: positives stay within class, negatives cross
// classes, and every emitted pair set carries exactly 2*n negatives per
// positive. Requests a class cannot satisfy are rejected, never
// silently shrunk.
Outcome check_pair_invariants() {
    Rng rng(43);
    std::size_t rejections = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t classes = 2 + rng.index(9);
        std::vector<LabeledUtterance> data;
        std::size_t smallest_outside = SIZE_MAX;
        std::vector<std::size_t> class_sizes(classes);
        for (std::size_t c = 0; c < classes; ++c) {
            class_sizes[c] = 2 + rng.index(7);
            for (std::size_t m = 0; m < class_sizes[c]; ++m) {
                std::ostringstream id;
                id << "c" << c << "m" << m;
                data.push_back(
                    {id.str(), "text " + id.str(), "class" + std::to_string(c)});
            }
        }
        for (std::size_t c = 0; c < classes; ++c)
            smallest_outside =
                std::min(smallest_outside, data.size() - class_sizes[c]);

        std::size_t n = 1 + rng.index(4);
        const std::uint64_t seed = rng.next_u64();
        if (n > smallest_outside) {
            bool rejected = false;
            try {
                build_pairs(data, n, seed);
            } catch (const std::invalid_argument&) {
                rejected = true;
            }
            if (!rejected)
                return {false, "oversized n was accepted instead of rejected"};
            ++rejections;
            n = smallest_outside;
        }
        const PairSet ps = build_pairs(data, n, seed);

        for (const auto& [i, j] : ps.positives)
            if (data[i].label != data[j].label)
                return {false, "positive pair crosses classes"};
        for (const auto& [i, j] : ps.negatives)
            if (data[i].label == data[j].label)
                return {false, "negative pair shares a class"};
        if (ps.negatives.size() != 2 * n * ps.positives.size()) {
            std::ostringstream detail;
            detail << "expected " << 2 * n * ps.positives.size()
                   << " negatives, got " << ps.negatives.size();
            return {false, detail.str()};
        }
    }
    std::ostringstream detail;
    detail << "100 datasets clean, count exact on all, " << rejections
           << " infeasible requests rejected";
    return {true, detail.str()};
}

// 4. Nearest-neighbour classification is invariant to positive rescaling
// of the pool (x7.3) and the query (x0.2): same label, same ranking.
Outcome check_knn_scale_invariance() {
    Rng rng(44);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t dim = 2 + rng.index(5);
        const std::size_t m = 2 + rng.index(7);
        ExemplarPool pool;
        pool.dim = dim;
        pool.fingerprint = "probe";
        ExemplarPool scaled = pool;
        for (std::size_t r = 0; r < m; ++r) {
            pool.ids.push_back("r" + std::to_string(r));
            pool.labels.push_back("class" + std::to_string(rng.index(3)));
            for (std::size_t c = 0; c < dim; ++c) {
                const double v = rng.uniform(-1.0, 1.0) + 0.1;
                pool.vectors.push_back(v);
            }
        }
        scaled.ids = pool.ids;
        scaled.labels = pool.labels;
        for (double v : pool.vectors) scaled.vectors.push_back(v * 7.3);

        std::vector<double> query(dim);
        for (auto& v : query) v = rng.uniform(-1.0, 1.0) + 0.1;
        std::vector<double> small(dim);
        for (std::size_t c = 0; c < dim; ++c) small[c] = query[c] * 0.2;

        const std::size_t k = 1 + rng.index(std::min<std::size_t>(3, m));
        const Prediction a = classify_vector(query, pool, k);
        const Prediction b = classify_vector(small, scaled, k);
        if (a.label != b.label || a.neighbor_ids != b.neighbor_ids) {
            std::ostringstream detail;
            detail << "trial " << trial << " diverged: '" << a.label
                   << "' vs '" << b.label << "'";
            return {false, detail.str()};
        }
    }
    return {true, "1000 random pools, labels and rankings identical"};
}

struct SyntheticFiles {
    fs::path root;
    ExperimentConfig base;
};

// Default 8-intent corpus written once; every experiment below reads it.
SyntheticFiles prepare_workspace() {
    SyntheticFiles files;
    files.root = fs::path("acceptance_ws");
    fs::remove_all(files.root);
    fs::create_directories(files.root / "data");

    SyntheticSpec spec;
    const SyntheticData data = generate_synthetic(spec);
    save_task_jsonl((files.root / "data" / "train.jsonl").string(),
                    data.train);
    save_task_jsonl((files.root / "data" / "test.jsonl").string(), data.test);
    save_response_jsonl((files.root / "data" / "s1.jsonl").string(),
                        data.s1_corpus);

    files.base.paths.train_data = (files.root / "data" / "train.jsonl").string();
    files.base.paths.test_data = (files.root / "data" / "test.jsonl").string();
    files.base.paths.s1_corpus = (files.root / "data" / "s1.jsonl").string();
    files.base.paths.checkpoint_dir = (files.root / "ckpt").string();
    files.base.paths.report_dir = (files.root / "reports").string();
    return files;
}

// 5. Few-shot headline: task-contrastive tuning alone (ocl, n=3,
// 10-shot, k=1) reaches mean test accuracy >= 0.90 over seeds {1,2,3}
// and beats the untrained-encoder nearest-neighbour run by >= 0.15.
Outcome check_few_shot_headline(const SyntheticFiles& files,
                                PipelineResult& tuned_out,
                                PipelineResult& untrained_out) {
    ExperimentConfig cfg = files.base;
    cfg.run_s1 = false;
    cfg.run_s2 = true;
    cfg.loss_kind = "ocl";
    cfg.n = 3;
    cfg.n_shot = "10";
    cfg.k = 1;
    cfg.seeds = {1, 2, 3};
    tuned_out = run_pipeline(cfg);

    cfg.run_s2 = false;
    untrained_out = run_pipeline(cfg);

    const double tuned = tuned_out.aggregate.mean;
    const double raw = untrained_out.aggregate.mean;
    std::ostringstream detail;
    detail << "tuned " << tuned << " (floor 0.90), untrained " << raw
           << ", margin " << tuned - raw << " (floor 0.15)";
    return {tuned >= 0.90 && tuned - raw >= 0.15, detail.str()};
}

// 6. Adding the response-ranking stage before task tuning is not
// inferior: mean(S1+S2) >= mean(S2) - 0.02 over 5 seeds.
Outcome check_stage_synergy(const SyntheticFiles& files) {
    ExperimentConfig cfg = files.base;
    cfg.paths.report_dir = (files.root / "reports_synergy").string();
    cfg.loss_kind = "ocl";
    cfg.n_shot = "10";
    cfg.seeds = {1, 2, 3, 4, 5};

    cfg.run_s1 = true;
    cfg.run_s2 = true;
    const double both = run_pipeline(cfg).aggregate.mean;
    cfg.run_s1 = false;
    const double s2_only = run_pipeline(cfg).aggregate.mean;

    std::ostringstream detail;
    detail << "s1+s2 " << both << ", s2 " << s2_only << ", margin "
           << both - s2_only << " (floor -0.02)";
    return {both >= s2_only - 0.02, detail.str()};
}

// 7. Cluster funnel: tuning lifts the test-set silhouette by >= 0.2
// mean over 3 seeds, and the silhouette matches the brute-force
// pairwise oracle to 1e-12 on a hand dataset.
Outcome check_silhouette_funnel(const PipelineResult& tuned,
                                const PipelineResult& untrained) {
    auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const double tuned_sigma = mean_of(tuned.silhouettes);
    const double raw_sigma = mean_of(untrained.silhouettes);

    const oracles::Mat points = {{1.0, 0.2},  {0.9, 0.1}, {1.1, 0.3},
                                 {-0.8, 0.9}, {-1.0, 1.1}, {0.1, -1.2},
                                 {0.2, -0.9}, {0.15, -1.05}};
    const std::vector<int> int_labels = {0, 0, 0, 1, 1, 2, 2, 2};
    std::vector<double> flat;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < points.size(); ++i) {
        flat.insert(flat.end(), points[i].begin(), points[i].end());
        labels.push_back("l" + std::to_string(int_labels[i]));
    }
    const double got_cos = silhouette(flat, 2, labels, "cosine");
    const double want_cos =
        oracles::silhouette(points, int_labels, oracles::cosine_distance);
    const double got_euc = silhouette(flat, 2, labels, "euclidean");
    const double want_euc =
        oracles::silhouette(points, int_labels, oracles::euclidean_distance);
    const double oracle_err = std::max(std::fabs(got_cos - want_cos),
                                       std::fabs(got_euc - want_euc));

    std::ostringstream detail;
    detail << "sigma untrained " << raw_sigma << " -> tuned " << tuned_sigma
           << ", gap " << tuned_sigma - raw_sigma
           << " (floor 0.2); hand-oracle err " << oracle_err
           << " (limit 1e-12)";
    return {raw_sigma < tuned_sigma && tuned_sigma - raw_sigma >= 0.2 &&
                oracle_err < 1e-12,
            detail.str()};
}

// 8. Growing the exemplar pool after 10-shot training helps or holds:
// full-pool mean >= 10-shot-pool mean over 5 seeds, no retraining.
Outcome check_pool_growth(const SyntheticFiles& files) {
    ExperimentConfig cfg = files.base;
    cfg.paths.report_dir = (files.root / "reports_probe").string();
    cfg.run_s1 = false;
    cfg.run_s2 = true;
    cfg.loss_kind = "ocl";
    cfg.seeds = {1, 2, 3, 4, 5};
    const AugmentProbeResult r = augment_probe(cfg);
    const double at10 = r.aggregates.front().mean;
    const double at_full = r.aggregates.back().mean;
    std::ostringstream detail;
    detail << "10-shot pool " << at10 << ", full pool " << at_full;
    return {at_full >= at10, detail.str()};
}

// 9. Similarity-based inference beats an MLP trained on the frozen
// untrained embeddings at 10-shot.
Outcome check_mlp_gap(const SyntheticFiles& files,
                      const PipelineResult& tuned) {
    ExperimentConfig cfg = files.base;
    cfg.paths.report_dir = (files.root / "reports_mlp").string();
    cfg.run_s1 = false;
    cfg.run_s2 = false;
    cfg.n_shot = "10";
    cfg.seeds = {1, 2, 3};
    const MlpBaselineResult r = run_mlp_baseline(cfg);
    std::ostringstream detail;
    detail << "similarity " << tuned.aggregate.mean << ", frozen-mlp "
           << r.aggregate.mean;
    return {tuned.aggregate.mean >= r.aggregate.mean, detail.str()};
}

std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// 10. Same config, same seed: byte-identical checkpoint and report
// files; checkpoints round-trip bit-exactly and reject corruption.
Outcome check_determinism(const SyntheticFiles& files) {
    ExperimentConfig cfg = files.base;
    cfg.paths.checkpoint_dir = (files.root / "ckpt_det").string();
    cfg.paths.report_dir = (files.root / "reports_det").string();
    cfg.run_s1 = false;
    cfg.run_s2 = true;
    cfg.seeds = {1};
    cfg.s2_optim.epochs = 3;

    const PipelineResult first = run_pipeline(cfg);
    const std::string ck_path =
        (fs::path(cfg.paths.checkpoint_dir) / "s2-ocl_10shot_seed1.ckpt")
            .string();
    const std::string report1 = file_bytes(first.report_path);
    const std::string ck1 = file_bytes(ck_path);

    const PipelineResult second = run_pipeline(cfg);
    const std::string report2 = file_bytes(second.report_path);
    const std::string ck2 = file_bytes(ck_path);
    if (report1.empty() || report1 != report2)
        return {false, "report bytes changed between identical runs"};
    if (ck1.empty() || ck1 != ck2)
        return {false, "checkpoint bytes changed between identical runs"};

    const Checkpoint ck = load_checkpoint(ck_path);
    const std::vector<unsigned char> bytes = serialize_checkpoint(ck);
    if (std::string(bytes.begin(), bytes.end()) != ck1)
        return {false, "checkpoint round-trip is not bit-exact"};

    std::vector<unsigned char> corrupt = bytes;
    corrupt[corrupt.size() / 2] ^= 0x20;
    bool rejected = false;
    try {
        parse_checkpoint(corrupt.data(), corrupt.size());
    } catch (const CheckpointCorruptError&) {
        rejected = true;
    }
    if (!rejected) return {false, "corrupted checkpoint was accepted"};

    std::ostringstream detail;
    detail << "reports and checkpoints byte-stable, round-trip exact, "
              "checksum rejects corruption";
    return {true, detail.str()};
}

}  // namespace

int main() {
    struct Entry {
        const char* name;
        std::function<Outcome()> run;
    };

    SyntheticFiles files = prepare_workspace();
    PipelineResult tuned, untrained;

    const std::vector<Entry> entries = {
        {"loss gradients vs finite differences",
         [] { return check_gradients(); }},
        {"loss values vs brute-force oracles",
         [] { return check_loss_oracles(); }},
        {"pair construction discipline",
         [] { return check_pair_invariants(); }},
        {"knn scale invariance",
         [] { return check_knn_scale_invariance(); }},
        {"few-shot tuned accuracy and margin",
         [&] { return check_few_shot_headline(files, tuned, untrained); }},
        {"stage-1 synergy non-inferiority",
         [&] { return check_stage_synergy(files); }},
        {"silhouette funnel and oracle",
         [&] { return check_silhouette_funnel(tuned, untrained); }},
        {"inference-time pool growth",
         [&] { return check_pool_growth(files); }},
        {"similarity vs frozen-mlp baseline",
         [&] { return check_mlp_gap(files, tuned); }},
        {"determinism and persistence",
         [&] { return check_determinism(files); }},
    };

    int failures = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = entries[i].run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start)
                .count();
        std::printf("%s %2zu/10 %-38s %s (%.1fs)\n",
                    outcome.pass ? "PASS" : "FAIL", i + 1, entries[i].name,
                    outcome.detail.c_str(), secs);
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    fs::remove_all(files.root);
    if (failures > 0) {
        std::printf("%d of 10 checks failed\n", failures);
        return 1;
    }
    std::printf("all 10 checks passed\n");
    return 0;
}
