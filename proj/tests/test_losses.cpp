#include <doctest.h>

#include <cmath>
#include <vector>

#include "convfit/gradcheck.hpp"
#include "convfit/losses.hpp"
#include "convfit/rng.hpp"
#include "convfit/tensor.hpp"
#include "oracles.hpp"

using namespace convfit;

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
    for (std::size_t i = 0; i < p; ++i) flags[i] = rng.index(2) == 1;
    return flags;
}

}  // namespace

TEST_SUITE_BEGIN("losses");

TEST_CASE("loss config validation") {
    LossConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.D = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.delta_neg = 0.9;  // above delta_pos
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.delta_m = 2.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.mneg_form = "mean";
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("response ranking loss closed forms") {
    LossConfig cfg;
    cfg.D = 1.0;

    SUBCASE("all cosines equal cancels to zero") {
        oracles::Mat same = {{0.3, 0.4}, {0.3, 0.4}};
        Tape t;
        Tensor c = rows_tensor(same);
        Tensor r = rows_tensor(same);
        CHECK(mneg_loss(t, c, r, cfg).item() == doctest::Approx(0.0));
    }

    SUBCASE("orthogonal matched pairs give -2 at D=1") {
        Tape t;
        Tensor c = rows_tensor({{1.0, 0.0}, {0.0, 1.0}});
        Tensor r = rows_tensor({{1.0, 0.0}, {0.0, 1.0}});
        CHECK(mneg_loss(t, c, r, cfg).item() == doctest::Approx(-2.0));
    }

    SUBCASE("swapping the identical responses changes nothing") {
        oracles::Mat rows = {{0.5, -0.2}, {0.5, -0.2}};
        Tape t;
        Tensor c = rows_tensor(rows);
        Tensor r1 = rows_tensor({rows[0], rows[1]});
        Tensor r2 = rows_tensor({rows[1], rows[0]});
        CHECK(mneg_loss(t, c, r1, cfg).item() ==
              doctest::Approx(mneg_loss(t, c, r2, cfg).item()));
    }
}

TEST_CASE("response ranking loss matches the brute-force oracle") {
    Rng rng(301);
    LossConfig cfg;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t B = 2 + rng.index(5);
        const std::size_t d = 2 + rng.index(6);
        auto cm = random_rows(rng, B, d);
        auto rm = random_rows(rng, B, d);
        cfg.D = trial % 2 == 0 ? 20.0 : 3.5;

        cfg.mneg_form = "paper";
        Tape t1;
        CHECK(mneg_loss(t1, rows_tensor(cm), rows_tensor(rm), cfg).item() ==
              doctest::Approx(
                  oracles::response_ranking_loss(cm, rm, cfg.D, false))
                  .epsilon(1e-11));

        cfg.mneg_form = "softmax";
        Tape t2;
        CHECK(mneg_loss(t2, rows_tensor(cm), rows_tensor(rm), cfg).item() ==
              doctest::Approx(
                  oracles::response_ranking_loss(cm, rm, cfg.D, true))
                  .epsilon(1e-11));
    }
}

TEST_CASE("response ranking loss rejects degenerate batches") {
    LossConfig cfg;
    Tape t;
    Tensor single = rows_tensor({{1.0, 0.0}});
    CHECK_THROWS_AS(mneg_loss(t, single, single, cfg), std::invalid_argument);
    Tensor good = rows_tensor({{1.0, 0.0}, {0.0, 1.0}});
    Tensor zero = rows_tensor({{1.0, 0.0}, {0.0, 0.0}});
    CHECK_THROWS_AS(mneg_loss(t, good, zero, cfg), std::domain_error);
}

TEST_CASE("pair softmax loss closed forms") {
    SUBCASE("zero head gives ln 2 regardless of inputs") {
        SmaxHead head{Tensor::zeros({6, 2}, true)};
        Tape t;
        Tensor xi = rows_tensor({{0.5, -1.0}, {2.0, 0.25}});
        Tensor xj = rows_tensor({{1.5, 0.5}, {-0.75, 1.0}});
        CHECK(smax_loss(t, xi, xj, {true, false}, head).item() ==
              doctest::Approx(std::log(2.0)));
    }

    SUBCASE("logits (0, 10) with target 1") {
        // d_o = 1: features are [x_i, x_j, |x_i - x_j|] = [1, 0, 1].
        SmaxHead head{Tensor::zeros({3, 2}, true)};
        head.W.value()[0 * 2 + 1] = 10.0;  // only feature 0 hits class 1
        Tape t;
        Tensor xi = rows_tensor({{1.0}});
        Tensor xj = rows_tensor({{0.0}});
        const double expect = std::log(1.0 + std::exp(-10.0));
        CHECK(smax_loss(t, xi, xj, {true}, head).item() ==
              doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("pair softmax loss matches the brute-force oracle") {
    Rng rng(302);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t P = 1 + rng.index(6);
        const std::size_t d = 1 + rng.index(5);
        auto xi = random_rows(rng, P, d);
        auto xj = random_rows(rng, P, d);
        auto flags = random_flags(rng, P);
        SmaxHead head = init_smax_head(d, rng.next_u64());

        Tape t;
        CHECK(smax_loss(t, rows_tensor(xi), rows_tensor(xj), flags, head)
                  .item() ==
              doctest::Approx(oracles::pair_softmax_loss(xi, xj, flags,
                                                         head.W.value()))
                  .epsilon(1e-11));
    }
}

TEST_CASE("pair cosine loss closed forms and oracle") {
    LossConfig cfg;
    Tape t;

    // Positive at exactly the target similarity contributes nothing.
    Tensor a = rows_tensor({{1.0, 0.0}});
    Tensor b = rows_tensor({{0.8, 0.6}});  // cosine exactly 0.8
    CHECK(cos_loss(t, a, b, {true}, cfg).item() == doctest::Approx(0.0));

    // Mislabeled duplicate as negative: (0.3 - 1)^2 = 0.49.
    CHECK(cos_loss(t, a, a, {false}, cfg).item() == doctest::Approx(0.49));

    Rng rng(303);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t P = 1 + rng.index(7);
        const std::size_t d = 2 + rng.index(5);
        auto xi = random_rows(rng, P, d);
        auto xj = random_rows(rng, P, d);
        auto flags = random_flags(rng, P);
        Tape t2;
        CHECK(cos_loss(t2, rows_tensor(xi), rows_tensor(xj), flags, cfg)
                  .item() ==
              doctest::Approx(oracles::pair_cosine_loss(xi, xj, flags, 0.8,
                                                        0.3))
                  .epsilon(1e-11));
    }
}

TEST_CASE("contrastive loss closed forms") {
    LossConfig cfg;
    Tape t;
    Tensor v = rows_tensor({{0.6, 0.8}});

    // Identical positive pair: distance 0, term 0.
    CHECK(ocl_loss(t, v, v, {true}, cfg, false).item() ==
          doctest::Approx(0.0));

    // Negative with dcos = 1 >= delta_m: margin satisfied, term 0.
    Tensor orth = rows_tensor({{-0.8, 0.6}});
    CHECK(ocl_loss(t, v, orth, {false}, cfg, false).item() ==
          doctest::Approx(0.0));

    // Negative with dcos = 0: term (0.5 - 0)^2.
    CHECK(ocl_loss(t, v, v, {false}, cfg, false).item() ==
          doctest::Approx(0.25));
}

TEST_CASE("contrastive loss matches the brute-force oracle") {
    Rng rng(304);
    LossConfig cfg;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t P = 1 + rng.index(8);
        const std::size_t d = 2 + rng.index(5);
        auto xi = random_rows(rng, P, d);
        auto xj = random_rows(rng, P, d);
        auto flags = random_flags(rng, P);
        const bool online = trial % 2 == 1;
        Tape t;
        CHECK(ocl_loss(t, rows_tensor(xi), rows_tensor(xj), flags, cfg,
                       online)
                  .item() ==
              doctest::Approx(
                  oracles::contrastive_loss(xi, xj, flags, 0.5, online))
                  .epsilon(1e-11));
    }
}

TEST_CASE("online hard-pair selection equals the brute-force filter") {
    Rng rng(305);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t P = 1 + rng.index(16);
        std::vector<double> dcos(P);
        for (auto& v : dcos) v = rng.uniform(0.0, 2.0);
        auto flags = random_flags(rng, P);

        auto kept = ocl_kept_pairs(dcos, flags, true);
        auto ref = oracles::hard_pair_filter(dcos, flags, true);
        CHECK(kept.positives == ref.positives);
        CHECK(kept.negatives == ref.negatives);
    }
}

TEST_CASE("offline equals online when every pair is hard") {
    // Interleave distances so each negative sits below the positive
    // maximum and each positive sits above the negative minimum.
    oracles::Mat xi, xj;
    std::vector<bool> flags;
    auto unit = [](double angle) {
        return oracles::Vec{std::cos(angle), std::sin(angle)};
    };
    // positives at dcos ~ {0.6, 1.0}; negatives at dcos ~ {0.3, 0.8}
    xi.push_back(unit(0.0)); xj.push_back(unit(std::acos(0.4)));  flags.push_back(true);
    xi.push_back(unit(0.0)); xj.push_back(unit(std::acos(0.0)));  flags.push_back(true);
    xi.push_back(unit(0.0)); xj.push_back(unit(std::acos(0.7)));  flags.push_back(false);
    xi.push_back(unit(0.0)); xj.push_back(unit(std::acos(0.2)));  flags.push_back(false);

    LossConfig cfg;
    Tape t;
    const double offline =
        ocl_loss(t, rows_tensor(xi), rows_tensor(xj), flags, cfg, false).item();
    const double online =
        ocl_loss(t, rows_tensor(xi), rows_tensor(xj), flags, cfg, true).item();
    CHECK(offline == doctest::Approx(online));
    CHECK(offline > 0.0);
}

TEST_CASE("cosine-based losses ignore row scaling; the softmax head does not") {
    Rng rng(306);
    LossConfig cfg;
    const std::size_t P = 5, d = 4;
    auto xi = random_rows(rng, P, d);
    auto xj = random_rows(rng, P, d);
    auto flags = random_flags(rng, P);
    oracles::Mat xi3 = xi, xj3 = xj;
    for (auto& row : xi3)
        for (auto& v : row) v *= 3.0;
    for (auto& row : xj3)
        for (auto& v : row) v *= 3.0;

    Tape t;
    CHECK(std::fabs(
              mneg_loss(t, rows_tensor(xi), rows_tensor(xj), cfg).item() -
              mneg_loss(t, rows_tensor(xi3), rows_tensor(xj3), cfg).item()) <
          1e-9);
    CHECK(std::fabs(
              cos_loss(t, rows_tensor(xi), rows_tensor(xj), flags, cfg)
                  .item() -
              cos_loss(t, rows_tensor(xi3), rows_tensor(xj3), flags, cfg)
                  .item()) < 1e-9);
    CHECK(std::fabs(
              ocl_loss(t, rows_tensor(xi), rows_tensor(xj), flags, cfg, false)
                  .item() -
              ocl_loss(t, rows_tensor(xi3), rows_tensor(xj3), flags, cfg,
                       false)
                  .item()) < 1e-9);

    SmaxHead head = init_smax_head(d, 9);
    CHECK(std::fabs(
              smax_loss(t, rows_tensor(xi), rows_tensor(xj), flags, head)
                  .item() -
              smax_loss(t, rows_tensor(xi3), rows_tensor(xj3), flags, head)
                  .item()) > 1e-6);
}

TEST_CASE("contrastive loss is nonnegative, zero only at satisfied margins") {
    Rng rng(307);
    LossConfig cfg;
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t P = 1 + rng.index(6);
        auto xi = random_rows(rng, P, 3);
        auto xj = random_rows(rng, P, 3);
        auto flags = random_flags(rng, P);
        Tape t;
        const double v =
            ocl_loss(t, rows_tensor(xi), rows_tensor(xj), flags, cfg, false)
                .item();
        CHECK(v >= 0.0);
    }
    // Satisfied margins on both sides: exact zero.
    Tape t;
    Tensor a = rows_tensor({{1.0, 0.0}, {1.0, 0.0}});
    Tensor b = rows_tensor({{1.0, 0.0}, {-1.0, 0.0}});  // dcos 0 and 2
    CHECK(ocl_loss(t, a, b, {true, false}, cfg, false).item() == 0.0);
}

TEST_CASE("every loss gradient agrees with finite differences") {
    Rng rng(308);
    LossConfig cfg;

    SUBCASE("response ranking, both forms") {
        for (const char* form : {"paper", "softmax"}) {
            cfg.mneg_form = form;
            cfg.D = 4.0;
            Tensor c = rows_tensor(random_rows(rng, 4, 3));
            Tensor r = rows_tensor(random_rows(rng, 4, 3));
            auto build = [&](Tape& t) { return mneg_loss(t, c, r, cfg); };
            CHECK(finite_difference_check(build, {c, r}).max_rel_err < 1e-5);
        }
    }

    SUBCASE("pair softmax, inputs and head") {
        Tensor xi = rows_tensor(random_rows(rng, 3, 2));
        Tensor xj = rows_tensor(random_rows(rng, 3, 2));
        std::vector<bool> flags = {true, false, true};
        SmaxHead head = init_smax_head(2, rng.next_u64());
        auto build = [&](Tape& t) {
            return smax_loss(t, xi, xj, flags, head);
        };
        CHECK(finite_difference_check(build, {xi, xj, head.W}).max_rel_err <
              1e-5);
    }

    SUBCASE("pair cosine") {
        Tensor xi = rows_tensor(random_rows(rng, 4, 3));
        Tensor xj = rows_tensor(random_rows(rng, 4, 3));
        std::vector<bool> flags = {true, false, false, true};
        auto build = [&](Tape& t) { return cos_loss(t, xi, xj, flags, cfg); };
        CHECK(finite_difference_check(build, {xi, xj}).max_rel_err < 1e-5);
    }

    SUBCASE("contrastive, offline and online") {
        for (bool online : {false, true}) {
            Tensor xi = rows_tensor(random_rows(rng, 4, 3));
            Tensor xj = rows_tensor(random_rows(rng, 4, 3));
            std::vector<bool> flags = {true, false, true, false};
            auto build = [&](Tape& t) {
                return ocl_loss(t, xi, xj, flags, cfg, online);
            };
            CHECK(finite_difference_check(build, {xi, xj}).max_rel_err <
                  1e-5);
        }
    }
}

TEST_SUITE_END();
