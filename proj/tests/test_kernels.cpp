#include <doctest.h>

#include <cstdint>
#include <cstring>
#include <random>
#include <vector>

#include "convfit/kernels.hpp"

using convfit::kernels::avx2_backend;
using convfit::kernels::avx2_supported;
using convfit::kernels::Backend;
using convfit::kernels::scalar_backend;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n,
                               double lo = -3.0, double hi = 3.0) {
    std::vector<double> v(n);
    for (auto& x : v) {
        // 53-bit uniform in [0,1), mapped to [lo,hi).
        double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        x = lo + (hi - lo) * u;
    }
    return v;
}

bool bits_equal(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    return a.empty() ||
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

constexpr std::size_t kLengths[] = {0, 1, 2, 3, 4, 5, 7, 8,
                                    9, 15, 16, 17, 100, 1000};

}  // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("scalar dot/sum/sumsq on known values") {
    const Backend& k = scalar_backend();
    std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
    std::vector<double> b = {0.5, -1.0, 2.0, 0.0};
    CHECK(k.dot(a.data(), b.data(), 4) == doctest::Approx(4.5));
    CHECK(k.sum(a.data(), 4) == doctest::Approx(10.0));
    CHECK(k.sumsq(a.data(), 4) == doctest::Approx(30.0));
    CHECK(k.dot(a.data(), b.data(), 0) == 0.0);
}

TEST_CASE("scalar elementwise on known values") {
    const Backend& k = scalar_backend();
    std::vector<double> x = {-2.0, -0.0, 0.0, 3.5};
    std::vector<double> out(4);
    k.relu(x.data(), out.data(), 4);
    CHECK(out == std::vector<double>{0.0, 0.0, 0.0, 3.5});
    k.absval(x.data(), out.data(), 4);
    CHECK(out == std::vector<double>{2.0, 0.0, 0.0, 3.5});
    std::vector<double> y = {1.0, 1.0, 1.0, 1.0};
    k.axpy(2.0, x.data(), y.data(), 4);
    CHECK(y == std::vector<double>{-3.0, 1.0, 1.0, 8.0});
}

TEST_CASE("avx2 elementwise kernels are bit-identical to scalar") {
    if (!avx2_supported()) return;
    const Backend& s = scalar_backend();
    const Backend& v = avx2_backend();
    std::mt19937_64 rng(7);

    for (std::size_t n : kLengths) {
        auto a = random_vec(rng, n);
        auto b = random_vec(rng, n);
        std::vector<double> so(n), vo(n);

        s.add(a.data(), b.data(), so.data(), n);
        v.add(a.data(), b.data(), vo.data(), n);
        CHECK(bits_equal(so, vo));

        s.sub(a.data(), b.data(), so.data(), n);
        v.sub(a.data(), b.data(), vo.data(), n);
        CHECK(bits_equal(so, vo));

        s.mul(a.data(), b.data(), so.data(), n);
        v.mul(a.data(), b.data(), vo.data(), n);
        CHECK(bits_equal(so, vo));

        s.scale(0.37, a.data(), so.data(), n);
        v.scale(0.37, a.data(), vo.data(), n);
        CHECK(bits_equal(so, vo));

        s.relu(a.data(), so.data(), n);
        v.relu(a.data(), vo.data(), n);
        CHECK(bits_equal(so, vo));

        s.absval(a.data(), so.data(), n);
        v.absval(a.data(), vo.data(), n);
        CHECK(bits_equal(so, vo));

        auto y1 = b;
        auto y2 = b;
        s.axpy(-1.7, a.data(), y1.data(), n);
        v.axpy(-1.7, a.data(), y2.data(), n);
        CHECK(bits_equal(y1, y2));
    }
}

TEST_CASE("avx2 relu handles negative zero like scalar") {
    if (!avx2_supported()) return;
    std::vector<double> x = {-0.0, -0.0, -0.0, -0.0, -0.0};
    std::vector<double> so(5), vo(5);
    scalar_backend().relu(x.data(), so.data(), 5);
    avx2_backend().relu(x.data(), vo.data(), 5);
    CHECK(bits_equal(so, vo));
    std::uint64_t bits;
    std::memcpy(&bits, &vo[0], sizeof(bits));
    CHECK(bits == 0);  // +0.0, not -0.0
}

TEST_CASE("avx2 adamw is bit-identical to scalar") {
    if (!avx2_supported()) return;
    const Backend& s = scalar_backend();
    const Backend& v = avx2_backend();
    std::mt19937_64 rng(11);

    for (std::size_t n : kLengths) {
        auto p1 = random_vec(rng, n);
        auto m1 = random_vec(rng, n, -0.01, 0.01);
        auto v1 = random_vec(rng, n, 0.0, 0.01);
        auto g = random_vec(rng, n);
        auto p2 = p1;
        auto m2 = m1;
        auto v2 = v1;

        // A few consecutive steps so state feeds back into itself.
        for (int t = 1; t <= 3; ++t) {
            double bc1 = 1.0 - std::pow(0.9, t);
            double bc2 = 1.0 - std::pow(0.999, t);
            s.adamw(p1.data(), m1.data(), v1.data(), g.data(), n, 1e-3, 0.9,
                    0.999, 1e-8, 0.01, bc1, bc2);
            v.adamw(p2.data(), m2.data(), v2.data(), g.data(), n, 1e-3, 0.9,
                    0.999, 1e-8, 0.01, bc1, bc2);
        }
        CHECK(bits_equal(p1, p2));
        CHECK(bits_equal(m1, m2));
        CHECK(bits_equal(v1, v2));
    }
}

TEST_CASE("avx2 reductions match scalar within relative tolerance") {
    if (!avx2_supported()) return;
    const Backend& s = scalar_backend();
    const Backend& v = avx2_backend();
    std::mt19937_64 rng(13);

    for (std::size_t n : kLengths) {
        auto a = random_vec(rng, n);
        auto b = random_vec(rng, n);

        double sd = s.dot(a.data(), b.data(), n);
        double vd = v.dot(a.data(), b.data(), n);
        CHECK(vd == doctest::Approx(sd).epsilon(1e-13));

        double ss = s.sum(a.data(), n);
        double vs = v.sum(a.data(), n);
        CHECK(vs == doctest::Approx(ss).epsilon(1e-13));

        double sq = s.sumsq(a.data(), n);
        double vq = v.sumsq(a.data(), n);
        CHECK(vq == doctest::Approx(sq).epsilon(1e-13));
    }
}

TEST_CASE("backend selection") {
    using convfit::kernels::active;
    using convfit::kernels::force_backend;

    force_backend("scalar");
    CHECK(std::string(active().name) == "scalar");
    if (avx2_supported()) {
        force_backend("avx2");
        CHECK(std::string(active().name) == "avx2");
    }
    force_backend("auto");
    CHECK(std::string(active().name) ==
          (avx2_supported() ? "avx2" : "scalar"));
    CHECK_THROWS(force_backend("neon"));
    force_backend("auto");
}

TEST_SUITE_END();
