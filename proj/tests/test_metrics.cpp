#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hpdnet/metrics.hpp"
#include "test_util.hpp"

using namespace hpdnet;
using namespace hpdnet::testing;

namespace {

HpdMatrix3 hpd_diag(double a, double b, double c) {
    return HpdMatrix3(HermitianMatrix3::from_diagonal(a, b, c));
}

// A X A^H as an HPD value, for the affine-invariance checks.
HpdMatrix3 congruence(const Matrix3c& a, const HpdMatrix3& x) {
    return HpdMatrix3(HermitianMatrix3::hermitian_part(a * x.to_matrix() * adjoint(a)));
}

}  // namespace

// -----------------------------------------------------------------------------
// Closed-form values
// -----------------------------------------------------------------------------

TEST_CASE("AIRM closed forms") {
    const HpdMatrix3 id = hpd_diag(1.0, 1.0, 1.0);
    CHECK(dist_airm(id, id) == doctest::Approx(0.0).epsilon(1e-12));
    // Commuting diagonal case: ||log diag(2,1,1)||_F = ln 2.
    CHECK(dist_airm(hpd_diag(2.0, 1.0, 1.0), id) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-10));
    CHECK(dist_airm(hpd_diag(4.0, 1.0, 1.0), hpd_diag(1.0, 4.0, 1.0)) ==
          doctest::Approx(std::sqrt(2.0) * std::log(4.0)).epsilon(1e-10));
}

TEST_CASE("LEM closed forms") {
    const HpdMatrix3 id = hpd_diag(1.0, 1.0, 1.0);
    const double e2 = std::exp(2.0);
    CHECK(dist_lem(id, id) == 0.0);
    CHECK(dist_lem(hpd_diag(e2, 1.0, 1.0), id) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("Stein closed forms") {
    const HpdMatrix3 id = hpd_diag(1.0, 1.0, 1.0);
    const HpdMatrix3 x = hpd_diag(2.0, 1.0, 1.0);
    CHECK(dist_stein(x, x) == doctest::Approx(0.0).epsilon(1e-12));
    // logdet diag(1.5,1,1) - 0.5 logdet diag(2,1,1) = ln 1.5 - 0.5 ln 2.
    const double expected = std::log(1.5) - 0.5 * std::log(2.0);
    CHECK(dist_stein(x, id) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(expected == doctest::Approx(0.058891).epsilon(1e-5));
}

TEST_CASE("Jeffrey closed forms") {
    const HpdMatrix3 id = hpd_diag(1.0, 1.0, 1.0);
    const HpdMatrix3 x = hpd_diag(2.0, 1.0, 1.0);
    CHECK(dist_jeffrey(x, x) == doctest::Approx(0.0).epsilon(1e-12));
    // (1/2)(0.5+1+1) + (1/2)(2+1+1) - 3 = 1.25 + 2 - 3 = 0.25.
    CHECK(dist_jeffrey(x, id) == doctest::Approx(0.25).epsilon(1e-12));
}

// -----------------------------------------------------------------------------
// Metric axioms on seeded pairs
// -----------------------------------------------------------------------------

TEST_CASE("symmetry, identity and positivity for all four distances") {
    Rng rng(90210);
    const MetricKind kinds[] = {MetricKind::AIRM, MetricKind::LEM, MetricKind::Stein,
                                MetricKind::Jeffrey};
    for (int trial = 0; trial < 250; ++trial) {
        const HpdMatrix3 x = random_hpd(rng);
        const HpdMatrix3 y = random_hpd(rng);
        for (MetricKind k : kinds) {
            const double xy = dist(k, x, y);
            const double yx = dist(k, y, x);
            REQUIRE(std::abs(xy - yx) < 1e-10);
            REQUIRE(dist(k, x, x) < 1e-8);
            REQUIRE(xy > 0.0);  // distinct random pairs
            REQUIRE(std::isfinite(xy));
        }
    }
}

TEST_CASE("AIRM affine invariance") {
    Rng rng(424243);
    for (int trial = 0; trial < 200; ++trial) {
        const HpdMatrix3 x = random_hpd(rng);
        const HpdMatrix3 y = random_hpd(rng);
        const Matrix3c a = random_invertible(rng);
        const double base = dist_airm(x, y);
        const double mapped = dist_airm(congruence(a, x), congruence(a, y));
        REQUIRE(std::abs(base - mapped) < 1e-8);
    }
}

TEST_CASE("LEM triangle inequality on 1000 seeded triples") {
    Rng rng(333);
    for (int trial = 0; trial < 1000; ++trial) {
        const HpdMatrix3 x = random_hpd(rng);
        const HpdMatrix3 y = random_hpd(rng);
        const HpdMatrix3 z = random_hpd(rng);
        REQUIRE(dist_lem(x, z) <= dist_lem(x, y) + dist_lem(y, z) + 1e-12);
    }
}

TEST_CASE("Jeffrey divergence is scale invariant") {
    Rng rng(777);
    for (int trial = 0; trial < 200; ++trial) {
        const HpdMatrix3 x = random_hpd(rng);
        const HpdMatrix3 y = random_hpd(rng);
        const double c = 0.1 + 5.0 * rng.next_double();
        const HpdMatrix3 cx(c * x.matrix());
        const HpdMatrix3 cy(c * y.matrix());
        REQUIRE(std::abs(dist_jeffrey(cx, cy) - dist_jeffrey(x, y)) < 1e-9);
    }
}

// -----------------------------------------------------------------------------
// Fréchet mean
// -----------------------------------------------------------------------------

TEST_CASE("mean of identical points is the point") {
    Rng rng(100);
    const HpdMatrix3 x = random_hpd(rng);
    const HpdMatrix3 m = frechet_mean_lem({x, x, x});
    CHECK(frob_diff(m.matrix(), x.matrix()) < 1e-9);
}

TEST_CASE("mean of commuting scalar matrices") {
    const double e = std::exp(1.0);
    const double e2 = std::exp(2.0);
    const HpdMatrix3 m = frechet_mean_lem({hpd_diag(1.0, 1.0, 1.0), hpd_diag(e2, e2, e2)});
    CHECK(frob_diff(m.matrix(), HermitianMatrix3::from_diagonal(e, e, e)) < 1e-10);
}

TEST_CASE("empty input is rejected") {
    CHECK_THROWS_AS(frechet_mean_lem({}), EmptyInput);
}

TEST_CASE("mean minimizes the summed squared LEM distance locally") {
    Rng rng(246810);
    for (int set = 0; set < 50; ++set) {
        std::vector<HpdMatrix3> samples;
        for (int i = 0; i < 10; ++i) samples.push_back(random_hpd(rng));
        const HpdMatrix3 mean = frechet_mean_lem(samples);

        const auto objective = [&](const HpdMatrix3& m) {
            double s = 0.0;
            for (const HpdMatrix3& t : samples) {
                const double d = dist_lem(m, t);
                s += d * d;
            }
            return s;
        };
        const double at_mean = objective(mean);
        const HermitianMatrix3 log_mean = logm(mean);
        for (int p = 0; p < 100; ++p) {
            HermitianMatrix3 shifted = log_mean;
            shifted += 0.05 * random_hermitian(rng);
            REQUIRE(objective(expm(shifted)) >= at_mean - 1e-12);
        }
    }
}

TEST_CASE("mean is bitwise invariant to input permutation") {
    Rng rng(1123);
    std::vector<HpdMatrix3> samples;
    for (int i = 0; i < 12; ++i) samples.push_back(random_hpd(rng));
    const HpdMatrix3 a = frechet_mean_lem(samples);

    // A fixed but nontrivial reordering.
    std::vector<HpdMatrix3> shuffled;
    for (std::size_t i = 0; i < samples.size(); ++i)
        shuffled.push_back(samples[(5 * i + 3) % samples.size()]);
    const HpdMatrix3 b = frechet_mean_lem(shuffled);

    REQUIRE(bitwise_equal(a.matrix(), b.matrix()));
}

TEST_CASE("mean of a single sample is the sample") {
    Rng rng(99);
    const HpdMatrix3 x = random_hpd(rng);
    CHECK(frob_diff(frechet_mean_lem({x}).matrix(), x.matrix()) < 1e-9);
}
