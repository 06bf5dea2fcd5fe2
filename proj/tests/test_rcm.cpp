#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>
#include <vector>

#include "hpdnet/errors.hpp"
#include "hpdnet/metrics.hpp"
#include "hpdnet/rcm.hpp"
#include "hpdnet/rng.hpp"
#include "test_util.hpp"

using namespace hpdnet;
using namespace hpdnet::testing;

namespace {

// Sets the worker budget for the enclosing scope and restores the default
// (hardware concurrency) afterwards.
struct ThreadBudget {
    explicit ThreadBudget(const char* v) { setenv("HPDNET_THREADS", v, 1); }
    ~ThreadBudget() { unsetenv("HPDNET_THREADS"); }
};

Matrix3c random_unitary(Rng& rng) {
    return eig_hermitian(random_hermitian(rng)).eigenvectors;
}

// HPD matrix with the given ascending spectrum and a random eigenbasis.
HpdMatrix3 hpd_with_spectrum(Rng& rng, double l0, double l1, double l2) {
    EigenDecomposition3 d;
    d.eigenvalues = {l0, l1, l2};
    d.eigenvectors = random_unitary(rng);
    return HpdMatrix3(spectral_rebuild(d, d.eigenvalues));
}

KernelBank single_layer_bank(std::vector<Matrix3c> kernels, double epsilon) {
    KernelBank bank;
    for (std::size_t c = 0; c < kernels.size(); ++c)
        bank.class_ids.push_back(static_cast<std::uint8_t>(c + 1));
    bank.layers.push_back(std::move(kernels));
    bank.epsilon = epsilon;
    return bank;
}

CoherencyField random_field(int height, int width, std::uint64_t seed) {
    CoherencyField field;
    field.height = height;
    field.width = width;
    field.looks = 4;
    Rng rng(seed);
    for (int p = 0; p < height * width; ++p) field.pixels.push_back(random_hpd(rng));
    return field;
}

bool same_values(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("identity kernel maps every input to itself") {
    Rng rng(4101);
    for (int it = 0; it < 100; ++it) {
        const HpdMatrix3 x = random_hpd(rng);
        const HpdMatrix3 y = riemannian_mapping(x, Matrix3c::identity());
        CHECK(max_abs_diff(y.to_matrix(), x.to_matrix()) == 0.0);
    }
}

TEST_CASE("unitary kernels map the identity to the identity") {
    Rng rng(4102);
    const Matrix3c id = Matrix3c::identity();
    const HpdMatrix3 one(HermitianMatrix3::from_diagonal(1.0, 1.0, 1.0));
    for (int it = 0; it < 100; ++it) {
        const HpdMatrix3 y = riemannian_mapping(one, random_unitary(rng));
        CHECK(max_abs_diff(y.to_matrix(), id) <= 1e-12);
    }
}

TEST_CASE("mapping with a full-rank kernel preserves positive definiteness") {
    Rng rng(4103);
    for (int it = 0; it < 1000; ++it) {
        const HpdMatrix3 x = random_hpd(rng);
        const Matrix3c w = random_invertible(rng);
        const HpdMatrix3 y = riemannian_mapping(x, w);
        CHECK(y.eigen().min_eigenvalue() > 0.0);
    }
}

TEST_CASE("rank-deficient kernels are rejected") {
    Rng rng(4104);
    const HpdMatrix3 x = random_hpd(rng);

    CHECK_THROWS_AS(riemannian_mapping(x, Matrix3c::zero()), DegenerateKernel);

    Vector3c k;
    k[0] = Complex(1.0, 0.5);
    k[1] = Complex(-0.3, 0.2);
    k[2] = Complex(0.8, 0.0);
    CHECK_THROWS_AS(riemannian_mapping(x, outer(k)), DegenerateKernel);

    Matrix3c rank2 = Matrix3c::identity();
    rank2(2, 2) = 0.0;
    CHECK_THROWS_AS(riemannian_mapping(x, rank2), DegenerateKernel);

    Matrix3c nearly = Matrix3c::identity();
    nearly(2, 2) = 5e-11;  // smallest singular value under the 1e-10 cutoff
    CHECK_THROWS_AS(riemannian_mapping(x, nearly), DegenerateKernel);

    // Just above the cutoff the rank gate passes; the failure (if any) moves
    // to the positivity check of the squashed output.
    Matrix3c barely = Matrix3c::identity();
    barely(2, 2) = 2e-10;
    CHECK_THROWS_AS(riemannian_mapping(x, barely), NotPositiveDefinite);

    Matrix3c small = Matrix3c::identity();
    small(2, 2) = 1e-4;  // squashes hard but keeps the output definite
    CHECK_NOTHROW(riemannian_mapping(x, small));
}

TEST_CASE("rectification clamps deficient eigenvalues and keeps the eigenvectors") {
    Rng rng(4105);
    for (int it = 0; it < 50; ++it) {
        const HpdMatrix3 x = hpd_with_spectrum(rng, 0.01, 1.0, 5.0);
        const HpdMatrix3 y = re_eig(x, 0.1);

        CHECK(y.eigen().eigenvalues[0] == 0.1);
        CHECK(y.eigen().eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(y.eigen().eigenvalues[2] == doctest::Approx(5.0).epsilon(1e-9));
        CHECK(bitwise_equal(y.eigen().eigenvectors, x.eigen().eigenvectors));

        // The matrix itself must be the spectral rebuild with clamped values.
        const std::array<double, 3> vals{0.1, x.eigen().eigenvalues[1],
                                         x.eigen().eigenvalues[2]};
        CHECK(bitwise_equal(y.matrix(), spectral_rebuild(x.eigen(), vals)));
    }
}

TEST_CASE("rectification is a bitwise no-op when every eigenvalue clears the floor") {
    Rng rng(4106);
    for (int it = 0; it < 200; ++it) {
        const HpdMatrix3 x = random_hpd(rng);
        const HpdMatrix3 y = re_eig(x, 0.9 * x.eigen().min_eigenvalue());
        CHECK(bitwise_equal(y.matrix(), x.matrix()));
        CHECK(bitwise_equal(y.eigen().eigenvectors, x.eigen().eigenvectors));
    }
}

TEST_CASE("a floor between the two smallest eigenvalues clamps exactly one") {
    Rng rng(4107);
    int tested = 0;
    for (int it = 0; it < 200; ++it) {
        const HpdMatrix3 x = random_hpd(rng);
        const auto& lam = x.eigen().eigenvalues;
        const double eps = std::sqrt(lam[0] * lam[1]);
        if (!(lam[0] < eps && eps < lam[1])) continue;  // degenerate draw
        const HpdMatrix3 y = re_eig(x, eps);
        CHECK(y.eigen().eigenvalues[0] == eps);
        CHECK(bitwise_equal(y.eigen().eigenvalues[1], lam[1]));
        CHECK(bitwise_equal(y.eigen().eigenvalues[2], lam[2]));
        ++tested;
    }
    CHECK(tested >= 190);
}

TEST_CASE("rectification is idempotent and enforces the eigenvalue floor") {
    Rng rng(4108);
    for (int it = 0; it < 200; ++it) {
        const HpdMatrix3 x = random_hpd(rng);
        const auto& lam = x.eigen().eigenvalues;
        const double eps = std::sqrt(lam[0] * lam[1]);
        const HpdMatrix3 once = re_eig(x, eps);
        const HpdMatrix3 twice = re_eig(once, eps);
        CHECK(bitwise_equal(twice.matrix(), once.matrix()));
        CHECK(once.eigen().min_eigenvalue() >= eps - 1e-12);
    }
    CHECK_THROWS_AS(re_eig(random_hpd(rng), 0.0), Error);
    CHECK_THROWS_AS(re_eig(random_hpd(rng), -1.0), Error);
}

TEST_CASE("log of the identity is the zero matrix") {
    const HpdMatrix3 one(HermitianMatrix3::from_diagonal(1.0, 1.0, 1.0));
    CHECK(frobenius_norm(log_eig(one)) == 0.0);
}

TEST_CASE("log of a rectified matrix keeps all eigenvalues above log floor") {
    Rng rng(4109);
    for (int it = 0; it < 100; ++it) {
        const HpdMatrix3 x = hpd_with_spectrum(rng, 1e-6, 0.5, 2.0);
        const double eps = 1e-3;
        const HermitianMatrix3 l = log_eig(re_eig(x, eps));
        CHECK(eig_hermitian(l).min_eigenvalue() >= std::log(eps) - 1e-9);
    }
}

TEST_CASE("log output agrees with the matrix logarithm") {
    Rng rng(4110);
    for (int it = 0; it < 100; ++it) {
        const HpdMatrix3 x = random_hpd(rng);
        CHECK(bitwise_equal(log_eig(x), logm(x)));
    }
}

TEST_CASE("flatten of zero and identity") {
    const std::array<double, 9> z = flatten(HermitianMatrix3{});
    for (double v : z) CHECK(v == 0.0);

    const std::array<double, 9> one = flatten(HermitianMatrix3::from_diagonal(1.0, 1.0, 1.0));
    const std::array<double, 9> want{1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(one == want);
}

TEST_CASE("flatten is an isometry from Frobenius to Euclidean norm") {
    Rng rng(4111);
    for (int it = 0; it < 500; ++it) {
        const HermitianMatrix3 a = random_hermitian(rng);
        const HermitianMatrix3 b = random_hermitian(rng);

        const auto norm2 = [](const std::array<double, 9>& f) {
            double s = 0.0;
            for (double v : f) s += v * v;
            return std::sqrt(s);
        };
        CHECK(std::abs(norm2(flatten(a)) - frobenius_norm(a)) < 1e-12);
        CHECK(std::abs(norm2(flatten(a - b)) - frob_diff(a, b)) < 1e-12);
    }
}

TEST_CASE("forward pass of the identity through a unitary kernel is the zero vector") {
    Rng rng(4112);
    const HpdMatrix3 one(HermitianMatrix3::from_diagonal(1.0, 1.0, 1.0));
    const KernelBank bank = single_layer_bank({random_unitary(rng)}, 1e-6);
    const FeatureVector f = rcm_forward(one, bank, rcm_config_for(bank));
    REQUIRE(f.values.size() == 9);
    for (double v : f.values) CHECK(std::abs(v) <= 1e-10);
}

TEST_CASE("forward output concatenates one 9-vector per class") {
    Rng rng(4113);
    const KernelBank bank = single_layer_bank(
        {random_unitary(rng), random_unitary(rng), random_unitary(rng)}, 1e-6);
    const FeatureVector f = rcm_forward(random_hpd(rng), bank, rcm_config_for(bank));
    CHECK(f.values.size() == 27);
    for (double v : f.values) CHECK(std::isfinite(v));
}

TEST_CASE("forward pass equals the manual composition of the four stages") {
    Rng rng(4114);
    for (int it = 0; it < 20; ++it) {
        const HpdMatrix3 t = random_hpd(rng);
        const double eps = 1e-4;
        const KernelBank bank = single_layer_bank(
            {random_invertible(rng), random_unitary(rng), random_invertible(rng)}, eps);
        const FeatureVector f = rcm_forward(t, bank, rcm_config_for(bank));
        REQUIRE(f.values.size() == 27);

        for (int c = 0; c < 3; ++c) {
            const HpdMatrix3 mapped = riemannian_mapping(t, bank.layers[0][static_cast<std::size_t>(c)]);
            const std::array<double, 9> branch = flatten(log_eig(re_eig(mapped, eps)));
            for (int k = 0; k < 9; ++k)
                CHECK(bitwise_equal(f.values[static_cast<std::size_t>(9 * c + k)], branch[static_cast<std::size_t>(k)]));
        }
    }
}

TEST_CASE("two-stage forward applies mapping and rectification twice per branch") {
    Rng rng(4115);
    const double eps = 1e-4;
    KernelBank bank = single_layer_bank({random_unitary(rng), random_invertible(rng)}, eps);
    bank.layers.push_back({random_invertible(rng), random_unitary(rng)});

    const HpdMatrix3 t = random_hpd(rng);
    const FeatureVector f = rcm_forward(t, bank, rcm_config_for(bank));
    REQUIRE(f.values.size() == 18);

    for (std::size_t c = 0; c < 2; ++c) {
        HpdMatrix3 y = re_eig(riemannian_mapping(t, bank.layers[0][c]), eps);
        y = re_eig(riemannian_mapping(y, bank.layers[1][c]), eps);
        const std::array<double, 9> branch = flatten(log_eig(y));
        for (std::size_t k = 0; k < 9; ++k)
            CHECK(bitwise_equal(f.values[9 * c + k], branch[k]));
    }
}

TEST_CASE("forward validates the config against the bank") {
    Rng rng(4116);
    const HpdMatrix3 t = random_hpd(rng);
    const KernelBank bank = single_layer_bank({random_unitary(rng), random_unitary(rng)}, 1e-6);

    RcmConfig cfg = rcm_config_for(bank);
    CHECK(cfg.num_layers == 1);
    CHECK(cfg.num_kernels_per_layer == 2);
    CHECK(cfg.epsilon == 1e-6);

    cfg.num_layers = 2;
    CHECK_THROWS_AS(rcm_forward(t, bank, cfg), ShapeError);

    cfg = rcm_config_for(bank);
    cfg.num_kernels_per_layer = 3;
    CHECK_THROWS_AS(rcm_forward(t, bank, cfg), ShapeError);

    cfg = rcm_config_for(bank);
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(rcm_forward(t, bank, cfg), ShapeError);

    KernelBank empty;
    CHECK_THROWS_AS(rcm_forward(t, empty, RcmConfig{}), ShapeError);

    KernelBank ragged = bank;
    ragged.layers[0].pop_back();
    CHECK_THROWS_AS(rcm_forward(t, ragged, rcm_config_for(ragged)), ShapeError);
}

TEST_CASE("unitary-kernel branch norm equals the log distance to the identity") {
    Rng rng(4117);
    const HpdMatrix3 one(HermitianMatrix3::from_diagonal(1.0, 1.0, 1.0));
    for (int it = 0; it < 50; ++it) {
        const double eps = 1e-5;
        const KernelBank bank = single_layer_bank({random_unitary(rng), random_unitary(rng)}, eps);
        const HpdMatrix3 x = random_hpd(rng);
        const FeatureVector f = rcm_forward(x, bank, rcm_config_for(bank));

        for (std::size_t c = 0; c < 2; ++c) {
            double s = 0.0;
            for (std::size_t k = 0; k < 9; ++k) s += f.values[9 * c + k] * f.values[9 * c + k];
            const HpdMatrix3 mapped = riemannian_mapping(x, bank.layers[0][c]);
            CHECK(std::abs(std::sqrt(s) - dist_lem(re_eig(mapped, eps), one)) <= 1e-10);
        }
    }
}

TEST_CASE("field forward matches the single-pixel forward") {
    Rng rng(4118);
    CoherencyField field = random_field(1, 1, 4118);
    const KernelBank bank = single_layer_bank({random_unitary(rng), random_invertible(rng)}, 1e-6);

    const FeatureField out = rcm_forward_field(field, bank, rcm_config_for(bank));
    CHECK(out.height == 1);
    CHECK(out.width == 1);
    REQUIRE(out.dim == 18);

    const FeatureVector single = rcm_forward(field.at(0, 0), bank, rcm_config_for(bank));
    CHECK(same_values(out.values, single.values));
}

TEST_CASE("constant fields produce constant feature fields") {
    Rng rng(4119);
    CoherencyField field;
    field.height = 4;
    field.width = 5;
    const HpdMatrix3 t = random_hpd(rng);
    for (int p = 0; p < 20; ++p) field.pixels.push_back(t);

    const KernelBank bank = single_layer_bank({random_unitary(rng), random_unitary(rng)}, 1e-6);
    const FeatureField out = rcm_forward_field(field, bank, rcm_config_for(bank));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j)
            CHECK(std::memcmp(out.at(i, j), out.at(0, 0),
                              static_cast<std::size_t>(out.dim) * sizeof(double)) == 0);
}

TEST_CASE("field forward is bitwise identical across worker budgets") {
    Rng rng(4120);
    const CoherencyField field = random_field(16, 16, 4120);
    const KernelBank bank = single_layer_bank(
        {random_unitary(rng), random_invertible(rng), random_unitary(rng)}, 1e-6);

    std::vector<double> serial;
    {
        ThreadBudget budget("1");
        serial = rcm_forward_field(field, bank, rcm_config_for(bank)).values;
    }
    std::vector<double> parallel;
    {
        ThreadBudget budget("5");
        parallel = rcm_forward_field(field, bank, rcm_config_for(bank)).values;
    }
    CHECK(serial.size() == 16 * 16 * 27);
    CHECK(same_values(serial, parallel));
}

TEST_CASE("pixel-level failures carry the coordinates of the first failing pixel") {
    CoherencyField field;
    field.height = 2;
    field.width = 3;
    for (int p = 0; p < 6; ++p)
        field.pixels.emplace_back(HermitianMatrix3::from_diagonal(1.0, 1.0, 1.0));

    // Passes the rank check (smallest singular value 2e-10) but squashes the
    // third eigenvalue of every mapped pixel below the positivity floor.
    Matrix3c nearly = Matrix3c::identity();
    nearly(2, 2) = 2e-10;
    const KernelBank bank = single_layer_bank({nearly}, 1e-6);

    ThreadBudget budget("3");
    try {
        rcm_forward_field(field, bank, rcm_config_for(bank));
        FAIL("expected NotPositiveDefinite");
    } catch (const NotPositiveDefinite& e) {
        CHECK(std::string(e.what()).find("pixel (0, 0)") != std::string::npos);
    }

    // A fully degenerate kernel is rejected before any pixel runs.
    const KernelBank broken = single_layer_bank({Matrix3c::zero()}, 1e-6);
    CHECK_THROWS_AS(rcm_forward_field(field, broken, rcm_config_for(broken)), DegenerateKernel);
}

TEST_CASE("raw features are the flattened coherency entries") {
    const CoherencyField field = random_field(3, 4, 4121);
    const FeatureField out = raw_feature_field(field);
    CHECK(out.height == 3);
    CHECK(out.width == 4);
    REQUIRE(out.dim == 9);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            const std::array<double, 9> want = flatten(field.at(i, j).matrix());
            for (int k = 0; k < 9; ++k) CHECK(bitwise_equal(out.at(i, j)[k], want[static_cast<std::size_t>(k)]));
        }
}
