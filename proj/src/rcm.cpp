#include "hpdnet/rcm.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hpdnet/errors.hpp"
#include "hpdnet/parallel.hpp"

namespace hpdnet {
namespace {

// Kernels with a smaller singular value count as rank deficient: the mapped
// matrix would lose positive definiteness to roundoff.
constexpr double kMinSingularValue = 1e-10;

double min_singular_value(const Matrix3c& w) {
    const HermitianMatrix3 gram = HermitianMatrix3::hermitian_part(adjoint(w) * w);
    const double lo = eig_hermitian(gram).min_eigenvalue();
    return lo > 0.0 ? std::sqrt(lo) : 0.0;
}

void check_kernel(const Matrix3c& w) {
    if (min_singular_value(w) <= kMinSingularValue)
        throw DegenerateKernel("mapping kernel is rank deficient (smallest singular value <= 1e-10)");
}

void check_kernels(const KernelBank& bank) {
    for (const auto& layer : bank.layers)
        for (const Matrix3c& w : layer) check_kernel(w);
}

// w^H x w without the rank check, for callers that validated w up front.
HpdMatrix3 map_unchecked(const HpdMatrix3& x, const Matrix3c& w) {
    return HpdMatrix3(HermitianMatrix3::hermitian_part(adjoint(w) * x.to_matrix() * w));
}

void check_shapes(const KernelBank& bank, const RcmConfig& cfg) {
    if (bank.layers.empty() || bank.class_ids.empty()) throw ShapeError("kernel bank is empty");
    for (const auto& layer : bank.layers)
        if (layer.size() != bank.class_ids.size())
            throw ShapeError("kernel bank stage holds " + std::to_string(layer.size()) +
                             " kernels for " + std::to_string(bank.num_classes()) + " classes");
    if (cfg.num_layers != bank.num_layers())
        throw ShapeError("config expects " + std::to_string(cfg.num_layers) +
                         " mapping stages, bank provides " + std::to_string(bank.num_layers()));
    if (cfg.num_kernels_per_layer != bank.num_classes())
        throw ShapeError("config expects " + std::to_string(cfg.num_kernels_per_layer) +
                         " kernels per stage, bank provides " +
                         std::to_string(bank.num_classes()));
    if (!(cfg.epsilon > 0.0)) throw ShapeError("rectifier floor must be positive");
}

// One pixel through every branch; writes 9 values per branch at `out`.
void forward_into(const HpdMatrix3& t, const KernelBank& bank, double epsilon, double* out) {
    for (std::size_t c = 0; c < bank.class_ids.size(); ++c) {
        HpdMatrix3 y = t;
        for (const auto& layer : bank.layers) y = re_eig(map_unchecked(y, layer[c]), epsilon);
        const std::array<double, 9> f = flatten(log_eig(y));
        double* branch = out + 9 * c;
        for (int k = 0; k < 9; ++k) branch[k] = f[k];
    }
}

}  // namespace

RcmConfig rcm_config_for(const KernelBank& bank) {
    return RcmConfig{bank.num_layers(), bank.epsilon, bank.num_classes()};
}

HpdMatrix3 riemannian_mapping(const HpdMatrix3& x, const Matrix3c& w) {
    check_kernel(w);
    return map_unchecked(x, w);
}

HpdMatrix3 re_eig(const HpdMatrix3& x, double epsilon) {
    if (!(epsilon > 0.0)) throw Error("rectifier threshold must be positive");
    const EigenDecomposition3& e = x.eigen();
    if (e.min_eigenvalue() >= epsilon) return x;
    EigenDecomposition3 clamped = e;
    for (double& v : clamped.eigenvalues)
        if (v < epsilon) v = epsilon;
    return HpdMatrix3::from_decomposition(spectral_rebuild(e, clamped.eigenvalues), clamped);
}

HermitianMatrix3 log_eig(const HpdMatrix3& x) { return logm(x); }

std::array<double, 9> flatten(const HermitianMatrix3& m) {
    constexpr double r2 = std::numbers::sqrt2;
    const Complex m01 = m(0, 1);
    const Complex m02 = m(0, 2);
    const Complex m12 = m(1, 2);
    return {m.diagonal(0),    m.diagonal(1),    m.diagonal(2),
            r2 * m01.real(),  r2 * m01.imag(),  r2 * m02.real(),
            r2 * m02.imag(),  r2 * m12.real(),  r2 * m12.imag()};
}

FeatureVector rcm_forward(const HpdMatrix3& t, const KernelBank& bank, const RcmConfig& cfg) {
    check_shapes(bank, cfg);
    check_kernels(bank);
    FeatureVector out;
    out.values.resize(9 * bank.class_ids.size());
    forward_into(t, bank, cfg.epsilon, out.values.data());
    return out;
}

FeatureField rcm_forward_field(const CoherencyField& field, const KernelBank& bank,
                               const RcmConfig& cfg) {
    check_shapes(bank, cfg);
    check_kernels(bank);
    FeatureField out;
    out.height = field.height;
    out.width = field.width;
    out.dim = 9 * bank.num_classes();
    out.values.resize(field.size() * static_cast<std::size_t>(out.dim));
    parallel_for(field.size(), [&](std::size_t p) {
        const auto where = [&] {
            return "pixel (" + std::to_string(p / static_cast<std::size_t>(field.width)) +
                   ", " + std::to_string(p % static_cast<std::size_t>(field.width)) + "): ";
        };
        try {
            forward_into(field.pixels[p], bank, cfg.epsilon,
                         out.values.data() + p * static_cast<std::size_t>(out.dim));
        } catch (const NotPositiveDefinite& e) {
            throw NotPositiveDefinite(where() + e.what());
        } catch (const DegenerateKernel& e) {
            throw DegenerateKernel(where() + e.what());
        }
    });
    return out;
}

FeatureField raw_feature_field(const CoherencyField& field) {
    FeatureField out;
    out.height = field.height;
    out.width = field.width;
    out.dim = 9;
    out.values.resize(field.size() * 9);
    parallel_for(field.size(), [&](std::size_t p) {
        const std::array<double, 9> f = flatten(field.pixels[p].matrix());
        double* dst = out.values.data() + p * 9;
        for (int k = 0; k < 9; ++k) dst[k] = f[k];
    });
    return out;
}

}  // namespace hpdnet
