#ifndef HPDNET_RCM_HPP
#define HPDNET_RCM_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "hpdnet/hpd_core.hpp"
#include "hpdnet/polsar_data.hpp"

namespace hpdnet {

// Learned per-class mapping kernels plus the eigenvalue floor the rectifier
// applies between stages. `layers[l][c]` is the kernel the class-c branch
// applies at stage l; every stage holds one kernel per class, ordered like
// `class_ids`. `sample_seed` records the training-pixel sampling seed so a
// bank can be reproduced bit for bit.
struct KernelBank {
    std::vector<std::vector<Matrix3c>> layers;
    std::vector<std::uint8_t> class_ids;
    double epsilon = 0.0;
    std::uint64_t sample_seed = 0;

    int num_layers() const { return static_cast<int>(layers.size()); }
    int num_classes() const { return static_cast<int>(class_ids.size()); }
};

// Shape parameters of the forward pass. `rcm_config_for` fills them in from a
// learned bank; hand-built configs are mainly for tests and must agree with
// the bank they are used with.
struct RcmConfig {
    int num_layers = 1;             // mapping + rectification stages per branch
    double epsilon = 1e-6;          // rectifier eigenvalue floor
    int num_kernels_per_layer = 1;  // branch count (one branch per class)
};

RcmConfig rcm_config_for(const KernelBank& bank);

// Per-pixel real feature vector; dimension is 9 x branch count.
struct FeatureVector {
    std::vector<double> values;
};

// Row-major grid of equally sized feature vectors, stored contiguously.
struct FeatureField {
    int height = 0;
    int width = 0;
    int dim = 0;
    std::vector<double> values;  // height * width * dim

    std::size_t offset(int i, int j) const {
        return (static_cast<std::size_t>(i) * static_cast<std::size_t>(width) +
                static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dim);
    }
    double* at(int i, int j) { return values.data() + offset(i, j); }
    const double* at(int i, int j) const { return values.data() + offset(i, j); }
};

// Bilinear mapping w^H x w. Requires w full rank (smallest singular value
// above 1e-10) so positive definiteness is preserved.
HpdMatrix3 riemannian_mapping(const HpdMatrix3& x, const Matrix3c& w);

// Eigenvalue rectification: clamps every eigenvalue below `epsilon` up to
// `epsilon` while keeping the eigenvectors. Inputs already at or above the
// floor are returned unchanged, which makes the operation idempotent at the
// bit level.
HpdMatrix3 re_eig(const HpdMatrix3& x, double epsilon);

// Matrix logarithm: maps the manifold point into the tangent space of
// Hermitian matrices, where Euclidean arithmetic applies.
HermitianMatrix3 log_eig(const HpdMatrix3& x);

// [m11, m22, m33, r2*Re m12, r2*Im m12, r2*Re m13, r2*Im m13, r2*Re m23,
//  r2*Im m23] with r2 = sqrt 2: a linear isometry from Hermitian matrices
// under the Frobenius norm onto R^9 under the Euclidean norm.
std::array<double, 9> flatten(const HermitianMatrix3& m);

// Full per-pixel pipeline: every class branch applies `num_layers` rounds of
// mapping + rectification to its own kernels, then log + flatten; branch
// outputs are concatenated in class order. cfg must match the bank's shape
// (ShapeError otherwise); cfg.epsilon is the floor actually applied.
FeatureVector rcm_forward(const HpdMatrix3& t, const KernelBank& bank, const RcmConfig& cfg);

// rcm_forward over a whole field, parallel across pixels and bit-identical to
// the serial loop. A pixel-level failure is rethrown with the pixel
// coordinates prepended; with several failing pixels the first in row-major
// order is reported.
FeatureField rcm_forward_field(const CoherencyField& field, const KernelBank& bank,
                               const RcmConfig& cfg);

// Mapping-free baseline: flatten(t) per pixel, dimension 9. Feeds raw
// coherency entries to the classifier head when the mapping stage is
// disabled.
FeatureField raw_feature_field(const CoherencyField& field);

}  // namespace hpdnet

#endif  // HPDNET_RCM_HPP
