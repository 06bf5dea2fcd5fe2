#ifndef HPDNET_KERNEL_LEARNING_HPP
#define HPDNET_KERNEL_LEARNING_HPP

#include <cstdint>
#include <vector>

#include "hpdnet/hpd_core.hpp"
#include "hpdnet/polsar_data.hpp"
#include "hpdnet/rcm.hpp"

namespace hpdnet {

// Training pixels of one class.
struct ClassSampleSet {
    int class_id = 0;
    std::vector<HpdMatrix3> matrices;
};

// Row-major pixel indices of one class inside a stratified subsample.
struct ClassIndexSet {
    int class_id = 0;
    std::vector<std::size_t> pixels;
};

// Log-Euclidean barycenter of the class samples. EmptyInput when the set is
// empty.
HpdMatrix3 class_frechet_mean(const ClassSampleSet& samples);

// Sample covariance around the given mean, (1/(N-1)) sum (T_i - mean)^H
// (T_i - mean), summed in sample order. Hermitian positive semidefinite.
// InsufficientSamples below two samples.
HermitianMatrix3 class_scatter(const ClassSampleSet& samples, const HpdMatrix3& mean);

// Eigenvectors of the scatter as kernel columns, ordered by descending
// eigenvalue. Unitary by construction; ties are settled by the deterministic
// eigensolver ordering. InvalidMatrix on non-finite input.
Matrix3c solve_kernel(const HermitianMatrix3& scatter);

// 1st percentile with linear interpolation between order statistics; the
// rectifier floor is this statistic over the smallest eigenvalues of the
// sampled training pixels. EmptyInput when no values are given.
double first_percentile(std::vector<double> values);

// Seeded stratified subsample of the labeled pixels: every class draws
// ceil(sample_fraction x class size) of its pixels without replacement via
// its own seed substream, so one class's draw does not disturb another's.
// Classes are returned in ascending id order, indices ascending (row-major).
// Unlabeled pixels (class 0) never participate.
std::vector<ClassIndexSet> stratified_sample(const LabelMap& labels, double sample_fraction,
                                             std::uint64_t seed);

// Closed-form kernel learning: per class, subsample -> barycenter -> scatter
// -> eigenvector kernel. The rectifier floor is learned alongside, and with
// num_layers = 2 a second kernel per class is learned the same way from the
// first stage's rectified outputs. Same seed in, bitwise-identical bank out.
KernelBank learn_kernel_bank(const CoherencyField& field, const LabelMap& labels,
                             double sample_fraction, std::uint64_t seed, int num_layers = 1);

}  // namespace hpdnet

#endif  // HPDNET_KERNEL_LEARNING_HPP
