#include "hpdnet/kernel_learning.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "hpdnet/errors.hpp"
#include "hpdnet/metrics.hpp"
#include "hpdnet/parallel.hpp"
#include "hpdnet/rng.hpp"

namespace hpdnet {

HpdMatrix3 class_frechet_mean(const ClassSampleSet& samples) {
    if (samples.matrices.empty())
        throw EmptyInput("class " + std::to_string(samples.class_id) + " has no samples");
    return frechet_mean_lem(samples.matrices);
}

HermitianMatrix3 class_scatter(const ClassSampleSet& samples, const HpdMatrix3& mean) {
    const std::size_t n = samples.matrices.size();
    if (n < 2)
        throw InsufficientSamples(samples.class_id,
                                  "class " + std::to_string(samples.class_id) + " has " +
                                      std::to_string(n) +
                                      " samples, covariance needs at least 2");
    Matrix3c acc;
    for (const HpdMatrix3& t : samples.matrices) {
        const Matrix3c d = (t.matrix() - mean.matrix()).to_matrix();
        acc = acc + adjoint(d) * d;
    }
    HermitianMatrix3 out = HermitianMatrix3::hermitian_part(acc);
    out *= 1.0 / static_cast<double>(n - 1);
    return out;
}

Matrix3c solve_kernel(const HermitianMatrix3& scatter) {
    if (!is_finite(scatter.to_matrix()))
        throw InvalidMatrix("scatter contains non-finite entries");
    const EigenDecomposition3 e = eig_hermitian(scatter);
    Matrix3c k;
    for (int c = 0; c < 3; ++c)
        for (int r = 0; r < 3; ++r) k(r, c) = e.eigenvectors(r, 2 - c);
    return k;
}

double first_percentile(std::vector<double> values) {
    if (values.empty()) throw EmptyInput("percentile of an empty value set");
    std::sort(values.begin(), values.end());
    const double rank = 0.01 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<ClassIndexSet> stratified_sample(const LabelMap& labels, double sample_fraction,
                                             std::uint64_t seed) {
    if (!(sample_fraction > 0.0) || sample_fraction > 1.0)
        throw ConfigError("sample fraction must be in (0, 1], got " +
                          std::to_string(sample_fraction));

    std::vector<std::vector<std::size_t>> by_class(
        static_cast<std::size_t>(labels.max_label()) + 1);
    for (std::size_t p = 0; p < labels.labels.size(); ++p)
        if (labels.labels[p] != 0) by_class[labels.labels[p]].push_back(p);

    std::vector<ClassIndexSet> out;
    for (std::size_t c = 1; c < by_class.size(); ++c) {
        std::vector<std::size_t>& idx = by_class[c];
        if (idx.empty()) continue;
        const std::size_t n = idx.size();
        auto k = static_cast<std::size_t>(
            std::ceil(sample_fraction * static_cast<double>(n)));
        if (k > n) k = n;
        // Partial Fisher-Yates driven by a per-class seed substream: each
        // class draws independently, so edits to one class's labels leave
        // every other class's sample untouched.
        Rng rng(substream_seed(seed, static_cast<std::uint64_t>(c)));
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + rng.next_below(n - i);
            std::swap(idx[i], idx[j]);
        }
        idx.resize(k);
        std::sort(idx.begin(), idx.end());
        out.push_back(ClassIndexSet{static_cast<int>(c), std::move(idx)});
    }
    return out;
}

KernelBank learn_kernel_bank(const CoherencyField& field, const LabelMap& labels,
                             double sample_fraction, std::uint64_t seed, int num_layers) {
    if (field.height != labels.height || field.width != labels.width)
        throw ShapeError("label map " + std::to_string(labels.height) + "x" +
                         std::to_string(labels.width) + " does not match field " +
                         std::to_string(field.height) + "x" + std::to_string(field.width));
    if (num_layers < 1) throw ConfigError("mapping stage count must be at least 1");

    const std::vector<ClassIndexSet> sampled = stratified_sample(labels, sample_fraction, seed);
    if (sampled.size() < 2)
        throw NoLabels("kernel learning needs at least 2 labeled classes, found " +
                       std::to_string(sampled.size()));

    const std::size_t num_classes = sampled.size();
    std::vector<ClassSampleSet> samples(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (sampled[c].pixels.size() < 2)
            throw InsufficientSamples(
                sampled[c].class_id, "class " + std::to_string(sampled[c].class_id) +
                                         " keeps only " +
                                         std::to_string(sampled[c].pixels.size()) +
                                         " pixels after sampling, need at least 2");
        samples[c].class_id = sampled[c].class_id;
        samples[c].matrices.reserve(sampled[c].pixels.size());
        for (std::size_t p : sampled[c].pixels) samples[c].matrices.push_back(field.pixels[p]);
    }

    KernelBank bank;
    bank.sample_seed = seed;
    for (const ClassSampleSet& s : samples)
        bank.class_ids.push_back(static_cast<std::uint8_t>(s.class_id));

    // Rectifier floor: 1st percentile of the smallest eigenvalues over the
    // pooled sampled pixels.
    std::vector<double> min_eigs;
    for (const ClassSampleSet& s : samples)
        for (const HpdMatrix3& t : s.matrices) min_eigs.push_back(t.eigen().min_eigenvalue());
    bank.epsilon = first_percentile(std::move(min_eigs));

    for (int l = 0; l < num_layers; ++l) {
        std::vector<Matrix3c> stage(num_classes);
        parallel_for(num_classes, [&](std::size_t c) {
            const HpdMatrix3 mean = class_frechet_mean(samples[c]);
            stage[c] = solve_kernel(class_scatter(samples[c], mean));
        });
        if (l + 1 < num_layers) {
            // The next stage learns from what this stage's branches emit.
            parallel_for(num_classes, [&](std::size_t c) {
                for (HpdMatrix3& t : samples[c].matrices)
                    t = re_eig(riemannian_mapping(t, stage[c]), bank.epsilon);
            });
        }
        bank.layers.push_back(std::move(stage));
    }
    return bank;
}

}  // namespace hpdnet
