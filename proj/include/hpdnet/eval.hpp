#ifndef HPDNET_EVAL_HPP
#define HPDNET_EVAL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hpdnet/polsar_data.hpp"

namespace hpdnet {

// Counts over the labeled pixels only (truth id 0 marks unlabeled ground and
// is skipped). Rows are ground truth, columns are prediction; class_ids names
// both axes and is the sorted union of the ids seen on either side.
struct ConfusionMatrix {
    std::vector<int> class_ids;
    std::vector<std::uint64_t> counts;  // num_classes^2, row-major

    int num_classes() const { return static_cast<int>(class_ids.size()); }
    std::uint64_t& at(int truth, int pred) {
        return counts[static_cast<std::size_t>(truth) * class_ids.size() +
                      static_cast<std::size_t>(pred)];
    }
    std::uint64_t at(int truth, int pred) const {
        return counts[static_cast<std::size_t>(truth) * class_ids.size() +
                      static_cast<std::size_t>(pred)];
    }
    std::uint64_t total() const;
};

struct MetricsReport {
    std::vector<int> class_ids;
    std::vector<double> per_class;  // diagonal / row sum, 0 for an empty row
    double oa = 0.0;                // overall accuracy, trace / total
    double aa = 0.0;                // mean per-class accuracy over nonempty rows
    double kappa = 0.0;             // Cohen's kappa
};

// Tallies prediction against ground truth, ignoring unlabeled truth pixels.
ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& truth);

// Accuracy summary of a nonempty confusion matrix.
MetricsReport metrics(const ConfusionMatrix& cm);

// Human-readable table: confusion counts plus the accuracy rows.
std::string metrics_table(const ConfusionMatrix& cm, const MetricsReport& report);

// Machine-readable `key = value` lines (oa, aa, kappa, acc[c], cm[i][j]),
// doubles printed shortest-round-trip so identical runs emit identical bytes.
std::string metrics_kv(const ConfusionMatrix& cm, const MetricsReport& report);

}  // namespace hpdnet

#endif  // HPDNET_EVAL_HPP
