#include "hpdnet/eval.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <string>

#include "hpdnet/errors.hpp"
#include "hpdnet/kv.hpp"

namespace hpdnet {
namespace {

std::vector<std::uint64_t> row_sums(const ConfusionMatrix& cm) {
    const int n = cm.num_classes();
    std::vector<std::uint64_t> rows(static_cast<std::size_t>(n), 0);
    for (int t = 0; t < n; ++t)
        for (int p = 0; p < n; ++p) rows[static_cast<std::size_t>(t)] += cm.at(t, p);
    return rows;
}

std::vector<std::uint64_t> col_sums(const ConfusionMatrix& cm) {
    const int n = cm.num_classes();
    std::vector<std::uint64_t> cols(static_cast<std::size_t>(n), 0);
    for (int t = 0; t < n; ++t)
        for (int p = 0; p < n; ++p) cols[static_cast<std::size_t>(p)] += cm.at(t, p);
    return cols;
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& truth) {
    if (pred.height != truth.height || pred.width != truth.width)
        throw ShapeError("prediction " + std::to_string(pred.height) + "x" +
                         std::to_string(pred.width) + " does not match ground truth " +
                         std::to_string(truth.height) + "x" + std::to_string(truth.width));

    // Union of the ids seen in truth (excluding 0) and in the predictions at
    // those pixels; a stray prediction id gets its own empty-truth row so no
    // pixel silently drops out of the tally.
    std::array<bool, 256> seen{};
    for (std::size_t i = 0; i < truth.labels.size(); ++i) {
        if (truth.labels[i] == 0) continue;
        seen[truth.labels[i]] = true;
        seen[pred.labels[i]] = true;
    }
    ConfusionMatrix cm;
    std::array<int, 256> index{};
    index.fill(-1);
    for (int id = 0; id < 256; ++id)
        if (seen[static_cast<std::size_t>(id)]) {
            index[static_cast<std::size_t>(id)] = cm.num_classes();
            cm.class_ids.push_back(id);
        }
    cm.counts.assign(static_cast<std::size_t>(cm.num_classes()) * cm.num_classes(), 0);
    for (std::size_t i = 0; i < truth.labels.size(); ++i) {
        if (truth.labels[i] == 0) continue;
        cm.at(index[truth.labels[i]], index[pred.labels[i]]) += 1;
    }
    return cm;
}

MetricsReport metrics(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) throw EmptyInput("confusion matrix: no labeled pixels to evaluate");

    const int n = cm.num_classes();
    const auto rows = row_sums(cm);
    const auto cols = col_sums(cm);
    const double tot = static_cast<double>(total);

    MetricsReport r;
    r.class_ids = cm.class_ids;
    r.per_class.assign(static_cast<std::size_t>(n), 0.0);

    std::uint64_t trace = 0;
    double aa_sum = 0.0;
    int nonempty = 0;
    double pe = 0.0;
    for (int c = 0; c < n; ++c) {
        trace += cm.at(c, c);
        const std::uint64_t row = rows[static_cast<std::size_t>(c)];
        if (row > 0) {
            r.per_class[static_cast<std::size_t>(c)] =
                static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
            aa_sum += r.per_class[static_cast<std::size_t>(c)];
            ++nonempty;
        }
        pe += (static_cast<double>(row) / tot) *
              (static_cast<double>(cols[static_cast<std::size_t>(c)]) / tot);
    }
    r.oa = static_cast<double>(trace) / tot;
    r.aa = nonempty > 0 ? aa_sum / nonempty : 0.0;
    // Cohen's kappa. pe = 1 only when a single row and a single column carry
    // all mass; agreement is then all-or-nothing and the 0/0 limit is taken
    // as 1 for perfect agreement, 0 otherwise.
    r.kappa = pe < 1.0 ? (r.oa - pe) / (1.0 - pe) : (r.oa == 1.0 ? 1.0 : 0.0);
    return r;
}

std::string metrics_table(const ConfusionMatrix& cm, const MetricsReport& report) {
    std::ostringstream out;
    const int n = cm.num_classes();
    out << "confusion (rows = truth, cols = prediction)\n";
    out << "        ";
    for (int p = 0; p < n; ++p)
        out << " c" << cm.class_ids[static_cast<std::size_t>(p)] << "\t";
    out << "\n";
    for (int t = 0; t < n; ++t) {
        out << "  c" << cm.class_ids[static_cast<std::size_t>(t)] << "   ";
        for (int p = 0; p < n; ++p) out << " " << cm.at(t, p) << "\t";
        out << "\n";
    }
    out << "per-class accuracy\n";
    for (int c = 0; c < n; ++c)
        out << "  c" << report.class_ids[static_cast<std::size_t>(c)] << "   "
            << report.per_class[static_cast<std::size_t>(c)] << "\n";
    out << "oa    " << report.oa << "\n";
    out << "aa    " << report.aa << "\n";
    out << "kappa " << report.kappa << "\n";
    return out.str();
}

std::string metrics_kv(const ConfusionMatrix& cm, const MetricsReport& report) {
    std::ostringstream out;
    out << "oa = " << kv_format(report.oa) << "\n";
    out << "aa = " << kv_format(report.aa) << "\n";
    out << "kappa = " << kv_format(report.kappa) << "\n";
    const int n = cm.num_classes();
    for (int c = 0; c < n; ++c)
        out << "acc[" << report.class_ids[static_cast<std::size_t>(c)]
            << "] = " << kv_format(report.per_class[static_cast<std::size_t>(c)]) << "\n";
    for (int t = 0; t < n; ++t)
        for (int p = 0; p < n; ++p)
            out << "cm[" << cm.class_ids[static_cast<std::size_t>(t)] << "]["
                << cm.class_ids[static_cast<std::size_t>(p)] << "] = " << cm.at(t, p) << "\n";
    return out.str();
}

}  // namespace hpdnet
