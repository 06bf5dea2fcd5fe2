#ifndef HPDNET_CNN_HPP
#define HPDNET_CNN_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "hpdnet/polsar_data.hpp"
#include "hpdnet/rcm.hpp"

namespace hpdnet {

// Dense rows x cols x depth tensor, depth innermost.
struct Tensor3 {
    int rows = 0;
    int cols = 0;
    int depth = 0;
    std::vector<double> v;

    Tensor3() = default;
    Tensor3(int r, int c, int d)
        : rows(r),
          cols(c),
          depth(d),
          v(static_cast<std::size_t>(r) * static_cast<std::size_t>(c) *
                static_cast<std::size_t>(d),
            0.0) {}

    std::size_t index(int r, int c, int d) const {
        return (static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) +
                static_cast<std::size_t>(c)) *
                   static_cast<std::size_t>(depth) +
               static_cast<std::size_t>(d);
    }
    double& at(int r, int c, int d) { return v[index(r, c, d)]; }
    double at(int r, int c, int d) const { return v[index(r, c, d)]; }
};

// Architecture and optimizer settings of the classifier head. Convolutions
// use odd kernels with same-size zero padding; a 2x2/stride-2 max pool runs
// after every conv layer listed in pool_after (1-based). Defaults follow the
/// reference setup: five convs (5,3,3,3,1) at widths (16,32,32,32,64), pools
// after layers 2 and 4, one 128-wide fully connected layer, Adam at 0.005
// for 400 mini-batch steps of 64.
struct CnnConfig {
    int patch_size = 13;
    std::vector<int> kernel_sizes{5, 3, 3, 3, 1};
    std::vector<int> channels{16, 32, 32, 32, 64};
    std::vector<int> pool_after{2, 4};
    int fc_width = 128;
    double learning_rate = 0.005;
    int iterations = 400;
    int batch_size = 64;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double sample_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct ConvLayer {
    int kernel = 0;
    int in_ch = 0;
    int out_ch = 0;
    std::vector<double> w;  // [ky][kx][in_ch][out_ch]
    std::vector<double> b;  // [out_ch]

    std::size_t windex(int ky, int kx, int ic, int oc) const {
        return ((static_cast<std::size_t>(ky) * static_cast<std::size_t>(kernel) +
                 static_cast<std::size_t>(kx)) *
                    static_cast<std::size_t>(in_ch) +
                static_cast<std::size_t>(ic)) *
                   static_cast<std::size_t>(out_ch) +
               static_cast<std::size_t>(oc);
    }
};

/// Trained parameters plus the bookkeeping needed to apply them: the feature
// dimension they expect and the class id attached to each output slot.
// Parameters are kept at float32 precision (stored as double) so that the
// in-memory model and its serialized form describe the same function.
struct CnnModel {
    CnnConfig cfg;
    int input_dim = 0;
    std::vector<std::uint8_t> class_ids;

    std::vector<ConvLayer> conv;
    std::vector<double> fc_w;   // [fc_in][fc_width]
    std::vector<double> fc_b;   // [fc_width]
    std::vector<double> cls_w;  // [fc_width][num_classes], bias-free classifier

    int num_classes() const { return static_cast<int>(class_ids.size()); }
};

// Per-parameter loss gradients, same shapes as the model's tensors.
struct CnnGradients {
    std::vector<ConvLayer> conv;
    std::vector<double> fc_w;
    std::vector<double> fc_b;
    std::vector<double> cls_w;
};

struct TrainReport {
    std::vector<double> step_losses;  // mean batch loss per optimizer step
    double final_train_accuracy = 0.0;
    double seconds = 0.0;
};

// patch_size x patch_size x dim window centered at (i, j); positions outside
// the field are filled by mirroring about the border (edge row/column
// included, so index -1 maps back to 0).
Tensor3 extract_patch(const FeatureField& field, int i, int j, int patch_size);

// Seeded Xavier-uniform initialization (zero biases), parameters quantized
// to float32 precision.
CnnModel init_cnn(const CnnConfig& cfg, int input_dim, std::vector<std::uint8_t> class_ids);

// Rejects an inconsistent architecture or optimizer description.
void validate_cnn_config(const CnnConfig& cfg);

// Side length of the conv-stack output (after all pooling) for this config.
int cnn_output_side(const CnnConfig& cfg);

// Class probabilities for one patch (softmax over the classifier logits).
std::vector<double> cnn_forward(const CnnModel& model, const Tensor3& patch);

// Cross-entropy of the true class, probability clamped at 1e-12.
double cnn_loss(const std::vector<double>& probs, int class_index);

// Gradients of cnn_loss(cnn_forward(model, patch), class_index) for every
// parameter.
CnnGradients cnn_backward(const CnnModel& model, const Tensor3& patch, int class_index);

// Stratified seeded subsample of the labeled pixels, then cfg.iterations
// Adam steps on mini-batches drawn from it. Deterministic for a fixed seed
// regardless of the worker budget (per-batch gradients reduce in a fixed
// chunk order).
std::pair<CnnModel, TrainReport> train_cnn(const FeatureField& field, const LabelMap& labels,
                                           const CnnConfig& cfg);

// Per-pixel argmax of the class probabilities; ties resolve to the lower
// class id. Parallel over pixels, bit-identical to the serial loop.
LabelMap classify_field(const CnnModel& model, const FeatureField& field);

}  // namespace hpdnet

#endif  // HPDNET_CNN_HPP
