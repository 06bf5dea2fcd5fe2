#ifndef HPDNET_MODEL_IO_HPP
#define HPDNET_MODEL_IO_HPP

#include <string>

#include "hpdnet/cnn.hpp"
#include "hpdnet/rcm.hpp"

namespace hpdnet {

// Everything needed to classify a coherency field: the manifold feature
// stages (absent when rcm_layers is 0, meaning raw flattened features) and
// the trained classifier head.
struct Model {
    int rcm_layers = 0;  // 0 = raw 9-D features, no kernel bank
    KernelBank bank;     // empty when rcm_layers == 0
    CnnModel cnn;
};

// Binary container: magic "RCMM", version, then length-prefixed sections
// (feature-stage setup, kernel bank, classifier). Kernels and the
// rectification floor are stored at full float64; network parameters at
// float32, which is exactly the precision they carry in memory, so a load
// reproduces the saved model bitwise. Unknown sections are skipped.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace hpdnet

#endif  // HPDNET_MODEL_IO_HPP
