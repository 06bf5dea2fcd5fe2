#ifndef HPDNET_PIPELINE_HPP
#define HPDNET_PIPELINE_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>

#include "hpdnet/cnn.hpp"
#include "hpdnet/eval.hpp"
#include "hpdnet/model_io.hpp"
#include "hpdnet/polsar_data.hpp"

namespace hpdnet {

// Settings for the train subcommand: feature-stage count, sampling, seed,
// and the classifier head. One seed drives kernel learning and training so a
// run is reproducible end to end; the kernel stages and the head sample the
// same labeled pixels.
struct PipelineConfig {
    std::uint64_t seed = 0;
    int rcm_layers = 1;             // 0 trains on raw flattened matrices
    double sample_fraction = 0.1;   // labeled pixels used per class
    CnnConfig cnn;                  // seed/sample_fraction mirrored from above
};

// `key = value` lines: seed, rcm_layers, sample_fraction, patch_size,
// iterations, learning_rate, batch_size, fc_width. Unknown keys are errors.
PipelineConfig parse_pipeline_config(std::istream& in);
PipelineConfig load_pipeline_config(const std::string& path);

// Feature field a model expects: manifold stages, or raw 9-D flattening for
// stage count 0.
FeatureField pipeline_features(const CoherencyField& field, const Model& model);

// Subcommand bodies. Each validates and computes fully before writing any
// artifact, so failures leave no partial outputs behind.

// Scene description -> coherency field with embedded ground truth.
void cmd_synth(const std::string& spec_path, const std::string& out_path);

// Labeled field -> kernel learning, feature extraction, classifier training.
// Writes the model and a deterministic text report (model_out + ".report").
TrainReport cmd_train(const std::string& data_path, const PipelineConfig& cfg,
                      const std::string& model_out);

// Field + model -> predicted label map (map_out) and its rendering
// (map_out + ".ppm").
void cmd_classify(const std::string& data_path, const std::string& model_path,
                  const std::string& map_out);

// Prediction vs ground truth -> metrics. truth_path may be a label-map file
// or any field container with embedded labels. Writes `key = value` metrics
// to report_out.
std::pair<ConfusionMatrix, MetricsReport> cmd_eval(const std::string& pred_path,
                                                   const std::string& truth_path,
                                                   const std::string& report_out);

// False-color composite of a coherency field (binary PPM).
void cmd_render(const std::string& data_path, const std::string& image_out);

}  // namespace hpdnet

#endif  // HPDNET_PIPELINE_HPP
