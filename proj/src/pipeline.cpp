#include "hpdnet/pipeline.hpp"

#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include "hpdnet/errors.hpp"
#include "hpdnet/kernel_learning.hpp"
#include "hpdnet/kv.hpp"
#include "hpdnet/rcm.hpp"

namespace hpdnet {
namespace {

LabelMap load_labels_any(const std::string& path) {
    {
        std::ifstream probe(path, std::ios::binary);
        if (!probe) throw IoError("cannot open " + path + " for reading");
        char magic[4] = {};
        probe.read(magic, 4);
        if (probe.gcount() == 4 && std::string(magic, 4) == "LMAP")
            return load_label_map(path);
    }
    auto [field, labels] = load_any_field(path);
    if (!labels) throw FormatError(path + ": carries no label map", 0);
    return std::move(*labels);
}

}  // namespace

PipelineConfig parse_pipeline_config(std::istream& in) {
    PipelineConfig cfg;
    for (const KvEntry& e : parse_kv(in)) {
        if (e.key == "seed")
            cfg.seed = kv_u64(e);
        else if (e.key == "rcm_layers")
            cfg.rcm_layers = static_cast<int>(kv_int(e));
        else if (e.key == "sample_fraction")
            cfg.sample_fraction = kv_double(e);
        else if (e.key == "patch_size")
            cfg.cnn.patch_size = static_cast<int>(kv_int(e));
        else if (e.key == "iterations")
            cfg.cnn.iterations = static_cast<int>(kv_int(e));
        else if (e.key == "learning_rate")
            cfg.cnn.learning_rate = kv_double(e);
        else if (e.key == "batch_size")
            cfg.cnn.batch_size = static_cast<int>(kv_int(e));
        else if (e.key == "fc_width")
            cfg.cnn.fc_width = static_cast<int>(kv_int(e));
        else
            throw ConfigError("unknown key \"" + e.key + "\"", e.line);
    }
    return cfg;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    return parse_pipeline_config(in);
}

FeatureField pipeline_features(const CoherencyField& field, const Model& model) {
    if (model.rcm_layers == 0) return raw_feature_field(field);
    return rcm_forward_field(field, model.bank, rcm_config_for(model.bank));
}

void cmd_synth(const std::string& spec_path, const std::string& out_path) {
    const SyntheticSceneSpec spec = parse_scene_spec_file(spec_path);
    const auto [field, labels] = generate_synthetic_scene(spec);
    save_field(field, &labels, out_path);
}

TrainReport cmd_train(const std::string& data_path, const PipelineConfig& cfg,
                      const std::string& model_out) {
    if (cfg.rcm_layers < 0) throw ConfigError("rcm_layers must be nonnegative");
    auto [field, labels] = load_any_field(data_path);
    if (!labels) throw NoLabels(data_path + ": training needs a labeled field");

    Model model;
    model.rcm_layers = cfg.rcm_layers;
    CnnConfig head = cfg.cnn;
    head.seed = cfg.seed;
    head.sample_fraction = cfg.sample_fraction;
    validate_cnn_config(head);

    FeatureField features;
    if (cfg.rcm_layers > 0) {
        model.bank = learn_kernel_bank(field, *labels, cfg.sample_fraction, cfg.seed,
                                       cfg.rcm_layers);
        features = rcm_forward_field(field, model.bank, rcm_config_for(model.bank));
    } else {
        features = raw_feature_field(field);
    }

    auto [cnn, report] = train_cnn(features, *labels, head);
    model.cnn = std::move(cnn);

    save_model(model, model_out);

    // Deterministic companion report: losses and accuracy, no wall-clock.
    std::ostringstream text;
    text << "iterations = " << report.step_losses.size() << "\n";
    text << "final_train_accuracy = " << kv_format(report.final_train_accuracy) << "\n";
    for (std::size_t i = 0; i < report.step_losses.size(); ++i)
        text << "loss[" << i << "] = " << kv_format(report.step_losses[i]) << "\n";
    std::ofstream out(model_out + ".report", std::ios::trunc);
    if (!out) throw IoError("cannot open " + model_out + ".report for writing");
    out << text.str();
    if (!out) throw IoError(model_out + ".report: write failed");
    return report;
}

void cmd_classify(const std::string& data_path, const std::string& model_path,
                  const std::string& map_out) {
    const Model model = load_model(model_path);
    auto [field, labels] = load_any_field(data_path);
    const FeatureField features = pipeline_features(field, model);
    const LabelMap pred = classify_field(model.cnn, features);
    save_label_map(pred, map_out);
    render_label_map(pred, map_out + ".ppm");
}

std::pair<ConfusionMatrix, MetricsReport> cmd_eval(const std::string& pred_path,
                                                   const std::string& truth_path,
                                                   const std::string& report_out) {
    const LabelMap pred = load_labels_any(pred_path);
    const LabelMap truth = load_labels_any(truth_path);
    const ConfusionMatrix cm = confusion(pred, truth);
    const MetricsReport report = metrics(cm);

    std::ofstream out(report_out, std::ios::trunc);
    if (!out) throw IoError("cannot open " + report_out + " for writing");
    out << metrics_kv(cm, report);
    if (!out) throw IoError(report_out + ": write failed");
    return {cm, report};
}

void cmd_render(const std::string& data_path, const std::string& image_out) {
    const auto [field, labels] = load_any_field(data_path);
    render_pauli_rgb(field, image_out);
}

}  // namespace hpdnet
