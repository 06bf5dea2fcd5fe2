// Command-line front end: scene synthesis, training, classification,
// evaluation and rendering as batch subcommands over the pipeline library.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "hpdnet/errors.hpp"
#include "hpdnet/eval.hpp"
#include "hpdnet/pipeline.hpp"

namespace {

// 0 success, 2 usage/config error, 3 data or file-format error, 4 numerical
// failure — stable codes so scripts can triage failures.
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

}  // namespace

int main(int argc, char** argv) {
    using namespace hpdnet;

    CLI::App app{"PolSAR classification on the manifold of 3x3 Hermitian "
                 "positive-definite coherency matrices"};
    app.require_subcommand(1);

    std::string spec_path, synth_out;
    CLI::App* synth =
        app.add_subcommand("synth", "Generate a labeled synthetic scene from a spec file");
    synth->add_option("spec", spec_path, "Scene description (key = value text)")->required();
    synth->add_option("out", synth_out, "Output field file")->required();

    std::string train_data, model_out, config_path;
    std::uint64_t seed = 0;
    int rcm_layers = 0, patch_size = 0, iterations = 0;
    double sample_fraction = 0.0, learning_rate = 0.0;
    CLI::App* train = app.add_subcommand("train", "Learn kernels and train the classifier");
    train->add_option("data", train_data, "Labeled field file")->required();
    train->add_option("model", model_out, "Output model file")->required();
    CLI::Option* opt_config =
        train->add_option("--config", config_path, "Config file of key = value lines");
    CLI::Option* opt_seed = train->add_option("--seed", seed, "Master random seed");
    CLI::Option* opt_layers =
        train->add_option("--rcm-layers", rcm_layers, "Manifold stages (0 bypasses them)");
    CLI::Option* opt_fraction = train->add_option("--sample-fraction", sample_fraction,
                                                  "Per-class training sample fraction");
    CLI::Option* opt_patch = train->add_option("--patch-size", patch_size, "Square patch side");
    CLI::Option* opt_iters = train->add_option("--iterations", iterations, "Training steps");
    CLI::Option* opt_lr = train->add_option("--lr", learning_rate, "Adam learning rate");

    std::string classify_data, classify_model, map_out;
    CLI::App* classify = app.add_subcommand("classify", "Classify a field with a trained model");
    classify->add_option("data", classify_data, "Field file")->required();
    classify->add_option("model", classify_model, "Model file")->required();
    classify->add_option("map", map_out, "Output label map (a rendered .ppm is written too)")
        ->required();

    std::string pred_path, truth_path, report_out;
    CLI::App* eval = app.add_subcommand("eval", "Score a predicted map against ground truth");
    eval->add_option("pred", pred_path, "Predicted label map or labeled field")->required();
    eval->add_option("truth", truth_path, "Ground-truth label map or labeled field")->required();
    eval->add_option("report", report_out, "Metrics report path (default: <pred>.metrics)");

    std::string render_data, image_out;
    CLI::App* render = app.add_subcommand("render", "Render a field as a Pauli RGB image");
    render->add_option("data", render_data, "Field file")->required();
    render->add_option("image", image_out, "Output PPM image")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*synth) {
            cmd_synth(spec_path, synth_out);
            std::cout << "wrote " << synth_out << "\n";
        } else if (*train) {
            PipelineConfig cfg;
            if (opt_config->count() > 0) cfg = load_pipeline_config(config_path);
            if (opt_seed->count() > 0) cfg.seed = seed;
            if (opt_layers->count() > 0) cfg.rcm_layers = rcm_layers;
            if (opt_fraction->count() > 0) cfg.sample_fraction = sample_fraction;
            if (opt_patch->count() > 0) cfg.cnn.patch_size = patch_size;
            if (opt_iters->count() > 0) cfg.cnn.iterations = iterations;
            if (opt_lr->count() > 0) cfg.cnn.learning_rate = learning_rate;

            const TrainReport report = cmd_train(train_data, cfg, model_out);
            std::cout << "trained " << report.step_losses.size() << " steps in "
                      << report.seconds << " s, final training accuracy "
                      << report.final_train_accuracy << "\n";
            std::cout << "wrote " << model_out << " and " << model_out << ".report\n";
        } else if (*classify) {
            cmd_classify(classify_data, classify_model, map_out);
            std::cout << "wrote " << map_out << " and " << map_out << ".ppm\n";
        } else if (*eval) {
            if (report_out.empty()) report_out = pred_path + ".metrics";
            const auto [cm, metrics_out] = cmd_eval(pred_path, truth_path, report_out);
            std::cout << metrics_table(cm, metrics_out);
            std::cout << "wrote " << report_out << "\n";
        } else if (*render) {
            cmd_render(render_data, image_out);
            std::cout << "wrote " << image_out << "\n";
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitData;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitData;
    } catch (const ShapeError& e) {
        std::cerr << "shape error: " << e.what() << "\n";
        return kExitData;
    } catch (const NoLabels& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const Error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}
