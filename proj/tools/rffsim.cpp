#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "rff/harness.hpp"

namespace {

rff::ExperimentConfig load_config(const std::string& config_path, const std::string& out_dir) {
    rff::ExperimentConfig cfg = rff::default_experiment_config();
    if (!config_path.empty())
        cfg = rff::config_from_json(rff::json::parse(rff::read_text_file(config_path)));
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RF fingerprinting under adversarial perturbations: simulation and analysis"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    const std::vector<std::string> stages{"generate", "train",  "attack", "sweep",
                                          "verify-theorem", "explain", "report", "run"};
    for (const std::string& stage : stages) {
        CLI::App* sub = app.add_subcommand(
            stage, stage == "run" ? "run every stage" : "run the pipeline through '" + stage + "'");
        sub->add_option("--config", config_path, "experiment config JSON");
        sub->add_option("--out", out_dir, "output directory (overrides config)");
    }
    CLI::App* show = app.add_subcommand("default-config", "print the default experiment config");
    (void)show;

    CLI11_PARSE(app, argc, argv);

    try {
        const std::string verb = app.get_subcommands().front()->get_name();
        if (verb == "default-config") {
            std::cout << rff::config_to_json(rff::default_experiment_config()).dump(2) << "\n";
            return 0;
        }
        return rff::run_stage_command(verb, load_config(config_path, out_dir));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
