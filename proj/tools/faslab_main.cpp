// Batch experiment runner: validates configs, executes named pipelines, and
// emits reports, CSV tables, PGM heatmaps and a hashed output manifest.

#include <iostream>
#include <string>

#include "faslab/experiments.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
    CLI::App app{"faslab - wave scattering and rigidity experiment runner"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    int jobs = 1;
    bool allow_short_horizon = false;

    CLI::App* run = app.add_subcommand("run", "execute a pipeline from a config file");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    run->add_option("--out", out_dir, "output directory (overrides config 'out')");
    run->add_option("--jobs", jobs, "worker thread cap");
    run->add_flag("--allow-short-horizon", allow_short_horizon,
                  "downgrade the T horizon constraint to a warning");

    CLI::App* validate = app.add_subcommand("validate", "check a config without executing");
    validate->add_option("--config", config_path, "experiment config (JSON)")->required();
    validate->add_flag("--allow-short-horizon", allow_short_horizon,
                       "downgrade the T horizon constraint to a warning");

    std::string manifest_a, manifest_b;
    CLI::App* compare = app.add_subcommand("compare", "diff two run manifests");
    compare->add_option("manifest_a", manifest_a, "first manifest.json")->required();
    compare->add_option("manifest_b", manifest_b, "second manifest.json")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const auto cfg = nlohmann::json::parse(faslab::read_text_file(config_path));
            const int code = faslab::run_experiment(cfg, out_dir, allow_short_horizon, jobs);
            if (code == 0)
                std::cout << "run complete\n";
            else
                std::cout << "run complete with rigidity-check failure witness\n";
            return code;
        }
        if (validate->parsed()) {
            const auto cfg = nlohmann::json::parse(faslab::read_text_file(config_path));
            const auto rep = faslab::validate_experiment(cfg, allow_short_horizon);
            std::cout << rep.to_text();
            return rep.ok ? 0 : 1;
        }
        const auto rep = faslab::compare_runs(manifest_a, manifest_b);
        std::cout << rep.to_text();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
