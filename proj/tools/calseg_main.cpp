// calseg: train and probe small segmentation networks on synthetic data.
//
// Exit codes: 0 success, 2 configuration error (bad flags, unknown keys,
// invalid values), 3 runtime failure (I/O, malformed files, training errors).

#include <cstdio>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "calseg/experiment.hpp"

namespace {

int run(int argc, char** argv) {
    CLI::App app{"synthetic segmentation-loss workbench"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"gen-data", "generate a synthetic dataset (images, masks, manifest)"},
        {"train", "train a model on a dataset and save checkpoint + trainlog"},
        {"eval", "score a checkpoint on the test split (metrics.csv, predictions)"},
        {"sweep-gamma", "train across run.gammas; sweep.csv, histograms, checkpoints"},
        {"sweep-threshold", "rescore a checkpoint across run.thresholds; overlays"},
        {"compare-losses", "train run.losses with paired seeds; significance matrices"},
        {"render-heatmap", "render a .pfm probability map to a color .ppm"},
    };
    for (const auto& [name, description] : commands) {
        CLI::App* sub = app.add_subcommand(name, description);
        sub->add_option("--config", config_path, "configuration file of 'key = value' lines");
        sub->add_option("--set", overrides, "override a single key, as KEY=VALUE");
        sub->add_option("--out", out_dir, "output directory")->required();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        calseg::ConfigMap map = config_path.empty() ? calseg::ConfigMap::defaults()
                                                    : calseg::ConfigMap::from_file(config_path);
        for (const std::string& item : overrides) {
            const std::size_t eq = item.find('=');
            if (eq == std::string::npos) {
                throw calseg::ConfigError("--set expects KEY=VALUE, got '" + item + "'");
            }
            map.set(item.substr(0, eq), item.substr(eq + 1));
        }
        calseg::ExperimentConfig cfg;
        cfg.raw = std::move(map);
        calseg::run_command(command, cfg, out_dir);
    } catch (const calseg::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
