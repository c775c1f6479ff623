// swarmtune: synthesize logs, prepare supervised sets, tune topologies, and
// compare search methods.

#include "swarmtune/experiment.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace swarmtune;

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("swarmtune");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
    spdlog::level::level_enum level = spdlog::level::info;
    if (const char* env = std::getenv("SWARMTUNE_LOG"); env && *env)
        level = spdlog::level::from_str(env);
    spdlog::set_level(level);
}

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::size_t workers = 1;
};

experiment::ExperimentConfig resolve_config(const CommonOptions& opts) {
    experiment::ExperimentConfig config;
    if (!opts.config_path.empty()) config = experiment::load_config(opts.config_path);
    if (opts.seed) config.seed = *opts.seed;
    if (!opts.out_dir.empty()) config.output_dir = opts.out_dir;
    config.validate();
    return config;
}

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_workers) {
    cmd->add_option("--config", opts.config_path, "Experiment config (JSON)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", opts.seed, "Override the experiment seed");
    cmd->add_option("--out", opts.out_dir, "Output directory (overrides config)");
    if (with_workers)
        cmd->add_option("--workers", opts.workers, "Parallel fitness evaluations")
            ->check(CLI::Range(std::size_t{1}, std::size_t{1024}));
}

} // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Neural network topology tuning with particle swarm optimization and grid search"};
    app.require_subcommand(1);

    CommonOptions synth_opts, prepare_opts, tune_opts, compare_opts;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic Wi-Fi connection log");
    add_common(synth, synth_opts, false);

    auto* prepare = app.add_subcommand("prepare", "Build per-day supervised sets from a connection log");
    add_common(prepare, prepare_opts, false);
    std::string prepare_input;
    std::vector<int> prepare_horizons;
    prepare->add_option("--input", prepare_input, "Connection-log CSV (default: config dataset)")
        ->check(CLI::ExistingFile);
    prepare->add_option("--horizon", prepare_horizons, "Prediction horizon(s) in minutes")
        ->check(CLI::IsMember({15, 30, 60}));

    auto* tune = app.add_subcommand("tune", "Search network topologies");
    add_common(tune, tune_opts, true);
    std::string method_name = "pso";
    std::optional<int> tune_horizon;
    tune->add_option("--method", method_name, "Search method")->check(CLI::IsMember({"pso", "grid"}));
    tune->add_option("--horizon", tune_horizon, "Restrict to one horizon")->check(CLI::IsMember({15, 30, 60}));

    auto* compare = app.add_subcommand("compare", "Compare PSO and grid results");
    add_common(compare, compare_opts, false);
    std::vector<std::string> result_files;
    compare->add_option("results", result_files, "tune_*.json files")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const auto config = resolve_config(synth_opts);
            experiment::write_synth_output(config.output_dir, config);
        } else if (*prepare) {
            auto config = resolve_config(prepare_opts);
            if (!prepare_input.empty()) config.dataset.path = prepare_input;
            const auto horizons = prepare_horizons.empty() ? config.horizons : prepare_horizons;
            experiment::write_prepare_outputs(config.output_dir, experiment::load_records(config), horizons,
                                              config.bucket_minutes);
        } else if (*tune) {
            auto config = resolve_config(tune_opts);
            if (tune_horizon) config.horizons = {*tune_horizon};
            config.validate();
            const auto method = search::method_from_string(method_name);
            const auto records = experiment::run_tune(config, method, tune_opts.workers);
            experiment::write_tune_outputs(config.output_dir, config, method, records);
        } else if (*compare) {
            const auto config = resolve_config(compare_opts);
            std::vector<experiment::LoadedResult> results;
            for (const auto& file : result_files) {
                auto loaded = experiment::read_tune_document(file);
                results.insert(results.end(), loaded.begin(), loaded.end());
            }
            experiment::write_compare_outputs(config.output_dir, results);
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
