#ifndef SWARMTUNE_EXPERIMENT_HPP
#define SWARMTUNE_EXPERIMENT_HPP

#include "swarmtune/data.hpp"
#include "swarmtune/fitness.hpp"
#include "swarmtune/mlp.hpp"
#include "swarmtune/pso.hpp"
#include "swarmtune/search.hpp"
#include "swarmtune/topology.hpp"

#include <json.hpp>

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

/// Experiment configuration and the pipelines behind the CLI subcommands.
namespace swarmtune::experiment {

inline constexpr int kSchemaVersion = 1;

struct DatasetSource {
    /// Connection-log CSV; when unset the synthetic generator is used.
    std::optional<std::filesystem::path> path;
    data::SynthConfig synth;
    /// Synth seed; derived from the experiment seed when unset.
    std::optional<std::uint64_t> synth_seed;
};

struct ExperimentConfig {
    std::uint64_t seed = 42;
    DatasetSource dataset;
    /// C-encoded days to model, Saturday through Friday by default.
    std::vector<unsigned> days{6, 0, 1, 2, 3, 4, 5};
    std::vector<int> horizons{60, 30, 15};
    int bucket_minutes = 15;
    fitness::ToleranceWindow window{20};
    std::vector<pso::SwarmConfig> swarms{pso::SwarmConfig{}};
    TopologySpace space;
    search::GridSpec grid = search::GridSpec::standard();
    mlp::TrainConfig train;
    mlp::Activation activation = mlp::Activation::relu;
    std::filesystem::path output_dir = "out";

    void validate() const;
    data::SynthConfig effective_synth() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Reads the configured CSV or generates the synthetic log.
std::vector<data::ConnectionRecord> load_records(const ExperimentConfig& config);

/// One day-of-week model at one horizon.
struct Task {
    unsigned day;
    int horizon_minutes;
    data::SupervisedSet train;
    data::SupervisedSet test;
};

/// Occupancy series per day-of-week part of a connection log. The location
/// list and week anchor cover the whole log so every day shares them.
struct DayLog {
    std::vector<data::LocationKey> locations;
    data::Timestamp anchor{};
    int bucket_minutes = 15;
    std::array<std::vector<data::OccupancySeries>, 7> series;
};

DayLog index_days(const std::vector<data::ConnectionRecord>& records, int bucket_minutes);

/// Windows one day's series at the horizon and splits weeks 1-5 / week 6.
Task build_task(const DayLog& log, unsigned day, int horizon_minutes);

struct TuneRecord {
    std::string dataset;  ///< day name
    int horizon_minutes = 0;
    std::size_t population = 0;  ///< 0 for grid search
    search::SearchResult result;
    std::vector<fitness::LogEvent> log;
    std::vector<fitness::CacheEntry> entries;
};

std::uint64_t task_seed(std::uint64_t seed, unsigned day, int horizon_minutes);

/// Runs one search method for every configured day and horizon (and every
/// swarm size for PSO). Output depends only on config and seed, not on
/// `workers`.
std::vector<TuneRecord> run_tune(const ExperimentConfig& config, search::Method method,
                                 std::size_t workers);

/// Single task entry point shared by run_tune and the acceptance suite.
TuneRecord tune_task(const ExperimentConfig& config, const Task& task, search::Method method,
                     const pso::SwarmConfig* swarm, std::size_t workers);

/// File names under the output directory.
std::filesystem::path tune_json_name(search::Method method);
std::filesystem::path eval_log_name(search::Method method);
std::filesystem::path timing_name(search::Method method);

nlohmann::json tune_document(const ExperimentConfig& config, search::Method method,
                             const std::vector<TuneRecord>& records);

/// tune_<method>.json and evals_<method>.csv are deterministic;
/// timing_<method>.csv and wall_<method>.csv carry wall-clock measurements.
void write_tune_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                        search::Method method, const std::vector<TuneRecord>& records);

struct LoadedResult {
    std::string dataset;
    int horizon_minutes;
    std::size_t population;
    search::SearchResult result;
};

std::vector<LoadedResult> read_tune_document(const std::filesystem::path& path);

/// Pairs grid results with the smallest-swarm PSO result per dataset and
/// horizon.
std::vector<search::ComparisonRow> build_comparison(const std::vector<LoadedResult>& results);

/// comparison.csv, accuracy_vs_model.csv, configurations_vs_model.csv and
/// swarm_sizes.csv.
void write_compare_outputs(const std::filesystem::path& dir, const std::vector<LoadedResult>& results);

void write_synth_output(const std::filesystem::path& dir, const ExperimentConfig& config);
/// series.csv, datasets.csv (records and rows per day) and
/// supervised_<day>_h<horizon>.csv for every day and horizon.
void write_prepare_outputs(const std::filesystem::path& dir,
                           const std::vector<data::ConnectionRecord>& records,
                           const std::vector<int>& horizons, int bucket_minutes);

/// Writes through `<path>.partial` and renames on success; the partial file is
/// removed if `write` throws.
template <typename Fn>
void write_atomically(const std::filesystem::path& path, Fn&& write) {
    std::filesystem::path partial = path;
    partial += ".partial";
    try {
        write(partial);
        std::filesystem::rename(partial, path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(partial, ec);
        throw;
    }
}

} // namespace swarmtune::experiment

#endif // SWARMTUNE_EXPERIMENT_HPP
