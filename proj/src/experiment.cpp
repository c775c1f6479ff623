#include "swarmtune/experiment.hpp"

#include "swarmtune/rng.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

namespace swarmtune::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view coefficient_mode_name(pso::CoefficientMode m) {
    return m == pso::CoefficientMode::fixed ? "fixed" : "sampled_once";
}

pso::CoefficientMode coefficient_mode_from(std::string_view s) {
    if (s == "fixed") return pso::CoefficientMode::fixed;
    if (s == "sampled_once") return pso::CoefficientMode::sampled_once;
    throw std::invalid_argument(fmt::format("unknown coefficient_mode '{}'", s));
}

std::string_view velocity_rule_name(pso::VelocityRule r) {
    return r == pso::VelocityRule::standard ? "standard" : "velocity_difference";
}

pso::VelocityRule velocity_rule_from(std::string_view s) {
    if (s == "standard") return pso::VelocityRule::standard;
    if (s == "velocity_difference") return pso::VelocityRule::velocity_difference;
    throw std::invalid_argument(fmt::format("unknown velocity_rule '{}'", s));
}

json swarm_to_json(const pso::SwarmConfig& s) {
    return {{"population_size", s.population_size},
            {"max_iterations", s.max_iterations},
            {"c1", s.c1},
            {"c2", s.c2},
            {"w", s.w},
            {"coefficient_mode", coefficient_mode_name(s.coefficient_mode)},
            {"velocity_clamp_fraction", s.velocity_clamp_fraction},
            {"velocity_rule", velocity_rule_name(s.velocity_rule)},
            {"early_stop", s.early_stop},
            {"early_stop_epsilon", s.early_stop_epsilon}};
}

pso::SwarmConfig swarm_from_json(const json& j) {
    pso::SwarmConfig s;
    s.population_size = j.value("population_size", s.population_size);
    s.max_iterations = j.value("max_iterations", s.max_iterations);
    s.c1 = j.value("c1", s.c1);
    s.c2 = j.value("c2", s.c2);
    s.w = j.value("w", s.w);
    s.coefficient_mode =
        coefficient_mode_from(j.value("coefficient_mode", std::string(coefficient_mode_name(s.coefficient_mode))));
    s.velocity_clamp_fraction = j.value("velocity_clamp_fraction", s.velocity_clamp_fraction);
    s.velocity_rule = velocity_rule_from(j.value("velocity_rule", std::string(velocity_rule_name(s.velocity_rule))));
    s.early_stop = j.value("early_stop", s.early_stop);
    s.early_stop_epsilon = j.value("early_stop_epsilon", s.early_stop_epsilon);
    return s;
}

std::string day_list_name(unsigned day) { return std::string(data::day_name(day)); }

void write_text(const fs::path& path, const std::string& text) {
    write_atomically(path, [&](const fs::path& tmp) {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", tmp.string()));
        out << text;
        if (!out.flush()) throw std::runtime_error(fmt::format("write to '{}' failed", tmp.string()));
    });
}

std::string format_double(double x) { return fmt::format("{}", x); }

} // namespace

void ExperimentConfig::validate() const {
    if (days.empty()) throw std::invalid_argument("config lists no days");
    for (unsigned d : days)
        if (d > 6) throw std::invalid_argument(fmt::format("bad day index {}", d));
    if (horizons.empty()) throw std::invalid_argument("config lists no horizons");
    if (bucket_minutes <= 0 || 60 % bucket_minutes != 0)
        throw std::invalid_argument("bucket_minutes must divide 60");
    for (int h : horizons)
        if (h <= 0 || h % bucket_minutes != 0)
            throw std::invalid_argument(fmt::format("horizon {} is not a multiple of the bucket width", h));
    if (window.n < 0) throw std::invalid_argument("window must be >= 0");
    if (swarms.empty()) throw std::invalid_argument("config lists no swarm settings");
    for (const auto& s : swarms) s.validate();
    space.validate();
    grid.validate(space);
    train.validate();
    if (!dataset.path) dataset.synth.validate();
}

data::SynthConfig ExperimentConfig::effective_synth() const {
    data::SynthConfig s = dataset.synth;
    s.seed = dataset.synth_seed.value_or(derive_seed(seed, 0x5717));
    return s;
}

ExperimentConfig config_from_json(const json& j) {
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion)
        throw std::invalid_argument(fmt::format("unsupported schema_version {}", version));

    ExperimentConfig c;
    c.seed = j.value("seed", c.seed);
    if (const auto it = j.find("dataset"); it != j.end()) {
        if (it->contains("path") && !it->at("path").is_null())
            c.dataset.path = it->at("path").get<std::string>();
        if (const auto sit = it->find("synth"); sit != it->end()) {
            auto& s = c.dataset.synth;
            s.n_buildings = sit->value("n_buildings", s.n_buildings);
            s.aps_per_building = sit->value("aps_per_building", s.aps_per_building);
            s.weeks = sit->value("weeks", s.weeks);
            s.base_rate = sit->value("base_rate", s.base_rate);
            s.start_date = sit->value("start_date", s.start_date);
            if (sit->contains("seed") && !sit->at("seed").is_null())
                c.dataset.synth_seed = sit->at("seed").get<std::uint64_t>();
        }
    }
    if (const auto it = j.find("days"); it != j.end()) {
        c.days.clear();
        for (const auto& d : *it) {
            const auto day = data::day_from_name(d.get<std::string>());
            if (!day) throw std::invalid_argument(fmt::format("unknown day '{}'", d.get<std::string>()));
            c.days.push_back(*day);
        }
    }
    c.horizons = j.value("horizons", c.horizons);
    c.bucket_minutes = j.value("bucket_minutes", c.bucket_minutes);
    c.window.n = j.value("window", c.window.n);
    if (const auto it = j.find("swarms"); it != j.end()) {
        c.swarms.clear();
        for (const auto& s : *it) c.swarms.push_back(swarm_from_json(s));
    }
    if (const auto it = j.find("space"); it != j.end()) {
        c.space.min_layers = it->value("min_layers", c.space.min_layers);
        c.space.max_layers = it->value("max_layers", c.space.max_layers);
        c.space.min_neurons = it->value("min_neurons", c.space.min_neurons);
        c.space.max_neurons = it->value("max_neurons", c.space.max_neurons);
    }
    if (const auto it = j.find("grid"); it != j.end()) {
        c.grid.layer_values = it->value("layers", c.grid.layer_values);
        c.grid.neuron_values = it->value("neurons", c.grid.neuron_values);
    }
    if (const auto it = j.find("train"); it != j.end()) {
        c.train.learning_rate = it->value("learning_rate", c.train.learning_rate);
        c.train.epochs = it->value("epochs", c.train.epochs);
        c.train.batch_size = it->value("batch_size", c.train.batch_size);
        c.activation = mlp::activation_from_string(it->value("activation", std::string("relu")));
    }
    c.output_dir = j.value("output_dir", c.output_dir.string());
    c.validate();
    return c;
}

json to_json(const ExperimentConfig& c) {
    json dataset = json::object();
    dataset["path"] = c.dataset.path ? json(c.dataset.path->string()) : json(nullptr);
    dataset["synth"] = {{"n_buildings", c.dataset.synth.n_buildings},
                        {"aps_per_building", c.dataset.synth.aps_per_building},
                        {"weeks", c.dataset.synth.weeks},
                        {"base_rate", c.dataset.synth.base_rate},
                        {"start_date", c.dataset.synth.start_date},
                        {"seed", c.dataset.synth_seed ? json(*c.dataset.synth_seed) : json(nullptr)}};
    json days = json::array();
    for (unsigned d : c.days) days.push_back(day_list_name(d));
    json swarms = json::array();
    for (const auto& s : c.swarms) swarms.push_back(swarm_to_json(s));
    return {{"schema_version", kSchemaVersion},
            {"seed", c.seed},
            {"dataset", dataset},
            {"days", days},
            {"horizons", c.horizons},
            {"bucket_minutes", c.bucket_minutes},
            {"window", c.window.n},
            {"swarms", swarms},
            {"space",
             {{"min_layers", c.space.min_layers},
              {"max_layers", c.space.max_layers},
              {"min_neurons", c.space.min_neurons},
              {"max_neurons", c.space.max_neurons}}},
            {"grid", {{"layers", c.grid.layer_values}, {"neurons", c.grid.neuron_values}}},
            {"train",
             {{"learning_rate", c.train.learning_rate},
              {"epochs", c.train.epochs},
              {"batch_size", c.train.batch_size},
              {"activation", mlp::to_string(c.activation)}}},
            {"output_dir", c.output_dir.string()}};
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot open config '{}'", path.string()));
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(fmt::format("config '{}': {}", path.string(), e.what()));
    }
    return config_from_json(j);
}

std::vector<data::ConnectionRecord> load_records(const ExperimentConfig& config) {
    if (config.dataset.path) {
        auto ingested = data::ingest_csv(*config.dataset.path);
        for (const auto& s : ingested.skipped)
            spdlog::warn("{}:{}: skipped ({})", config.dataset.path->string(), s.line, s.reason);
        spdlog::info("ingested {} records ({} skipped)", ingested.records.size(), ingested.skipped.size());
        return std::move(ingested.records);
    }
    auto records = data::synth_generate(config.effective_synth());
    spdlog::info("generated {} synthetic records", records.size());
    return records;
}

DayLog index_days(const std::vector<data::ConnectionRecord>& records, int bucket_minutes) {
    if (records.empty()) throw data::DataError("no connection records");
    DayLog log;
    log.bucket_minutes = bucket_minutes;
    std::set<data::LocationKey> locations;
    data::Timestamp first = records.front().timestamp;
    for (const auto& r : records) {
        locations.insert({r.building, r.ap_id});
        first = std::min(first, r.timestamp);
    }
    log.locations.assign(locations.begin(), locations.end());
    log.anchor = data::Timestamp{std::chrono::floor<std::chrono::days>(first)};

    auto parts = data::split_by_day_of_week(records);
    for (unsigned d = 0; d < 7; ++d) {
        log.series[d] = data::bucket_counts(parts[d], bucket_minutes);
        parts[d] = {};
    }
    return log;
}

Task build_task(const DayLog& log, unsigned day, int horizon_minutes) {
    auto set = data::build_supervised(log.series.at(day), horizon_minutes, log.locations);
    set.anchor = log.anchor;
    auto [train, test] = data::split_train_test(set, data::SplitSpec{day, 5, 5});
    return {day, horizon_minutes, std::move(train), std::move(test)};
}

std::uint64_t task_seed(std::uint64_t seed, unsigned day, int horizon_minutes) {
    return derive_seed(seed, day, static_cast<std::uint64_t>(horizon_minutes));
}

TuneRecord tune_task(const ExperimentConfig& config, const Task& task, search::Method method,
                     const pso::SwarmConfig* swarm, std::size_t workers) {
    const std::uint64_t seed = task_seed(config.seed, task.day, task.horizon_minutes);
    auto prepared = std::make_shared<const fitness::PreparedData>(fitness::prepare(task.train, task.test));
    fitness::ModelSettings settings{config.train, config.activation, config.window, seed};
    fitness::ModelEvaluator evaluator(prepared, settings, workers);

    TuneRecord record;
    record.dataset = day_list_name(task.day);
    record.horizon_minutes = task.horizon_minutes;
    if (method == search::Method::grid) {
        record.result = search::grid_search(config.grid, evaluator);
    } else {
        if (!swarm) throw std::invalid_argument("PSO tuning needs swarm settings");
        pso::SwarmConfig s = *swarm;
        s.seed = derive_seed(seed, s.population_size);
        record.population = s.population_size;
        record.result = search::pso_search(s, config.space, evaluator);
    }
    record.log = evaluator.cache().log();
    record.entries = evaluator.cache().entries();
    return record;
}

std::vector<TuneRecord> run_tune(const ExperimentConfig& config, search::Method method,
                                 std::size_t workers) {
    config.validate();
    const DayLog log = index_days(load_records(config), config.bucket_minutes);

    std::vector<TuneRecord> records;
    for (unsigned day : config.days) {
        for (int horizon : config.horizons) {
            const Task task = build_task(log, day, horizon);
            spdlog::info("{} h{}: {} train rows, {} test rows", data::day_name(day), horizon,
                         task.train.rows.size(), task.test.rows.size());
            if (method == search::Method::grid) {
                records.push_back(tune_task(config, task, method, nullptr, workers));
            } else {
                for (const auto& swarm : config.swarms)
                    records.push_back(tune_task(config, task, method, &swarm, workers));
            }
            const auto& r = records.back().result;
            spdlog::info("{} h{} {}: best {} accuracy {:.4f}, {} unique / {} total evaluations",
                         data::day_name(day), horizon, search::to_string(method),
                         to_string(r.best_topology), r.best_accuracy, r.unique_configurations,
                         r.total_evaluations);
        }
    }
    return records;
}

fs::path tune_json_name(search::Method method) {
    return fmt::format("tune_{}.json", search::to_string(method));
}

fs::path eval_log_name(search::Method method) {
    return fmt::format("evals_{}.csv", search::to_string(method));
}

fs::path timing_name(search::Method method) {
    return fmt::format("timing_{}.csv", search::to_string(method));
}

json tune_document(const ExperimentConfig& config, search::Method method,
                   const std::vector<TuneRecord>& records) {
    json results = json::array();
    for (const auto& r : records)
        results.push_back({{"dataset", r.dataset},
                           {"horizon_minutes", r.horizon_minutes},
                           {"population", r.population},
                           {"result", search::to_json(r.result)}});
    // The output directory does not affect results, so it stays out.
    json settings = to_json(config);
    settings.erase("output_dir");
    return {{"schema_version", kSchemaVersion},
            {"method", search::to_string(method)},
            {"config", settings},
            {"results", results}};
}

void write_tune_outputs(const fs::path& dir, const ExperimentConfig& config, search::Method method,
                        const std::vector<TuneRecord>& records) {
    fs::create_directories(dir);
    write_text(dir / tune_json_name(method), tune_document(config, method, records).dump(2) + "\n");

    std::string evals = "dataset,horizon_minutes,population,index,num_hidden_layers,neurons_per_layer,"
                        "accuracy,status,failed\n";
    std::string timing = "dataset,horizon_minutes,population,num_hidden_layers,neurons_per_layer,"
                         "accuracy,train_seconds,failed\n";
    std::string walls;
    for (const auto& r : records) {
        std::map<NetworkTopology, fitness::Outcome> outcomes;
        for (const auto& e : r.entries) outcomes.emplace(e.topology, e.outcome);
        const auto prefix = fmt::format("{},{},{}", r.dataset, r.horizon_minutes, r.population);
        for (std::size_t i = 0; i < r.log.size(); ++i) {
            const auto& ev = r.log[i];
            const auto& o = outcomes.at(ev.topology);
            evals += fmt::format("{},{},{},{},{},{},{}\n", prefix, i, ev.topology.num_hidden_layers,
                                 ev.topology.neurons_per_layer, format_double(o.accuracy),
                                 ev.hit ? "hit" : "miss", o.failed ? 1 : 0);
        }
        for (const auto& e : r.entries)
            timing += fmt::format("{},{},{},{},{:.6f},{}\n", prefix, e.topology.num_hidden_layers,
                                  e.topology.neurons_per_layer, format_double(e.outcome.accuracy),
                                  e.outcome.train_seconds, e.outcome.failed ? 1 : 0);
        walls += fmt::format("{},wall,{:.6f}\n", prefix, r.result.wall_seconds);
    }
    write_text(dir / eval_log_name(method), evals);
    write_text(dir / timing_name(method), timing);
    write_text(dir / fmt::format("wall_{}.csv", search::to_string(method)),
               "dataset,horizon_minutes,population,kind,seconds\n" + walls);
}

std::vector<LoadedResult> read_tune_document(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(fmt::format("cannot open result file '{}'", path.string()));
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error(fmt::format("result file '{}': {}", path.string(), e.what()));
    }
    if (j.value("schema_version", 0) != kSchemaVersion)
        throw std::runtime_error(fmt::format("'{}' has an unsupported schema_version", path.string()));
    std::vector<LoadedResult> out;
    for (const auto& r : j.at("results"))
        out.push_back({r.at("dataset").get<std::string>(), r.at("horizon_minutes").get<int>(),
                       r.at("population").get<std::size_t>(),
                       search::search_result_from_json(r.at("result"))});
    return out;
}

std::vector<search::ComparisonRow> build_comparison(const std::vector<LoadedResult>& results) {
    using Key = std::pair<int, std::string>;  // horizon, dataset
    std::map<Key, const LoadedResult*> grid, pso;
    std::vector<Key> order;
    for (const auto& r : results) {
        const Key key{r.horizon_minutes, r.dataset};
        if (!grid.count(key) && !pso.count(key)) order.push_back(key);
        if (r.result.method == search::Method::grid) {
            grid[key] = &r;
        } else {
            auto& slot = pso[key];
            if (!slot || r.population < slot->population) slot = &r;
        }
    }
    std::vector<search::ComparisonRow> rows;
    for (const auto& key : order) {
        const auto g = grid.find(key);
        const auto p = pso.find(key);
        if (g == grid.end() || p == pso.end()) {
            spdlog::warn("{} h{}: no matching {} result, skipped", key.second, key.first,
                         g == grid.end() ? "grid" : "pso");
            continue;
        }
        rows.push_back(search::compare(p->second->result, g->second->result, key.second, key.first));
    }
    return rows;
}

void write_compare_outputs(const fs::path& dir, const std::vector<LoadedResult>& results) {
    fs::create_directories(dir);
    const auto rows = build_comparison(results);

    std::string comparison =
        "dataset,horizon_minutes,pso_unique,grid_unique,reduction,pso_total,grid_total,"
        "pso_best_accuracy,grid_best_accuracy,accuracy_delta,pso_best_layers,pso_best_neurons,"
        "grid_best_layers,grid_best_neurons\n";
    for (const auto& r : rows)
        comparison += fmt::format(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.dataset, r.horizon_minutes,
            r.pso.unique_configurations, r.grid.unique_configurations, format_double(r.reduction),
            r.pso.total_evaluations, r.grid.total_evaluations, format_double(r.pso.best_accuracy),
            format_double(r.grid.best_accuracy), format_double(r.accuracy_delta),
            r.pso.best_topology.num_hidden_layers, r.pso.best_topology.neurons_per_layer,
            r.grid.best_topology.num_hidden_layers, r.grid.best_topology.neurons_per_layer);

    std::string accuracy = "horizon_minutes,dataset,method,population,best_accuracy\n";
    std::string configurations =
        "horizon_minutes,dataset,method,population,unique_configurations,total_evaluations\n";
    std::string swarm_sizes =
        "horizon_minutes,dataset,population,best_accuracy,unique_configurations,total_evaluations\n";
    for (const auto& r : results) {
        const auto method = search::to_string(r.result.method);
        accuracy += fmt::format("{},{},{},{},{}\n", r.horizon_minutes, r.dataset, method, r.population,
                                format_double(r.result.best_accuracy));
        configurations += fmt::format("{},{},{},{},{},{}\n", r.horizon_minutes, r.dataset, method,
                                      r.population, r.result.unique_configurations,
                                      r.result.total_evaluations);
        if (r.result.method == search::Method::pso)
            swarm_sizes += fmt::format("{},{},{},{},{},{}\n", r.horizon_minutes, r.dataset, r.population,
                                       format_double(r.result.best_accuracy),
                                       r.result.unique_configurations, r.result.total_evaluations);
    }
    write_text(dir / "comparison.csv", comparison);
    write_text(dir / "accuracy_vs_model.csv", accuracy);
    write_text(dir / "configurations_vs_model.csv", configurations);
    write_text(dir / "swarm_sizes.csv", swarm_sizes);
}

void write_synth_output(const fs::path& dir, const ExperimentConfig& config) {
    fs::create_directories(dir);
    const auto records = data::synth_generate(config.effective_synth());
    write_atomically(dir / "connections.csv",
                     [&](const fs::path& tmp) { data::write_csv(tmp, records); });
    spdlog::info("wrote {} records to {}", records.size(), (dir / "connections.csv").string());
}

void write_prepare_outputs(const fs::path& dir, const std::vector<data::ConnectionRecord>& records,
                           const std::vector<int>& horizons, int bucket_minutes) {
    fs::create_directories(dir);
    const DayLog log = index_days(records, bucket_minutes);

    const auto all = data::bucket_counts(records, bucket_minutes);
    write_atomically(dir / "series.csv", [&](const fs::path& tmp) { data::write_series_csv(tmp, all); });

    const auto parts = data::split_by_day_of_week(records);
    std::string shape = "dataset,records,horizon_minutes,rows\n";
    for (unsigned d = 0; d < 7; ++d) {
        for (int horizon : horizons) {
            data::SupervisedSet set;
            set.horizon_minutes = horizon;
            set.locations = log.locations;
            set.feature_names = data::feature_names_for(log.locations);
            set.anchor = log.anchor;
            if (!log.series[d].empty()) {
                try {
                    set = data::build_supervised(log.series[d], horizon, log.locations);
                    set.anchor = log.anchor;
                } catch (const data::DataError& e) {
                    spdlog::warn("{} h{}: {}; writing header only", data::day_name(d), horizon, e.what());
                }
            }
            const auto name = fmt::format("supervised_{}_h{}.csv", data::day_name(d), horizon);
            write_atomically(dir / name, [&](const fs::path& tmp) { data::write_supervised_csv(tmp, set); });
            shape += fmt::format("{},{},{},{}\n", data::day_name(d), parts[d].size(), horizon, set.rows.size());
        }
    }
    write_text(dir / "datasets.csv", shape);
}

} // namespace swarmtune::experiment
