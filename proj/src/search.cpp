#include "swarmtune/search.hpp"

#include <fmt/format.h>

#include <chrono>
#include <set>
#include <stdexcept>

namespace swarmtune::search {

namespace {

void check_axis(const std::vector<int>& values, int lo, int hi, std::string_view name) {
    if (values.empty()) throw std::invalid_argument(fmt::format("grid {} list is empty", name));
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < lo || values[i] > hi)
            throw std::invalid_argument(
                fmt::format("grid {} value {} outside [{}, {}]", name, values[i], lo, hi));
        if (i > 0 && values[i] <= values[i - 1])
            throw std::invalid_argument(fmt::format("grid {} values must strictly increase", name));
    }
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

void GridSpec::validate(const TopologySpace& space) const {
    check_axis(layer_values, space.min_layers, space.max_layers, "layer");
    check_axis(neuron_values, space.min_neurons, space.max_neurons, "neuron");
}

std::vector<NetworkTopology> GridSpec::topologies() const {
    std::vector<NetworkTopology> out;
    out.reserve(size());
    for (int layers : layer_values)
        for (int neurons : neuron_values) out.push_back({layers, neurons});
    return out;
}

GridSpec GridSpec::standard() {
    GridSpec grid;
    for (int l = 1; l <= 10; ++l) grid.layer_values.push_back(l);
    for (int n = 10; n <= 200; n += 10) grid.neuron_values.push_back(n);
    return grid;
}

std::string_view to_string(Method m) { return m == Method::pso ? "pso" : "grid"; }

Method method_from_string(std::string_view name) {
    if (name == "pso") return Method::pso;
    if (name == "grid") return Method::grid;
    throw std::invalid_argument(fmt::format("unknown search method '{}'", name));
}

SearchResult grid_search(const GridSpec& grid, fitness::Evaluator& evaluator) {
    if (grid.layer_values.empty() || grid.neuron_values.empty())
        throw std::invalid_argument("grid must be non-empty");
    const auto started = std::chrono::steady_clock::now();
    const std::size_t unique_before = evaluator.cache().unique_evaluations();
    const std::size_t total_before = evaluator.cache().total_evaluations();

    const auto topologies = grid.topologies();
    const auto scores = evaluator.evaluate(topologies);

    SearchResult result;
    result.method = Method::grid;
    result.best_accuracy = -1.0;
    std::set<NetworkTopology> seen;
    for (std::size_t i = 0; i < topologies.size(); ++i) {
        seen.insert(topologies[i]);
        if (scores[i] > result.best_accuracy) {
            result.best_accuracy = scores[i];
            result.best_topology = topologies[i];
        }
        result.history.push_back({i + 1, result.best_accuracy, seen.size(), i + 1});
    }
    result.unique_configurations = evaluator.cache().unique_evaluations() - unique_before;
    result.total_evaluations = evaluator.cache().total_evaluations() - total_before;
    result.wall_seconds = seconds_since(started);
    return result;
}

SearchResult pso_search(const pso::SwarmConfig& config, const TopologySpace& space,
                        fitness::Evaluator& evaluator) {
    space.validate();
    const auto started = std::chrono::steady_clock::now();
    const std::size_t unique_before = evaluator.cache().unique_evaluations();
    const std::size_t total_before = evaluator.cache().total_evaluations();

    std::vector<std::pair<std::size_t, std::size_t>> counts_per_batch;
    const pso::BatchFitnessFn fitness = [&](const std::vector<std::vector<double>>& positions) {
        std::vector<NetworkTopology> topologies;
        topologies.reserve(positions.size());
        for (const auto& p : positions) topologies.push_back(decode(p, space));
        auto scores = evaluator.evaluate(topologies);
        counts_per_batch.emplace_back(evaluator.cache().unique_evaluations() - unique_before,
                                      evaluator.cache().total_evaluations() - total_before);
        return scores;
    };

    const auto run = pso::run(config, search_bounds(space), fitness);

    SearchResult result;
    result.method = Method::pso;
    result.best_topology = decode(run.best_position, space);
    result.best_accuracy = run.best_fitness;
    result.iterations = run.iterations_run;
    for (std::size_t i = 0; i < run.history.size(); ++i) {
        const auto& [unique, total] = counts_per_batch.at(i);
        result.history.push_back({run.history[i].iteration, run.history[i].gbest_fitness, unique, total});
    }
    result.unique_configurations = evaluator.cache().unique_evaluations() - unique_before;
    result.total_evaluations = evaluator.cache().total_evaluations() - total_before;
    result.wall_seconds = seconds_since(started);
    return result;
}

ComparisonRow compare(const SearchResult& pso, const SearchResult& grid, std::string dataset,
                      int horizon_minutes) {
    if (grid.unique_configurations == 0)
        throw std::invalid_argument("grid result has no evaluated configurations");
    ComparisonRow row;
    row.dataset = std::move(dataset);
    row.horizon_minutes = horizon_minutes;
    row.pso = pso;
    row.grid = grid;
    row.reduction = 1.0 - static_cast<double>(pso.unique_configurations) /
                              static_cast<double>(grid.unique_configurations);
    row.accuracy_delta = pso.best_accuracy - grid.best_accuracy;
    return row;
}

nlohmann::json to_json(const SearchResult& result, bool include_timing) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : result.history)
        history.push_back({{"step", h.step},
                           {"best_accuracy", h.best_accuracy},
                           {"unique_configurations", h.unique_configurations},
                           {"total_evaluations", h.total_evaluations}});
    nlohmann::json j = {
        {"method", to_string(result.method)},
        {"best_topology",
         {{"num_hidden_layers", result.best_topology.num_hidden_layers},
          {"neurons_per_layer", result.best_topology.neurons_per_layer}}},
        {"best_accuracy", result.best_accuracy},
        {"unique_configurations", result.unique_configurations},
        {"total_evaluations", result.total_evaluations},
        {"iterations", result.iterations},
        {"history", history},
    };
    if (include_timing) j["wall_seconds"] = result.wall_seconds;
    return j;
}

SearchResult search_result_from_json(const nlohmann::json& j) {
    SearchResult r;
    r.method = method_from_string(j.at("method").get<std::string>());
    r.best_topology = {j.at("best_topology").at("num_hidden_layers").get<int>(),
                       j.at("best_topology").at("neurons_per_layer").get<int>()};
    r.best_accuracy = j.at("best_accuracy").get<double>();
    r.unique_configurations = j.at("unique_configurations").get<std::size_t>();
    r.total_evaluations = j.at("total_evaluations").get<std::size_t>();
    r.iterations = j.value("iterations", std::size_t{0});
    r.wall_seconds = j.value("wall_seconds", 0.0);
    for (const auto& h : j.at("history"))
        r.history.push_back({h.at("step").get<std::size_t>(), h.at("best_accuracy").get<double>(),
                             h.at("unique_configurations").get<std::size_t>(),
                             h.at("total_evaluations").get<std::size_t>()});
    return r;
}

} // namespace swarmtune::search
