#ifndef SWARMTUNE_SEARCH_HPP
#define SWARMTUNE_SEARCH_HPP

#include "swarmtune/fitness.hpp"
#include "swarmtune/pso.hpp"
#include "swarmtune/topology.hpp"

#include <json.hpp>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace swarmtune::search {

/// Cartesian grid of layer counts and neuron counts.
struct GridSpec {
    std::vector<int> layer_values;
    std::vector<int> neuron_values;

    /// Non-empty, strictly increasing, and inside `space`.
    void validate(const TopologySpace& space) const;
    /// Layers outer, neurons inner.
    std::vector<NetworkTopology> topologies() const;
    std::size_t size() const noexcept { return layer_values.size() * neuron_values.size(); }

    /// Layers 1..10 by neurons 10, 20, ..., 200.
    static GridSpec standard();
};

enum class Method { pso, grid };

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

/// For grid search a step is one evaluation; for PSO it is one iteration
/// (step 0 is the initial population).
struct StepRecord {
    std::size_t step;
    double best_accuracy;
    std::size_t unique_configurations;
    std::size_t total_evaluations;
};

struct SearchResult {
    Method method = Method::grid;
    NetworkTopology best_topology;
    double best_accuracy = 0.0;
    std::size_t unique_configurations = 0;
    std::size_t total_evaluations = 0;
    /// PSO iterations run; 0 for grid search.
    std::size_t iterations = 0;
    double wall_seconds = 0.0;
    std::vector<StepRecord> history;
};

/// Evaluates every grid entry exactly once; best is the first entry reaching
/// the maximum accuracy.
SearchResult grid_search(const GridSpec& grid, fitness::Evaluator& evaluator);

/// Swarm search over the 2-D topology box; positions are decoded to integer
/// topologies before evaluation. Counts come from the evaluator's cache.
SearchResult pso_search(const pso::SwarmConfig& config, const TopologySpace& space,
                        fitness::Evaluator& evaluator);

struct ComparisonRow {
    std::string dataset;
    int horizon_minutes = 0;
    SearchResult pso;
    SearchResult grid;
    /// 1 - pso.unique / grid.unique; negative when PSO explored more.
    double reduction = 0.0;
    /// pso.best_accuracy - grid.best_accuracy.
    double accuracy_delta = 0.0;
};

ComparisonRow compare(const SearchResult& pso, const SearchResult& grid,
                      std::string dataset = {}, int horizon_minutes = 0);

/// wall_seconds is written only when `include_timing` is set, so the default
/// output is a pure function of the inputs.
nlohmann::json to_json(const SearchResult& result, bool include_timing = false);
SearchResult search_result_from_json(const nlohmann::json& j);

} // namespace swarmtune::search

#endif // SWARMTUNE_SEARCH_HPP
