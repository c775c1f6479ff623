#ifndef SWARMTUNE_TOPOLOGY_HPP
#define SWARMTUNE_TOPOLOGY_HPP

#include "swarmtune/pso.hpp"

#include <array>
#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <string>

namespace swarmtune {

/// Hidden-layer count and neurons per hidden layer (uniform across layers).
struct NetworkTopology {
    int num_hidden_layers = 1;
    int neurons_per_layer = 1;

    auto operator<=>(const NetworkTopology&) const = default;
};

std::string to_string(const NetworkTopology& t);

struct TopologySpace {
    int min_layers = 1;
    int max_layers = 10;
    int min_neurons = 1;
    int max_neurons = 200;

    void validate() const;
    bool contains(const NetworkTopology& t) const noexcept;
    /// Number of integer topologies in the space.
    std::size_t cardinality() const noexcept;
};

/// Search box for the swarm: dimension 0 is layers, dimension 1 neurons.
/// A singleton range is widened to [v, v + 0.5] so the box stays non-empty
/// and still decodes to v.
pso::Bounds search_bounds(const TopologySpace& space);

/// Rounds each component half-up and clamps it into the space. Throws
/// std::invalid_argument on a non-finite component or a size other than 2.
NetworkTopology decode(std::span<const double> position, const TopologySpace& space);

std::array<double, 2> encode(const NetworkTopology& topology);

/// Hidden-size heuristic: round-half-up of (inputs + outputs) * 2/3, at least 1.
int rule_of_thumb_hidden_size(int input_dim, int output_dim);

} // namespace swarmtune

template <>
struct std::hash<swarmtune::NetworkTopology> {
    std::size_t operator()(const swarmtune::NetworkTopology& t) const noexcept {
        return std::hash<long long>{}((static_cast<long long>(t.num_hidden_layers) << 32) ^
                                      static_cast<unsigned>(t.neurons_per_layer));
    }
};

#endif // SWARMTUNE_TOPOLOGY_HPP
