#include "swarmtune/topology.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace swarmtune {

std::string to_string(const NetworkTopology& t) {
    return fmt::format("({}, {})", t.num_hidden_layers, t.neurons_per_layer);
}

void TopologySpace::validate() const {
    if (min_layers < 1 || min_neurons < 1)
        throw std::invalid_argument("topology space minimums must be >= 1");
    if (min_layers > max_layers) throw std::invalid_argument("min_layers > max_layers");
    if (min_neurons > max_neurons) throw std::invalid_argument("min_neurons > max_neurons");
}

bool TopologySpace::contains(const NetworkTopology& t) const noexcept {
    return t.num_hidden_layers >= min_layers && t.num_hidden_layers <= max_layers &&
           t.neurons_per_layer >= min_neurons && t.neurons_per_layer <= max_neurons;
}

std::size_t TopologySpace::cardinality() const noexcept {
    return static_cast<std::size_t>(max_layers - min_layers + 1) *
           static_cast<std::size_t>(max_neurons - min_neurons + 1);
}

namespace {

pso::Interval axis(int lo, int hi) {
    if (lo == hi) return {static_cast<double>(lo), lo + 0.5};
    return {static_cast<double>(lo), static_cast<double>(hi)};
}

int round_half_up_clamped(double x, int lo, int hi) {
    // Clamp before converting so huge values cannot overflow int.
    const double r = std::floor(x + 0.5);
    return static_cast<int>(std::clamp(r, static_cast<double>(lo), static_cast<double>(hi)));
}

} // namespace

pso::Bounds search_bounds(const TopologySpace& space) {
    space.validate();
    return pso::Bounds({axis(space.min_layers, space.max_layers),
                        axis(space.min_neurons, space.max_neurons)});
}

NetworkTopology decode(std::span<const double> position, const TopologySpace& space) {
    if (position.size() != 2)
        throw std::invalid_argument(
            fmt::format("topology position must have 2 components, got {}", position.size()));
    for (double x : position)
        if (!std::isfinite(x))
            throw std::invalid_argument(fmt::format("non-finite topology coordinate {}", x));
    return {round_half_up_clamped(position[0], space.min_layers, space.max_layers),
            round_half_up_clamped(position[1], space.min_neurons, space.max_neurons)};
}

std::array<double, 2> encode(const NetworkTopology& topology) {
    return {static_cast<double>(topology.num_hidden_layers),
            static_cast<double>(topology.neurons_per_layer)};
}

int rule_of_thumb_hidden_size(int input_dim, int output_dim) {
    if (input_dim < 1 || output_dim < 1)
        throw std::invalid_argument("input and output dimensions must be positive");
    // floor(2(I+O)/3 + 1/2) in integer arithmetic.
    const long long sum = static_cast<long long>(input_dim) + output_dim;
    return static_cast<int>(std::max<long long>(1, (4 * sum + 3) / 6));
}

} // namespace swarmtune
