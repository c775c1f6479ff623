#include "swarmtune/pso.hpp"

#include "swarmtune/parallel.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <utility>

namespace swarmtune::pso {

Bounds::Bounds(std::vector<Interval> dims) : dims_(std::move(dims)) {
    if (dims_.empty()) throw std::invalid_argument("bounds need at least one dimension");
    for (std::size_t d = 0; d < dims_.size(); ++d) {
        const auto [lo, hi] = dims_[d];
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
            throw std::invalid_argument(
                fmt::format("dimension {}: need finite min < max, got [{}, {}]", d, lo, hi));
    }
}

double Bounds::clamp(std::size_t d, double x) const noexcept {
    return std::clamp(x, dims_[d].min, dims_[d].max);
}

bool Bounds::contains(std::span<const double> x) const noexcept {
    if (x.size() != dims_.size()) return false;
    for (std::size_t d = 0; d < x.size(); ++d)
        if (!(x[d] >= dims_[d].min && x[d] <= dims_[d].max)) return false;
    return true;
}

void SwarmConfig::validate() const {
    if (population_size < 1) throw std::invalid_argument("population_size must be >= 1");
    if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
    if (coefficient_mode == CoefficientMode::fixed && (!(c1 >= 0) || !(c2 >= 0)))
        throw std::invalid_argument("c1 and c2 must be >= 0");
    if (!(w >= 0) || !std::isfinite(w)) throw std::invalid_argument("inertia w must be >= 0");
    if (!(velocity_clamp_fraction > 0 && velocity_clamp_fraction <= 1))
        throw std::invalid_argument("velocity_clamp_fraction must lie in (0, 1]");
    if (!(early_stop_epsilon >= 0)) throw std::invalid_argument("early_stop_epsilon must be >= 0");
}

VelocityLimits velocity_limits(const Bounds& bounds, double clamp_fraction) {
    if (!(clamp_fraction > 0 && clamp_fraction <= 1))
        throw std::invalid_argument("clamp fraction must lie in (0, 1]");
    VelocityLimits limits;
    limits.vmin.reserve(bounds.size());
    limits.vmax.reserve(bounds.size());
    for (const auto& [lo, hi] : bounds.dims()) {
        const double vmax = clamp_fraction * (hi - lo);
        limits.vmax.push_back(vmax);
        limits.vmin.push_back(-vmax);
    }
    return limits;
}

EvaluationError::EvaluationError(std::vector<double> position, const std::string& what)
    : std::runtime_error(fmt::format("fitness evaluation failed at position [{}]: {}",
                                     fmt::join(position, ", "), what)),
      position_(std::move(position)) {}

BatchFitnessFn parallel_batch(FitnessFn fitness, std::size_t workers) {
    return [fitness = std::move(fitness), workers](const std::vector<std::vector<double>>& positions) {
        std::vector<double> scores(positions.size());
        parallel_for(positions.size(), workers, [&](std::size_t i) {
            try {
                scores[i] = fitness(positions[i]);
            } catch (const EvaluationError&) {
                throw;
            } catch (const std::exception& e) {
                throw EvaluationError(positions[i], e.what());
            }
        });
        return scores;
    };
}

SwarmState init_swarm(const SwarmConfig& config, const Bounds& bounds, Rng& rng) {
    config.validate();
    SwarmState state;
    state.coefficients = {config.w, config.c1, config.c2};
    if (config.coefficient_mode == CoefficientMode::sampled_once) {
        state.coefficients.c1 = rng.uniform(0.0, kCoefficientSampleMax);
        state.coefficients.c2 = rng.uniform(0.0, kCoefficientSampleMax);
    }
    state.limits = velocity_limits(bounds, config.velocity_clamp_fraction);

    const std::size_t dims = bounds.size();
    state.particles.resize(config.population_size);
    for (auto& p : state.particles) {
        p.position.resize(dims);
        p.velocity.resize(dims);
        for (std::size_t d = 0; d < dims; ++d) {
            p.position[d] = bounds.clamp(d, rng.uniform(bounds[d].min, bounds[d].max));
            p.velocity[d] = rng.uniform(state.limits.vmin[d], state.limits.vmax[d]);
        }
        p.pbest_position = p.position;
    }
    return state;
}

void evaluate_swarm(SwarmState& state, const BatchFitnessFn& fitness) {
    std::vector<std::vector<double>> positions;
    positions.reserve(state.particles.size());
    for (const auto& p : state.particles) positions.push_back(p.position);

    std::vector<double> scores;
    try {
        scores = fitness(positions);
    } catch (const EvaluationError&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error(
            fmt::format("fitness evaluation failed in iteration {}: {}", state.iteration, e.what()));
    }
    if (scores.size() != positions.size())
        throw std::runtime_error(fmt::format("fitness returned {} scores for {} particles",
                                             scores.size(), positions.size()));

    for (std::size_t i = 0; i < state.particles.size(); ++i) {
        auto& p = state.particles[i];
        if (std::isnan(scores[i])) throw EvaluationError(p.position, "fitness is NaN");
        ++state.total_evaluations;
        if (state.evaluated_positions.insert(p.position).second) ++state.unique_evaluations;
        if (scores[i] > p.pbest_fitness) {
            p.pbest_fitness = scores[i];
            p.pbest_position = p.position;
        }
        if (p.pbest_fitness > state.gbest_fitness) {
            state.gbest_fitness = p.pbest_fitness;
            state.gbest_position = p.pbest_position;
        }
    }
}

std::vector<double> update_velocity(const Particle& particle,
                                    std::span<const double> gbest_position,
                                    const Coefficients& coefficients,
                                    VelocityRule rule,
                                    const VelocityLimits& limits,
                                    Rng& rng) {
    const std::size_t dims = particle.position.size();
    std::vector<double> next(dims);
    for (std::size_t d = 0; d < dims; ++d) {
        const double r1 = rng.uniform();
        const double r2 = rng.uniform();
        const double anchor =
            rule == VelocityRule::standard ? particle.position[d] : particle.velocity[d];
        const double v = coefficients.w * particle.velocity[d] +
                         coefficients.c1 * r1 * (particle.pbest_position[d] - anchor) +
                         coefficients.c2 * r2 * (gbest_position[d] - anchor);
        next[d] = std::clamp(v, limits.vmin[d], limits.vmax[d]);
    }
    return next;
}

std::vector<double> update_position(const Particle& particle, const Bounds& bounds) {
    std::vector<double> next(particle.position.size());
    for (std::size_t d = 0; d < next.size(); ++d)
        next[d] = bounds.clamp(d, particle.position[d] + particle.velocity[d]);
    return next;
}

void step(SwarmState& state,
          const BatchFitnessFn& fitness,
          const SwarmConfig& config,
          const Bounds& bounds,
          Rng& rng) {
    if (state.gbest_position.empty())
        throw std::logic_error("step() requires an evaluated swarm");
    // Every random draw happens here, in particle order, before any
    // evaluation is dispatched.
    for (auto& p : state.particles) {
        p.velocity = update_velocity(p, state.gbest_position, state.coefficients,
                                     config.velocity_rule, state.limits, rng);
        p.position = update_position(p, bounds);
    }
    ++state.iteration;
    evaluate_swarm(state, fitness);
}

OptimizationResult run(const SwarmConfig& config, const Bounds& bounds,
                       const BatchFitnessFn& fitness) {
    Rng rng(config.seed);
    SwarmState state = init_swarm(config, bounds, rng);
    evaluate_swarm(state, fitness);

    OptimizationResult result;
    auto record = [&] {
        result.history.push_back({state.iteration, state.gbest_fitness,
                                  state.unique_evaluations, state.total_evaluations});
    };
    record();

    while (state.iteration < config.max_iterations) {
        const double previous = state.gbest_fitness;
        step(state, fitness, config, bounds, rng);
        record();
        if (config.early_stop && state.iteration >= 2 &&
            std::abs(state.gbest_fitness - previous) <= config.early_stop_epsilon)
            break;
    }

    result.best_position = state.gbest_position;
    result.best_fitness = state.gbest_fitness;
    result.iterations_run = state.iteration;
    result.unique_evaluations = state.unique_evaluations;
    result.total_evaluations = state.total_evaluations;
    result.coefficients = state.coefficients;
    return result;
}

OptimizationResult run(const SwarmConfig& config, const Bounds& bounds,
                       const FitnessFn& fitness, std::size_t workers) {
    return run(config, bounds, parallel_batch(fitness, workers));
}

} // namespace swarmtune::pso
