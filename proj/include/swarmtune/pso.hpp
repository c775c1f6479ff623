#ifndef SWARMTUNE_PSO_HPP
#define SWARMTUNE_PSO_HPP

#include "swarmtune/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

/// Particle swarm optimizer over a bounded real box (maximization).
namespace swarmtune::pso {

struct Interval {
    double min;
    double max;
};

/// Per-dimension search box. Every dimension must satisfy min < max.
class Bounds {
public:
    explicit Bounds(std::vector<Interval> dims);

    std::size_t size() const noexcept { return dims_.size(); }
    const Interval& operator[](std::size_t d) const { return dims_[d]; }
    std::span<const Interval> dims() const noexcept { return dims_; }

    double clamp(std::size_t d, double x) const noexcept;
    bool contains(std::span<const double> x) const noexcept;

private:
    std::vector<Interval> dims_;
};

enum class CoefficientMode {
    fixed,        ///< c1, c2 used as given
    sampled_once  ///< c1, c2 drawn uniform from [0, 4] at initialization
};

/// Form of the attraction terms in the velocity update.
enum class VelocityRule {
    standard,            ///< c * r * (best - position)
    velocity_difference  ///< c * r * (best - velocity); compatibility form
};

inline constexpr double kCoefficientSampleMax = 4.0;

struct SwarmConfig {
    std::size_t population_size = 10;
    double c1 = 2.0;
    double c2 = 2.0;
    double w = 0.729;
    std::size_t max_iterations = 10;
    double velocity_clamp_fraction = 0.1;
    std::uint64_t seed = 0;
    CoefficientMode coefficient_mode = CoefficientMode::sampled_once;
    VelocityRule velocity_rule = VelocityRule::standard;
    /// Stop once gbest fitness repeats between consecutive iterations.
    bool early_stop = true;
    /// Repeat tolerance; 0 means exact equality.
    double early_stop_epsilon = 0.0;

    /// Throws std::invalid_argument on a violated invariant.
    void validate() const;
};

struct VelocityLimits {
    std::vector<double> vmin;
    std::vector<double> vmax;
};

/// vmax[d] = fraction * (max[d] - min[d]), vmin[d] = -vmax[d].
VelocityLimits velocity_limits(const Bounds& bounds, double clamp_fraction);

struct Particle {
    std::vector<double> position;
    std::vector<double> velocity;
    std::vector<double> pbest_position;
    double pbest_fitness = -std::numeric_limits<double>::infinity();
};

struct Coefficients {
    double w;
    double c1;
    double c2;
};

struct SwarmState {
    std::vector<Particle> particles;
    std::vector<double> gbest_position;
    double gbest_fitness = -std::numeric_limits<double>::infinity();
    std::size_t iteration = 0;
    /// Distinct positions evaluated so far (exact comparison).
    std::size_t unique_evaluations = 0;
    std::size_t total_evaluations = 0;
    /// Coefficients in effect for this run (after any sampling).
    Coefficients coefficients{};
    VelocityLimits limits;
    std::set<std::vector<double>> evaluated_positions;
};

struct HistoryEntry {
    std::size_t iteration;
    double gbest_fitness;
    std::size_t unique_evaluations;
    std::size_t total_evaluations;
};

struct OptimizationResult {
    std::vector<double> best_position;
    double best_fitness = -std::numeric_limits<double>::infinity();
    std::size_t iterations_run = 0;
    std::size_t unique_evaluations = 0;
    std::size_t total_evaluations = 0;
    Coefficients coefficients{};
    /// Entry 0 is the initial evaluation; entry t follows iteration t.
    std::vector<HistoryEntry> history;
};

/// Raised when the fitness function fails or returns NaN for a particle.
class EvaluationError : public std::runtime_error {
public:
    EvaluationError(std::vector<double> position, const std::string& what);
    const std::vector<double>& position() const noexcept { return position_; }

private:
    std::vector<double> position_;
};

using FitnessFn = std::function<double(std::span<const double>)>;
/// Scores a whole iteration at once; result i belongs to position i.
using BatchFitnessFn =
    std::function<std::vector<double>(const std::vector<std::vector<double>>&)>;

/// Adapts a per-position fitness into a batch one that runs on up to
/// `workers` threads. `fitness` must be safe to call concurrently when
/// workers > 1.
BatchFitnessFn parallel_batch(FitnessFn fitness, std::size_t workers);

/// Random initial population; positions and velocities uniform within the
/// box and velocity limits. Particles are unevaluated (pbest = -inf).
SwarmState init_swarm(const SwarmConfig& config, const Bounds& bounds, Rng& rng);

/// Scores every particle at its current position and folds the results into
/// pbest/gbest in particle order. Replacement requires strict improvement.
void evaluate_swarm(SwarmState& state, const BatchFitnessFn& fitness);

std::vector<double> update_velocity(const Particle& particle,
                                    std::span<const double> gbest_position,
                                    const Coefficients& coefficients,
                                    VelocityRule rule,
                                    const VelocityLimits& limits,
                                    Rng& rng);

std::vector<double> update_position(const Particle& particle, const Bounds& bounds);

/// One iteration: move every particle, then re-evaluate the swarm.
void step(SwarmState& state,
          const BatchFitnessFn& fitness,
          const SwarmConfig& config,
          const Bounds& bounds,
          Rng& rng);

OptimizationResult run(const SwarmConfig& config, const Bounds& bounds,
                       const BatchFitnessFn& fitness);

OptimizationResult run(const SwarmConfig& config, const Bounds& bounds,
                       const FitnessFn& fitness, std::size_t workers = 1);

} // namespace swarmtune::pso

#endif // SWARMTUNE_PSO_HPP
