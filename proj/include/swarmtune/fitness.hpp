#ifndef SWARMTUNE_FITNESS_HPP
#define SWARMTUNE_FITNESS_HPP

#include "swarmtune/data.hpp"
#include "swarmtune/mlp.hpp"
#include "swarmtune/topology.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace swarmtune::fitness {

/// Occupant-count tolerance: a prediction counts when |round(p) - actual| <= n.
struct ToleranceWindow {
    int n = 20;
};

/// Fraction of predictions inside the window. Predictions are rounded
/// half-up; a non-finite prediction is a miss. Throws std::invalid_argument
/// on empty or mismatched input, or a negative window.
double window_accuracy(std::span<const double> predictions, std::span<const double> actuals,
                       ToleranceWindow window);

struct Outcome {
    double accuracy = 0.0;
    double train_seconds = 0.0;
    bool failed = false;
    std::string failure;
};

struct CacheEntry {
    NetworkTopology topology;
    Outcome outcome;
};

struct LogEvent {
    NetworkTopology topology;
    bool hit;
};

/// Memoized fitness per topology. Each distinct topology is computed at most
/// once, even under concurrent lookups. A computation that throws is stored
/// as accuracy 0 with the failure message.
class FitnessCache {
public:
    using ComputeFn = std::function<Outcome(const NetworkTopology&)>;

    FitnessCache() = default;
    FitnessCache(const FitnessCache&) = delete;
    FitnessCache& operator=(const FitnessCache&) = delete;

    /// Safe to call from several threads. The log then follows call order.
    double evaluate(const NetworkTopology& topology, const ComputeFn& compute);

    /// Scores topologies in order. Hit/miss status and log order follow the
    /// request order regardless of `workers`; new topologies are computed on
    /// up to `workers` threads.
    std::vector<double> evaluate_batch(std::span<const NetworkTopology> topologies,
                                       const ComputeFn& compute, std::size_t workers);

    std::size_t unique_evaluations() const;
    std::size_t total_evaluations() const;
    std::optional<Outcome> find(const NetworkTopology& topology) const;
    /// Distinct topologies in first-request order.
    std::vector<CacheEntry> entries() const;
    std::vector<LogEvent> log() const;

    /// index,num_hidden_layers,neurons_per_layer,accuracy,status,failed
    void write_log_csv(const std::filesystem::path& path) const;
    /// num_hidden_layers,neurons_per_layer,accuracy,train_seconds,failed
    void write_timing_csv(const std::filesystem::path& path) const;

private:
    struct Slot {
        NetworkTopology topology;
        std::shared_future<Outcome> outcome;
    };

    static Outcome guarded(const ComputeFn& compute, const NetworkTopology& topology);

    mutable std::mutex mutex_;
    std::map<NetworkTopology, std::shared_ptr<Slot>> slots_;
    std::vector<std::shared_ptr<Slot>> order_;
    std::vector<LogEvent> log_;
};

/// Scores batches of topologies and exposes the cache behind them.
class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual std::vector<double> evaluate(std::span<const NetworkTopology> topologies) = 0;
    virtual const FitnessCache& cache() const = 0;
};

/// Memoized evaluator around an arbitrary scoring function.
class FunctionEvaluator final : public Evaluator {
public:
    explicit FunctionEvaluator(std::function<double(const NetworkTopology&)> fn,
                               std::size_t workers = 1);
    std::vector<double> evaluate(std::span<const NetworkTopology> topologies) override;
    const FitnessCache& cache() const override { return cache_; }

private:
    std::function<double(const NetworkTopology&)> fn_;
    std::size_t workers_;
    FitnessCache cache_;
};

/// Standardized train/test matrices. Feature and target statistics come from
/// the training split only; constant columns get unit scale.
struct PreparedData {
    mlp::Samples train;
    Eigen::MatrixXd test_features;
    std::vector<double> test_actuals;
    Eigen::VectorXd feature_mean;
    Eigen::VectorXd feature_scale;
    double target_mean = 0.0;
    double target_scale = 1.0;

    std::size_t input_dim() const noexcept { return train.features.rows(); }
};

PreparedData prepare(const data::SupervisedSet& train, const data::SupervisedSet& test);

struct ModelSettings {
    mlp::TrainConfig train;
    mlp::Activation activation = mlp::Activation::relu;
    ToleranceWindow window;
    /// Global seed; each topology derives its own model seed from it.
    std::uint64_t seed = 0;
};

std::uint64_t model_seed(std::uint64_t global_seed, const NetworkTopology& topology);

/// Builds, trains and scores one network. Training divergence yields a
/// failed outcome with accuracy 0.
Outcome train_and_score(const NetworkTopology& topology, const PreparedData& data,
                        const ModelSettings& settings);

/// Cache lookup or train-and-score; returns the accuracy.
double evaluate_topology(const NetworkTopology& topology, const PreparedData& data,
                         const ModelSettings& settings, FitnessCache& cache);

class ModelEvaluator final : public Evaluator {
public:
    ModelEvaluator(std::shared_ptr<const PreparedData> data, ModelSettings settings,
                   std::size_t workers = 1);
    std::vector<double> evaluate(std::span<const NetworkTopology> topologies) override;
    const FitnessCache& cache() const override { return cache_; }

private:
    std::shared_ptr<const PreparedData> data_;
    ModelSettings settings_;
    std::size_t workers_;
    FitnessCache cache_;
};

} // namespace swarmtune::fitness

#endif // SWARMTUNE_FITNESS_HPP
