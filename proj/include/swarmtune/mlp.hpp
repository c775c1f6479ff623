#ifndef SWARMTUNE_MLP_HPP
#define SWARMTUNE_MLP_HPP

#include "swarmtune/topology.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

/// Small fully connected regression network trained with mini-batch SGD.
namespace swarmtune::mlp {

enum class Activation { relu, tanh };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// weights is (outputs x inputs); bias has one entry per output.
struct DenseLayer {
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
};

class Model {
public:
    /// Throws std::invalid_argument if layer shapes do not chain.
    Model(std::vector<DenseLayer> layers, Activation activation);

    std::size_t input_dim() const noexcept { return layers_.front().weights.cols(); }
    std::size_t output_dim() const noexcept { return layers_.back().weights.rows(); }
    std::size_t hidden_layers() const noexcept { return layers_.size() - 1; }
    std::size_t parameter_count() const noexcept;
    Activation activation() const noexcept { return activation_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    /// Flattened layer by layer: row-major weights, then bias.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> values);
    bool all_finite() const noexcept;

    /// In-place SGD update: params -= rate * gradient (same layout).
    void apply_update(const std::vector<DenseLayer>& gradient, double rate);

private:
    std::vector<DenseLayer> layers_;
    Activation activation_;
};

/// Glorot-uniform weights in [-s, s], s = sqrt(6 / (fan_in + fan_out)); zero biases.
Model build(const NetworkTopology& topology, std::size_t input_dim, std::size_t output_dim,
            std::uint64_t seed, Activation activation = Activation::relu);

/// Column-per-sample batch: features is (input_dim x n), targets (output_dim x n).
struct Samples {
    Eigen::MatrixXd features;
    Eigen::MatrixXd targets;

    std::size_t size() const noexcept { return features.cols(); }
};

class DimensionError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(std::size_t epoch, double loss);
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

std::vector<double> forward(const Model& model, std::span<const double> features);
/// Outputs for every column of `features`.
Eigen::MatrixXd forward_batch(const Model& model, const Eigen::MatrixXd& features);

/// Mean over rows of the squared error. Throws std::invalid_argument on
/// empty or mismatched input.
double loss(std::span<const double> predictions, std::span<const double> targets);
double loss(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets);

struct Gradient {
    std::vector<DenseLayer> layers;
    double loss = 0.0;

    std::vector<double> flatten() const;
};

/// Backpropagated gradient of the mean squared error over the batch.
Gradient gradient(const Model& model, const Samples& batch);

enum class InitScale { fan_in_uniform };

struct TrainConfig {
    double learning_rate = 0.01;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    InitScale init_scale_mode = InitScale::fan_in_uniform;

    void validate() const;
};

struct TrainResult {
    Model model;
    /// Mean pre-update batch loss per epoch.
    std::vector<double> loss_history;
};

TrainResult train(Model model, const Samples& train_set, const TrainConfig& config);

/// First output component of the forward pass.
double predict(const Model& model, std::span<const double> features);

nlohmann::json to_json(const Model& model);

} // namespace swarmtune::mlp

#endif // SWARMTUNE_MLP_HPP
