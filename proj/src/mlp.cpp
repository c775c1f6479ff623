#include "swarmtune/mlp.hpp"

#include "swarmtune/rng.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numeric>
#include <utility>

namespace swarmtune::mlp {

std::string_view to_string(Activation a) {
    return a == Activation::relu ? "relu" : "tanh";
}

Activation activation_from_string(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw std::invalid_argument(fmt::format("unknown activation '{}'", name));
}

Model::Model(std::vector<DenseLayer> layers, Activation activation)
    : layers_(std::move(layers)), activation_(activation) {
    if (layers_.empty()) throw std::invalid_argument("model needs at least an output layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.weights.rows() == 0 || layer.weights.cols() == 0)
            throw std::invalid_argument(fmt::format("layer {} has an empty weight matrix", l));
        if (layer.bias.size() != layer.weights.rows())
            throw std::invalid_argument(fmt::format("layer {} bias size mismatch", l));
        if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows())
            throw std::invalid_argument(fmt::format("layer {} input does not chain", l));
    }
}

std::size_t Model::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
    return n;
}

std::vector<double> Model::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                out.push_back(layer.weights(r, c));
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out.push_back(layer.bias(r));
    }
    return out;
}

void Model::set_parameters(std::span<const double> values) {
    if (values.size() != parameter_count())
        throw DimensionError(fmt::format("expected {} parameters, got {}", parameter_count(),
                                         values.size()));
    std::size_t i = 0;
    for (auto& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                layer.weights(r, c) = values[i++];
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = values[i++];
    }
}

bool Model::all_finite() const noexcept {
    for (const auto& layer : layers_)
        if (!layer.weights.allFinite() || !layer.bias.allFinite()) return false;
    return true;
}

void Model::apply_update(const std::vector<DenseLayer>& gradient, double rate) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l].weights.noalias() -= rate * gradient[l].weights;
        layers_[l].bias.noalias() -= rate * gradient[l].bias;
    }
}

Model build(const NetworkTopology& topology, std::size_t input_dim, std::size_t output_dim,
            std::uint64_t seed, Activation activation) {
    if (input_dim == 0 || output_dim == 0)
        throw std::invalid_argument("input and output dimensions must be positive");
    if (topology.num_hidden_layers < 1 || topology.neurons_per_layer < 1)
        throw std::invalid_argument("topology needs at least one layer and one neuron");

    Rng rng(seed);
    std::vector<DenseLayer> layers;
    const auto hidden = static_cast<std::size_t>(topology.neurons_per_layer);
    std::size_t fan_in = input_dim;
    for (int l = 0; l <= topology.num_hidden_layers; ++l) {
        const std::size_t fan_out = l == topology.num_hidden_layers ? output_dim : hidden;
        const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
        for (std::size_t r = 0; r < fan_out; ++r)
            for (std::size_t c = 0; c < fan_in; ++c) layer.weights(r, c) = rng.uniform(-s, s);
        layers.push_back(std::move(layer));
        fan_in = fan_out;
    }
    return Model(std::move(layers), activation);
}

TrainingDiverged::TrainingDiverged(std::size_t epoch, double loss)
    : std::runtime_error(fmt::format("training diverged in epoch {} (loss {})", epoch, loss)),
      epoch_(epoch) {}

namespace {

void activate(Eigen::MatrixXd& z, Activation a) {
    if (a == Activation::relu)
        z = z.cwiseMax(0.0);
    else
        z = z.array().tanh().matrix();
}

/// Multiplies `delta` in place by the activation derivative, given the
/// activated values.
void scale_by_derivative(Eigen::MatrixXd& delta, const Eigen::MatrixXd& activated, Activation a) {
    if (a == Activation::relu)
        delta = (activated.array() > 0.0).select(delta, 0.0);
    else
        delta.array() *= 1.0 - activated.array().square();
}

void check_input(const Model& model, Eigen::Index rows) {
    if (static_cast<std::size_t>(rows) != model.input_dim())
        throw DimensionError(fmt::format("expected {} features, got {}", model.input_dim(), rows));
}

} // namespace

Eigen::MatrixXd forward_batch(const Model& model, const Eigen::MatrixXd& features) {
    check_input(model, features.rows());
    const auto& layers = model.layers();
    Eigen::MatrixXd a = features;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Eigen::MatrixXd z = layers[l].weights * a;
        z.colwise() += layers[l].bias;
        if (l + 1 < layers.size()) activate(z, model.activation());
        a = std::move(z);
    }
    return a;
}

std::vector<double> forward(const Model& model, std::span<const double> features) {
    check_input(model, static_cast<Eigen::Index>(features.size()));
    const Eigen::Map<const Eigen::VectorXd> x(features.data(), features.size());
    const Eigen::MatrixXd out = forward_batch(model, x);
    return {out.data(), out.data() + out.size()};
}

double loss(std::span<const double> predictions, std::span<const double> targets) {
    if (predictions.empty()) throw std::invalid_argument("loss of an empty batch");
    if (predictions.size() != targets.size())
        throw std::invalid_argument("prediction and target counts differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double e = predictions[i] - targets[i];
        sum += e * e;
    }
    return sum / static_cast<double>(predictions.size());
}

double loss(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets) {
    if (predictions.cols() == 0) throw std::invalid_argument("loss of an empty batch");
    if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols())
        throw std::invalid_argument("prediction and target shapes differ");
    return (predictions - targets).squaredNorm() / static_cast<double>(predictions.cols());
}

std::vector<double> Gradient::flatten() const {
    std::vector<double> out;
    for (const auto& layer : layers) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                out.push_back(layer.weights(r, c));
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out.push_back(layer.bias(r));
    }
    return out;
}

Gradient gradient(const Model& model, const Samples& batch) {
    if (batch.size() == 0) throw std::invalid_argument("gradient of an empty batch");
    check_input(model, batch.features.rows());
    if (static_cast<std::size_t>(batch.targets.rows()) != model.output_dim() ||
        batch.targets.cols() != batch.features.cols())
        throw DimensionError("target shape does not match model output");

    const auto& layers = model.layers();
    const std::size_t depth = layers.size();

    // activations[l] is the input to layer l.
    std::vector<Eigen::MatrixXd> activations;
    activations.reserve(depth + 1);
    activations.push_back(batch.features);
    for (std::size_t l = 0; l < depth; ++l) {
        Eigen::MatrixXd z = layers[l].weights * activations.back();
        z.colwise() += layers[l].bias;
        if (l + 1 < depth) activate(z, model.activation());
        activations.push_back(std::move(z));
    }

    const auto n = static_cast<double>(batch.size());
    Gradient g;
    g.loss = (activations.back() - batch.targets).squaredNorm() / n;
    if (!std::isfinite(g.loss)) throw NonFiniteError(fmt::format("non-finite loss {}", g.loss));

    g.layers.resize(depth);
    Eigen::MatrixXd delta = (2.0 / n) * (activations.back() - batch.targets);
    for (std::size_t l = depth; l-- > 0;) {
        g.layers[l].weights.noalias() = delta * activations[l].transpose();
        g.layers[l].bias = delta.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd back = layers[l].weights.transpose() * delta;
        scale_by_derivative(back, activations[l], model.activation());
        delta = std::move(back);
    }
    for (const auto& layer : g.layers)
        if (!layer.weights.allFinite() || !layer.bias.allFinite())
            throw NonFiniteError("non-finite gradient");
    return g;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("learning_rate must be > 0");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

TrainResult train(Model model, const Samples& train_set, const TrainConfig& config) {
    config.validate();
    if (train_set.size() == 0) throw std::invalid_argument("empty training set");

    const std::size_t n = train_set.size();
    const std::size_t batch_size = std::min(config.batch_size, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(config.seed);

    std::vector<double> history;
    history.reserve(config.epochs);
    Samples batch;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double weighted = 0.0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            const std::size_t count = std::min(batch_size, n - start);
            batch.features.resize(train_set.features.rows(), count);
            batch.targets.resize(train_set.targets.rows(), count);
            for (std::size_t j = 0; j < count; ++j) {
                batch.features.col(j) = train_set.features.col(order[start + j]);
                batch.targets.col(j) = train_set.targets.col(order[start + j]);
            }
            Gradient g;
            try {
                g = gradient(model, batch);
            } catch (const NonFiniteError&) {
                throw TrainingDiverged(epoch, std::numeric_limits<double>::quiet_NaN());
            }
            weighted += g.loss * static_cast<double>(count);
            model.apply_update(g.layers, config.learning_rate);
        }
        const double epoch_loss = weighted / static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) throw TrainingDiverged(epoch, epoch_loss);
        history.push_back(epoch_loss);
    }
    if (!model.all_finite()) throw TrainingDiverged(config.epochs - 1, history.back());
    return {std::move(model), std::move(history)};
}

double predict(const Model& model, std::span<const double> features) {
    return forward(model, features).front();
}

nlohmann::json to_json(const Model& model) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : model.layers()) {
        std::vector<double> weights;
        weights.reserve(layer.weights.size());
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                weights.push_back(layer.weights(r, c));
        layers.push_back({{"rows", layer.weights.rows()},
                          {"cols", layer.weights.cols()},
                          {"weights", weights},
                          {"bias", std::vector<double>(layer.bias.data(),
                                                       layer.bias.data() + layer.bias.size())}});
    }
    return {{"activation", to_string(model.activation())},
            {"input_dim", model.input_dim()},
            {"output_dim", model.output_dim()},
            {"layers", layers}};
}

} // namespace swarmtune::mlp
