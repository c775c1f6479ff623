#include "swarmtune/fitness.hpp"

#include "swarmtune/parallel.hpp"
#include "swarmtune/rng.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace swarmtune::fitness {

double window_accuracy(std::span<const double> predictions, std::span<const double> actuals,
                       ToleranceWindow window) {
    if (predictions.empty()) throw std::invalid_argument("window accuracy of an empty set");
    if (predictions.size() != actuals.size())
        throw std::invalid_argument("prediction and actual counts differ");
    if (window.n < 0) throw std::invalid_argument("tolerance window must be >= 0");

    std::size_t inside = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (!std::isfinite(predictions[i])) continue;
        const double rounded = std::floor(predictions[i] + 0.5);
        if (std::abs(rounded - actuals[i]) <= window.n) ++inside;
    }
    return static_cast<double>(inside) / static_cast<double>(predictions.size());
}

Outcome FitnessCache::guarded(const ComputeFn& compute, const NetworkTopology& topology) {
    try {
        return compute(topology);
    } catch (const std::exception& e) {
        return {0.0, 0.0, true, e.what()};
    }
}

double FitnessCache::evaluate(const NetworkTopology& topology, const ComputeFn& compute) {
    std::shared_ptr<Slot> slot;
    std::promise<Outcome> promise;
    bool owner = false;
    {
        std::lock_guard lock(mutex_);
        auto& existing = slots_[topology];
        if (existing) {
            slot = existing;
            log_.push_back({topology, true});
        } else {
            existing = std::make_shared<Slot>(Slot{topology, promise.get_future().share()});
            slot = existing;
            order_.push_back(slot);
            log_.push_back({topology, false});
            owner = true;
        }
    }
    if (owner) promise.set_value(guarded(compute, topology));
    return slot->outcome.get().accuracy;
}

std::vector<double> FitnessCache::evaluate_batch(std::span<const NetworkTopology> topologies,
                                                 const ComputeFn& compute, std::size_t workers) {
    std::vector<std::shared_ptr<Slot>> slots(topologies.size());
    std::vector<std::size_t> fresh;
    std::vector<std::promise<Outcome>> promises;
    {
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < topologies.size(); ++i) {
            auto& existing = slots_[topologies[i]];
            if (existing) {
                log_.push_back({topologies[i], true});
            } else {
                promises.emplace_back();
                existing = std::make_shared<Slot>(
                    Slot{topologies[i], promises.back().get_future().share()});
                order_.push_back(existing);
                log_.push_back({topologies[i], false});
                fresh.push_back(i);
            }
            slots[i] = existing;
        }
    }

    parallel_for(fresh.size(), workers, [&](std::size_t k) {
        promises[k].set_value(guarded(compute, topologies[fresh[k]]));
    });

    std::vector<double> scores;
    scores.reserve(slots.size());
    for (const auto& slot : slots) scores.push_back(slot->outcome.get().accuracy);
    return scores;
}

std::size_t FitnessCache::unique_evaluations() const {
    std::lock_guard lock(mutex_);
    return order_.size();
}

std::size_t FitnessCache::total_evaluations() const {
    std::lock_guard lock(mutex_);
    return log_.size();
}

std::optional<Outcome> FitnessCache::find(const NetworkTopology& topology) const {
    std::shared_ptr<Slot> slot;
    {
        std::lock_guard lock(mutex_);
        const auto it = slots_.find(topology);
        if (it == slots_.end()) return std::nullopt;
        slot = it->second;
    }
    return slot->outcome.get();
}

std::vector<CacheEntry> FitnessCache::entries() const {
    std::vector<std::shared_ptr<Slot>> order;
    {
        std::lock_guard lock(mutex_);
        order = order_;
    }
    std::vector<CacheEntry> out;
    out.reserve(order.size());
    for (const auto& slot : order) out.push_back({slot->topology, slot->outcome.get()});
    return out;
}

std::vector<LogEvent> FitnessCache::log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

void FitnessCache::write_log_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
    out << "index,num_hidden_layers,neurons_per_layer,accuracy,status,failed\n";
    std::size_t index = 0;
    for (const auto& event : log()) {
        const Outcome outcome = *find(event.topology);
        out << index++ << ',' << event.topology.num_hidden_layers << ','
            << event.topology.neurons_per_layer << ',' << fmt::format("{}", outcome.accuracy) << ','
            << (event.hit ? "hit" : "miss") << ',' << (outcome.failed ? 1 : 0) << '\n';
    }
    if (!out.flush()) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

void FitnessCache::write_timing_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
    out << "num_hidden_layers,neurons_per_layer,accuracy,train_seconds,failed\n";
    for (const auto& [topology, outcome] : entries())
        out << topology.num_hidden_layers << ',' << topology.neurons_per_layer << ','
            << fmt::format("{}", outcome.accuracy) << ','
            << fmt::format("{:.6f}", outcome.train_seconds) << ',' << (outcome.failed ? 1 : 0)
            << '\n';
    if (!out.flush()) throw std::runtime_error(fmt::format("write to '{}' failed", path.string()));
}

FunctionEvaluator::FunctionEvaluator(std::function<double(const NetworkTopology&)> fn,
                                     std::size_t workers)
    : fn_(std::move(fn)), workers_(workers) {}

std::vector<double> FunctionEvaluator::evaluate(std::span<const NetworkTopology> topologies) {
    return cache_.evaluate_batch(
        topologies, [this](const NetworkTopology& t) { return Outcome{fn_(t), 0.0, false, {}}; },
        workers_);
}

PreparedData prepare(const data::SupervisedSet& train, const data::SupervisedSet& test) {
    if (train.rows.empty() || test.rows.empty())
        throw std::invalid_argument("train and test sets must be non-empty");
    const auto dim = static_cast<Eigen::Index>(train.feature_dim());
    if (test.feature_dim() != train.feature_dim())
        throw std::invalid_argument("train and test feature schemas differ");

    const auto n_train = static_cast<Eigen::Index>(train.rows.size());
    const auto n_test = static_cast<Eigen::Index>(test.rows.size());

    PreparedData out;
    out.train.features.resize(dim, n_train);
    out.train.targets.resize(1, n_train);
    for (Eigen::Index j = 0; j < n_train; ++j) {
        const auto& row = train.rows[j];
        for (Eigen::Index f = 0; f < dim; ++f) out.train.features(f, j) = row.features[f];
        out.train.targets(0, j) = row.target;
    }

    out.feature_mean = out.train.features.rowwise().mean();
    out.feature_scale.resize(dim);
    for (Eigen::Index f = 0; f < dim; ++f) {
        const double var =
            (out.train.features.row(f).array() - out.feature_mean(f)).square().mean();
        out.feature_scale(f) = var > 1e-12 ? std::sqrt(var) : 1.0;
    }
    out.target_mean = out.train.targets.mean();
    const double target_var = (out.train.targets.array() - out.target_mean).square().mean();
    out.target_scale = target_var > 1e-12 ? std::sqrt(target_var) : 1.0;

    auto standardize = [&](Eigen::MatrixXd& m) {
        m.colwise() -= out.feature_mean;
        m.array().colwise() /= out.feature_scale.array();
    };
    standardize(out.train.features);
    out.train.targets.array() = (out.train.targets.array() - out.target_mean) / out.target_scale;

    out.test_features.resize(dim, n_test);
    out.test_actuals.reserve(test.rows.size());
    for (Eigen::Index j = 0; j < n_test; ++j) {
        const auto& row = test.rows[j];
        for (Eigen::Index f = 0; f < dim; ++f) out.test_features(f, j) = row.features[f];
        out.test_actuals.push_back(row.target);
    }
    standardize(out.test_features);
    return out;
}

std::uint64_t model_seed(std::uint64_t global_seed, const NetworkTopology& topology) {
    return derive_seed(global_seed, static_cast<std::uint64_t>(topology.num_hidden_layers),
                       static_cast<std::uint64_t>(topology.neurons_per_layer));
}

Outcome train_and_score(const NetworkTopology& topology, const PreparedData& data,
                        const ModelSettings& settings) {
    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    };

    const std::uint64_t seed = model_seed(settings.seed, topology);
    mlp::TrainConfig config = settings.train;
    config.seed = derive_seed(seed, 1);
    try {
        auto trained = mlp::train(mlp::build(topology, data.input_dim(), 1, seed, settings.activation),
                                  data.train, config);
        const Eigen::MatrixXd raw = mlp::forward_batch(trained.model, data.test_features);
        std::vector<double> predictions(raw.cols());
        for (Eigen::Index j = 0; j < raw.cols(); ++j) {
            predictions[j] = raw(0, j) * data.target_scale + data.target_mean;
            if (!std::isfinite(predictions[j]))
                return {0.0, elapsed(), true, "non-finite prediction"};
        }
        return {window_accuracy(predictions, data.test_actuals, settings.window), elapsed(), false, {}};
    } catch (const mlp::TrainingDiverged& e) {
        return {0.0, elapsed(), true, e.what()};
    }
}

double evaluate_topology(const NetworkTopology& topology, const PreparedData& data,
                         const ModelSettings& settings, FitnessCache& cache) {
    return cache.evaluate(topology, [&](const NetworkTopology& t) {
        return train_and_score(t, data, settings);
    });
}

ModelEvaluator::ModelEvaluator(std::shared_ptr<const PreparedData> data, ModelSettings settings,
                               std::size_t workers)
    : data_(std::move(data)), settings_(std::move(settings)), workers_(workers) {
    settings_.train.validate();
    if (settings_.window.n < 0) throw std::invalid_argument("tolerance window must be >= 0");
}

std::vector<double> ModelEvaluator::evaluate(std::span<const NetworkTopology> topologies) {
    return cache_.evaluate_batch(
        topologies,
        [this](const NetworkTopology& t) { return train_and_score(t, *data_, settings_); },
        workers_);
}

} // namespace swarmtune::fitness
