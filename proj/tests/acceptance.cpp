// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
// SWARMTUNE_ACCEPT_SEEDS (default 5) shrinks the search study for quick runs;
// the swarm-size study uses the first min(3, seeds) seeds.

#include "swarmtune/experiment.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

using namespace swarmtune;
namespace fs = std::filesystem;
namespace chr = std::chrono;

namespace {

int failures = 0;

void report(bool ok, std::string_view name, const std::string& detail) {
    fmt::print("{} {}: {}\n", ok ? "PASS" : "FAIL", name, detail);
    std::fflush(stdout);
    if (!ok) ++failures;
}

double seconds_since(chr::steady_clock::time_point t0) {
    return chr::duration<double>(chr::steady_clock::now() - t0).count();
}

// Training outcomes are a pure function of (task, settings, topology), so the
// grid and every swarm of one seed can share them. Each search still counts
// through its own cache.
class SharedOutcomes {
public:
    SharedOutcomes(std::shared_ptr<const fitness::PreparedData> data, fitness::ModelSettings settings)
        : data_(std::move(data)), settings_(std::move(settings)) {}

    fitness::Outcome get(const NetworkTopology& t) {
        {
            std::lock_guard lock(mutex_);
            if (auto it = done_.find(t); it != done_.end()) return it->second;
        }
        auto outcome = fitness::train_and_score(t, *data_, settings_);
        std::lock_guard lock(mutex_);
        return done_.emplace(t, std::move(outcome)).first->second;
    }
    std::size_t trained() const {
        std::lock_guard lock(mutex_);
        return done_.size();
    }

private:
    std::shared_ptr<const fitness::PreparedData> data_;
    fitness::ModelSettings settings_;
    mutable std::mutex mutex_;
    std::map<NetworkTopology, fitness::Outcome> done_;
};

class SharedEvaluator final : public fitness::Evaluator {
public:
    explicit SharedEvaluator(SharedOutcomes& outcomes) : outcomes_(outcomes) {}
    std::vector<double> evaluate(std::span<const NetworkTopology> topologies) override {
        return cache_.evaluate_batch(
            topologies, [this](const NetworkTopology& t) { return outcomes_.get(t); }, 1);
    }
    const fitness::FitnessCache& cache() const override { return cache_; }

private:
    SharedOutcomes& outcomes_;
    fitness::FitnessCache cache_;
};

experiment::ExperimentConfig study_config(std::uint64_t seed) {
    experiment::ExperimentConfig c;
    c.seed = seed;
    c.dataset.synth.n_buildings = 2;
    c.dataset.synth.aps_per_building = 3;
    c.dataset.synth.weeks = 6;
    c.days = {3};  // Wednesday
    c.horizons = {60};
    c.window = {20};
    pso::SwarmConfig swarm;
    swarm.population_size = 10;
    swarm.max_iterations = 10;
    swarm.velocity_clamp_fraction = 0.1;
    c.swarms = {swarm};
    c.grid = search::GridSpec::standard();
    return c;
}

struct SeedOutcome {
    search::SearchResult grid, pso10, pso50;
    bool has50 = false;
};

SeedOutcome run_seed(std::uint64_t seed, bool with_pop50) {
    const auto config = study_config(seed);
    const auto log = experiment::index_days(experiment::load_records(config), config.bucket_minutes);
    const auto task = experiment::build_task(log, 3, 60);
    const auto tseed = experiment::task_seed(config.seed, task.day, task.horizon_minutes);
    SharedOutcomes outcomes(std::make_shared<const fitness::PreparedData>(fitness::prepare(task.train, task.test)),
                            fitness::ModelSettings{config.train, config.activation, config.window, tseed});

    SeedOutcome out;
    {
        SharedEvaluator eval(outcomes);
        out.grid = search::grid_search(config.grid, eval);
    }
    auto swarm_run = [&](std::size_t pop) {
        pso::SwarmConfig s = config.swarms.front();
        s.population_size = pop;
        s.seed = derive_seed(tseed, pop);
        SharedEvaluator eval(outcomes);
        return search::pso_search(s, config.space, eval);
    };
    out.pso10 = swarm_run(10);
    if (with_pop50) {
        out.pso50 = swarm_run(50);
        out.has50 = true;
    }
    return out;
}

void search_studies(std::size_t seeds) {
    const auto t0 = chr::steady_clock::now();
    bool unique_ok = true, accuracy_ok = true, size_ok = true;
    std::string unique_detail, accuracy_detail, size_detail;
    std::size_t size_seeds = 0;
    for (std::size_t s = 0; s < seeds; ++s) {
        const auto ts = chr::steady_clock::now();
        const bool with50 = s < 3;
        const auto r = run_seed(s, with50);
        const auto row = search::compare(r.pso10, r.grid, "wed", 60);
        const bool u = 2 * r.pso10.unique_configurations <= r.grid.unique_configurations;
        const bool a = r.pso10.best_accuracy >= r.grid.best_accuracy - 0.02;
        unique_ok &= u;
        accuracy_ok &= a;
        unique_detail += fmt::format(" s{}={}/{}", s, r.pso10.unique_configurations, r.grid.unique_configurations);
        accuracy_detail += fmt::format(" s{}={:.4f}/{:.4f}", s, r.pso10.best_accuracy, r.grid.best_accuracy);
        fmt::print("  seed {}: grid best {} acc {:.4f}; pso best {} acc {:.4f} unique {} total {} iters {}; "
                   "reduction {:.1f}% (reference range 77-85%)",
                   s, to_string(r.grid.best_topology), r.grid.best_accuracy, to_string(r.pso10.best_topology),
                   r.pso10.best_accuracy, r.pso10.unique_configurations, r.pso10.total_evaluations,
                   r.pso10.iterations, 100 * row.reduction);
        if (r.has50) {
            const bool z = std::abs(r.pso10.best_accuracy - r.pso50.best_accuracy) <= 0.05;
            size_ok &= z;
            ++size_seeds;
            size_detail += fmt::format(" s{}={:.4f}/{:.4f}", s, r.pso10.best_accuracy, r.pso50.best_accuracy);
            fmt::print("; pop50 best {} acc {:.4f} unique {}", to_string(r.pso50.best_topology),
                       r.pso50.best_accuracy, r.pso50.unique_configurations);
        }
        fmt::print(" [{:.0f} s]\n", seconds_since(ts));
        std::fflush(stdout);
    }
    const double elapsed = seconds_since(t0);
    report(unique_ok && accuracy_ok, "pso_vs_grid",
           fmt::format("{} seeds; pso unique <= 50% of grid:{} |{}; pso best >= grid best - 0.02:{} |{}; {:.0f} s",
                       seeds, unique_ok ? "yes" : "no", unique_detail, accuracy_ok ? "yes" : "no",
                       accuracy_detail, elapsed));
    report(size_ok && size_seeds > 0, "swarm_size",
           fmt::format("{} seeds; |pop10 - pop50| best accuracy <= 0.05 (pop10/pop50):{}", size_seeds, size_detail));
}

double sphere(std::span<const double> x) {
    double s = 0;
    for (double v : x) s += v * v;
    return -s;
}

void pso_sanity() {
    int hits = 0;
    bool monotone = true;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        pso::SwarmConfig c;
        c.population_size = 25;
        c.max_iterations = 100;
        c.early_stop = false;
        c.seed = seed;
        const auto r = pso::run(c, pso::Bounds({{-5, 5}, {-5, 5}}), pso::FitnessFn(sphere));
        hits += std::hypot(r.best_position[0], r.best_position[1]) < 0.1;
        for (std::size_t i = 1; i < r.history.size(); ++i)
            monotone &= r.history[i].gbest_fitness >= r.history[i - 1].gbest_fitness;
    }
    report(hits >= 19 && monotone, "pso_sphere",
           fmt::format("|best| < 0.1 on {}/20 seeds; gbest monotone: {}", hits, monotone ? "yes" : "no"));
}

void gradient_check() {
    const double h = 1e-5;
    double worst = 0;
    std::size_t cases = 0;
    for (std::uint64_t seed : {11u, 12u, 13u})
        for (NetworkTopology topo : {NetworkTopology{1, 4}, NetworkTopology{2, 8}, NetworkTopology{3, 16}}) {
            std::mt19937_64 gen(seed);
            std::normal_distribution<double> g;
            const int in = 9, n = 8;
            mlp::Samples s{Eigen::MatrixXd(in, n), Eigen::MatrixXd(1, n)};
            for (int c = 0; c < n; ++c) {
                for (int r = 0; r < in; ++r) s.features(r, c) = g(gen);
                s.targets(0, c) = g(gen);
            }
            auto model = mlp::build(topo, in, 1, seed);
            auto p = model.parameters();
            for (double& v : p) v += 0.1 * g(gen);
            model.set_parameters(p);
            const auto analytic = mlp::gradient(model, s).flatten();
            for (std::size_t i = 0; i < p.size(); ++i) {
                auto q = p;
                q[i] = p[i] + h;
                model.set_parameters(q);
                const double up = mlp::loss(mlp::forward_batch(model, s.features), s.targets);
                q[i] = p[i] - h;
                model.set_parameters(q);
                const double down = mlp::loss(mlp::forward_batch(model, s.features), s.targets);
                const double numeric = (up - down) / (2 * h);
                const double denom = std::max(1e-6, std::abs(numeric) + std::abs(analytic[i]));
                worst = std::max(worst, std::abs(numeric - analytic[i]) / denom);
            }
            model.set_parameters(p);
            ++cases;
        }
    report(worst < 1e-4, "gradient", fmt::format("{} cases, max relative error {:.3e} (< 1e-4)", cases, worst));
}

void window_check() {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> pred(-20, 400);
    std::uniform_int_distribution<int> act(0, 350), win(0, 60), len(1, 100);
    std::size_t mismatches = 0, non_monotone = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = len(gen), w = win(gen);
        std::vector<double> p(n), a(n);
        for (int i = 0; i < n; ++i) p[i] = pred(gen), a[i] = act(gen);
        int inside = 0;
        for (int i = 0; i < n; ++i) {
            long r = static_cast<long>(std::floor(p[i]));
            if (p[i] - r >= 0.5) ++r;
            inside += std::labs(r - static_cast<long>(a[i])) <= w;
        }
        const double got = fitness::window_accuracy(p, a, {w});
        mismatches += got != static_cast<double>(inside) / n;
        non_monotone += fitness::window_accuracy(p, a, {w + 1}) < got;
    }
    report(mismatches == 0 && non_monotone == 0, "window_accuracy",
           fmt::format("1000 fuzzed cases, {} mismatches, {} monotonicity violations", mismatches, non_monotone));
}

void data_oracles() {
    std::size_t bucket_bad = 0, shift_bad = 0, rows = 0, buckets = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 gen(seed);
        const int days = 1 + static_cast<int>(seed % 4);
        std::uniform_int_distribution<int> minute(0, days * 1440 - 1), mac(0, 40), loc(0, 5);
        const auto start = *data::parse_timestamp("2016-02-01", "00:00");
        std::vector<data::ConnectionRecord> records;
        for (int i = 0; i < 3000; ++i) {
            const int l = loc(gen);
            records.push_back({"AP" + std::to_string(l % 3), start + chr::minutes{minute(gen)},
                               "m" + std::to_string(mac(gen)), "B" + std::to_string(l / 3)});
        }
        std::map<std::tuple<std::string, std::string, long>, std::set<std::string>> macs;
        for (const auto& r : records) {
            const long m = r.timestamp.time_since_epoch().count();
            macs[{r.building, r.ap_id, m - m % 15}].insert(r.mac);
        }
        const auto series = data::bucket_counts(records, 15);
        std::map<std::tuple<std::string, std::string, long>, int> count;
        for (const auto& s : series)
            for (const auto& b : s.buckets) {
                const long m = b.start.time_since_epoch().count();
                const auto it = macs.find({s.location.building, s.location.ap_id, m});
                bucket_bad += b.count != (it == macs.end() ? 0 : static_cast<int>(it->second.size()));
                count[{s.location.building, s.location.ap_id, m}] = b.count;
                ++buckets;
            }
        for (int h : {15, 30, 60}) {
            const auto set = data::build_supervised(series, h);
            std::size_t expected_rows = 0;
            for (const auto& [key, c] : count)
                expected_rows += count.count({std::get<0>(key), std::get<1>(key), std::get<2>(key) + h});
            shift_bad += set.rows.size() != expected_rows;
            for (const auto& row : set.rows) {
                const auto& l = set.locations[row.location];
                const long m = row.time.time_since_epoch().count();
                const auto lag = [&](int k) {
                    const auto it = count.find({l.building, l.ap_id, m - k});
                    return it == count.end() ? 0.0 : static_cast<double>(it->second);
                };
                const std::size_t base = set.locations.size();
                shift_bad += row.target != count.at({l.building, l.ap_id, m + h});
                shift_bad += row.features[base + 3] != lag(0);
                shift_bad += row.features[base + 4] != lag(15);
                shift_bad += row.features[base + 5] != lag(30);
                ++rows;
            }
        }
    }
    report(bucket_bad == 0 && shift_bad == 0, "data_oracles",
           fmt::format("{} buckets, {} supervised rows; {} bucket and {} shift mismatches", buckets, rows,
                       bucket_bad, shift_bad));
}

void termination() {
    pso::SwarmConfig c;
    c.early_stop = false;
    const auto full = pso::run(c, pso::Bounds({{-5, 5}, {-5, 5}}), pso::FitnessFn(sphere));
    pso::SwarmConfig k;
    const auto flat = pso::run(k, pso::Bounds({{-5, 5}, {-5, 5}}),
                               pso::FitnessFn([](std::span<const double>) { return 0.25; }));
    report(full.iterations_run == 10 && flat.iterations_run == 2, "termination",
           fmt::format("max_iterations=10 ran {}; constant fitness ran {}", full.iterations_run, flat.iterations_run));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void determinism() {
    const auto dir = fs::temp_directory_path() / fmt::format("swarmtune_accept_{}", std::random_device{}());
    fs::create_directories(dir);
    auto config = study_config(7);
    config.grid = {{1, 4, 8}, {10, 60, 120, 200}};
    const auto cfg = dir / "config.json";
    std::ofstream(cfg) << experiment::to_json(config).dump(2);

    bool identical = true;
    std::vector<std::string> compared;
    for (const char* method : {"pso", "grid"}) {
        for (int workers : {1, 8}) {
            const auto cmd = fmt::format("SWARMTUNE_LOG=warn \"{}\" tune --config \"{}\" --method {} --workers {} --out \"{}\"",
                                         SWARMTUNE_CLI_PATH, cfg.string(), method, workers,
                                         (dir / fmt::format("w{}", workers)).string());
            if (std::system(cmd.c_str()) != 0) identical = false;
        }
        for (const auto& name : {fmt::format("tune_{}.json", method), fmt::format("evals_{}.csv", method)}) {
            const auto a = slurp(dir / "w1" / name), b = slurp(dir / "w8" / name);
            identical &= !a.empty() && a == b;
            compared.push_back(name);
        }
    }
    fs::remove_all(dir);
    report(identical, "determinism",
           fmt::format("--workers 1 vs 8 byte-identical for {}", fmt::join(compared, ", ")));
}

} // namespace

int main() {
    std::size_t seeds = 5;
    if (const char* env = std::getenv("SWARMTUNE_ACCEPT_SEEDS"); env && *env) seeds = std::stoul(env);
    const auto t0 = chr::steady_clock::now();

    pso_sanity();
    gradient_check();
    window_check();
    data_oracles();
    termination();
    determinism();
    search_studies(seeds);

    fmt::print("{} criteria failed; {:.0f} s total\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
