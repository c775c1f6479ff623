#include "swarmtune/experiment.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

using namespace swarmtune;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("swarmtune_cli_" + std::to_string(std::random_device{}()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string field; std::getline(ss, field, ',');) out.push_back(field);
    return out;
}

int cli(const std::string& args) {
    const std::string cmd = std::string("SWARMTUNE_LOG=warn \"") + SWARMTUNE_CLI_PATH + "\" " + args;
    return std::system(cmd.c_str());
}

json tiny_config() {
    return json::parse(R"({
      "schema_version": 1,
      "seed": 3,
      "dataset": {"synth": {"n_buildings": 1, "aps_per_building": 2, "weeks": 6, "base_rate": 2}},
      "days": ["wed"],
      "horizons": [60],
      "window": 5,
      "swarms": [{"population_size": 4, "max_iterations": 3}, {"population_size": 6, "max_iterations": 3}],
      "space": {"min_layers": 1, "max_layers": 2, "min_neurons": 1, "max_neurons": 8},
      "grid": {"layers": [1, 2], "neurons": [4, 8]},
      "train": {"learning_rate": 0.01, "epochs": 2, "batch_size": 64, "activation": "relu"}
    })");
}

fs::path write_config(const fs::path& dir, const json& j) {
    const auto p = dir / "config.json";
    std::ofstream(p) << j.dump(2);
    return p;
}

} // namespace

TEST_CASE("config json round trip") {
    const auto config = experiment::config_from_json(tiny_config());
    CHECK(config.seed == 3);
    REQUIRE(config.days.size() == 1);
    CHECK(config.days[0] == 3);
    CHECK(config.swarms.size() == 2);
    CHECK(config.window.n == 5);
    CHECK(config.grid.size() == 4);
    const auto again = experiment::config_from_json(experiment::to_json(config));
    CHECK(experiment::to_json(again) == experiment::to_json(config));
}

TEST_CASE("config defaults and validation") {
    const auto config = experiment::config_from_json(json{{"schema_version", 1}});
    CHECK(config.days.size() == 7);
    CHECK(config.horizons == std::vector<int>{60, 30, 15});
    CHECK(config.grid.size() == 200);
    CHECK(config.window.n == 20);
    CHECK(config.swarms.at(0).population_size == 10);
    CHECK(config.swarms.at(0).max_iterations == 10);

    CHECK_THROWS(experiment::config_from_json(json::object()));
    CHECK_THROWS(experiment::config_from_json(json{{"schema_version", 2}}));
    auto bad = tiny_config();
    bad["horizons"] = {50};
    CHECK_THROWS(experiment::config_from_json(bad));
    bad = tiny_config();
    bad["days"] = {"someday"};
    CHECK_THROWS(experiment::config_from_json(bad));
    bad = tiny_config();
    bad["grid"]["neurons"] = {4, 80};
    CHECK_THROWS(experiment::config_from_json(bad));
}

TEST_CASE("synth writes an identical log on every run") {
    TempDir dir;
    const auto cfg = write_config(dir.path, tiny_config());
    REQUIRE(cli("synth --config " + cfg.string() + " --out " + (dir.path / "a").string()) == 0);
    REQUIRE(cli("synth --config " + cfg.string() + " --out " + (dir.path / "b").string()) == 0);
    const auto a = slurp(dir.path / "a" / "connections.csv");
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(dir.path / "b" / "connections.csv"));
    CHECK(a.rfind("ap_id,date,time,mac,building\n", 0) == 0);
    REQUIRE(cli("synth --config " + cfg.string() + " --seed 4 --out " + (dir.path / "c").string()) == 0);
    CHECK(a != slurp(dir.path / "c" / "connections.csv"));
}

TEST_CASE("prepare writes one supervised file per day and horizon") {
    TempDir dir;
    const auto cfg = write_config(dir.path, tiny_config());
    REQUIRE(cli("synth --config " + cfg.string() + " --out " + dir.path.string()) == 0);
    REQUIRE(cli("prepare --config " + cfg.string() + " --input " + (dir.path / "connections.csv").string() +
                " --horizon 60 --horizon 15 --out " + (dir.path / "prep").string()) == 0);
    for (const char* day : {"sun", "mon", "tue", "wed", "thu", "fri", "sat"})
        for (int h : {15, 60}) {
            const auto p = dir.path / "prep" / ("supervised_" + std::string(day) + "_h" + std::to_string(h) + ".csv");
            REQUIRE(fs::exists(p));
            const auto content = lines(p);
            CHECK(content.size() > 1);
            CHECK(content[0].find(",target") != std::string::npos);
        }
    CHECK(fs::exists(dir.path / "prep" / "series.csv"));

    // datasets.csv: one row per day and horizon; weekday volume dominates.
    std::map<std::string, long> volume;
    const auto shape = lines(dir.path / "prep" / "datasets.csv");
    CHECK(shape.size() == 15);
    for (std::size_t i = 1; i < shape.size(); ++i) {
        const auto f = split(shape[i]);
        volume[f[0]] = std::stol(f[1]);
        const auto day_file = dir.path / "prep" / ("supervised_" + f[0] + "_h" + f[2] + ".csv");
        CHECK(std::stoul(f[3]) + 1 == lines(day_file).size());
    }
    for (const char* weekday : {"mon", "tue", "wed", "thu"}) {
        CHECK(volume[weekday] > volume["sat"]);
        CHECK(volume[weekday] > volume["sun"]);
    }

    // Targets in the file equal the series count one horizon later.
    std::map<std::string, int> series;
    for (const auto& line : lines(dir.path / "prep" / "series.csv")) {
        const auto f = split(line);
        if (f[0] == "building") continue;
        series[f[0] + "|" + f[1] + "|" + f[2]] = std::stoi(f[4]);
    }
    const auto rows = lines(dir.path / "prep" / "supervised_wed_h60.csv");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto f = split(rows[i]);
        const auto t = data::parse_timestamp(f[0].substr(0, 10), f[0].substr(11, 5));
        REQUIRE(t);
        const auto later = data::format_timestamp(*t + std::chrono::minutes{60});
        REQUIRE(std::stoi(f.back()) == series.at(f[1] + "|" + f[2] + "|" + later));
    }
}

TEST_CASE("prepare writes a header-only file for an absent day") {
    TempDir dir;
    std::ofstream(dir.path / "log.csv") << "ap_id,date,time,mac,building\n"
                                        << "A1,2016-01-20,08:00,m1,B1\n"
                                        << "A1,2016-01-20,09:00,m2,B1\n";
    REQUIRE(cli("prepare --input " + (dir.path / "log.csv").string() + " --horizon 60 --out " +
                (dir.path / "prep").string()) == 0);
    CHECK(lines(dir.path / "prep" / "supervised_sun_h60.csv").size() == 1);
    CHECK(lines(dir.path / "prep" / "supervised_wed_h60.csv").size() > 1);
    CHECK_FALSE(fs::exists(dir.path / "prep" / "supervised_sun_h60.csv.partial"));
}

TEST_CASE("tune output is identical for 1 and 3 workers and compare is recomputable") {
    TempDir dir;
    const auto cfg = write_config(dir.path, tiny_config());
    for (const char* method : {"grid", "pso"}) {
        REQUIRE(cli("tune --config " + cfg.string() + " --method " + method + " --workers 1 --out " +
                    (dir.path / "w1").string()) == 0);
        REQUIRE(cli("tune --config " + cfg.string() + " --method " + method + " --workers 3 --out " +
                    (dir.path / "w3").string()) == 0);
        const std::string tune = std::string("tune_") + method + ".json";
        const std::string evals = std::string("evals_") + method + ".csv";
        CHECK(slurp(dir.path / "w1" / tune) == slurp(dir.path / "w3" / tune));
        CHECK(slurp(dir.path / "w1" / evals) == slurp(dir.path / "w3" / evals));
        CHECK(fs::exists(dir.path / "w1" / (std::string("timing_") + method + ".csv")));
    }

    const auto grid_doc = json::parse(slurp(dir.path / "w1" / "tune_grid.json"));
    const auto pso_doc = json::parse(slurp(dir.path / "w1" / "tune_pso.json"));
    CHECK(grid_doc.at("schema_version") == 1);
    REQUIRE(grid_doc.at("results").size() == 1);
    REQUIRE(pso_doc.at("results").size() == 2);
    const auto& g = grid_doc["results"][0]["result"];
    CHECK(g["unique_configurations"] == 4);
    for (const auto& r : pso_doc["results"]) {
        const auto pop = r["population"].get<std::size_t>();
        CHECK(r["result"]["unique_configurations"].get<std::size_t>() <= pop * 4);
    }

    REQUIRE(cli("compare --out " + (dir.path / "cmp").string() + " " + (dir.path / "w1" / "tune_grid.json").string() +
                " " + (dir.path / "w1" / "tune_pso.json").string()) == 0);
    const auto rows = lines(dir.path / "cmp" / "comparison.csv");
    REQUIRE(rows.size() == 2);
    const auto header = split(rows[0]);
    const auto f = split(rows[1]);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = f.at(i);
    CHECK(row["dataset"] == "wed");
    // The smallest swarm is paired with the grid.
    const auto& p = pso_doc["results"][0]["result"];
    CHECK(std::stoul(row["pso_unique"]) == p["unique_configurations"].get<std::size_t>());
    const double expected = 1.0 - p["unique_configurations"].get<double>() / g["unique_configurations"].get<double>();
    CHECK(std::stod(row["reduction"]) == doctest::Approx(expected));
    CHECK(std::stod(row["grid_best_accuracy"]) == doctest::Approx(g["best_accuracy"].get<double>()));
    CHECK(lines(dir.path / "cmp" / "swarm_sizes.csv").size() == 3);
    CHECK(lines(dir.path / "cmp" / "accuracy_vs_model.csv").size() == 4);
}

TEST_CASE("cli failures exit non-zero") {
    TempDir dir;
    CHECK(cli("") != 0);
    CHECK(cli("tune --method random") != 0);
    CHECK(cli("prepare --input " + (dir.path / "missing.csv").string()) != 0);
    std::ofstream(dir.path / "bad.csv") << "ap_id,date\n";
    CHECK(cli("prepare --input " + (dir.path / "bad.csv").string() + " --out " + (dir.path / "o").string()) != 0);
    CHECK_FALSE(fs::exists(dir.path / "o" / "series.csv"));
}
