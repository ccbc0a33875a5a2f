#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bulkq/runner.hpp"
#include "bulkq/scenario.hpp"

using namespace bulkq;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* kMinimalConfig =
    "[queue]\n"
    "k = 1\n"
    "B = 1\n"
    "mu = 1\n"
    "[rate]\n"
    "type = constant\n"
    "a = 1\n"
    "[run]\n"
    "horizon = 1\n"
    "checkpoints = 1\n";

}  // namespace

TEST_CASE("minimal config parses with documented grid defaults") {
    const Scenario sc = parse_config(kMinimalConfig);
    CHECK(sc.queue.k == 1);
    CHECK(sc.queue.B == 1);
    CHECK(sc.queue.mu == 1.0);
    CHECK(sc.rate.is_constant());
    CHECK(sc.horizon == 1.0);
    REQUIRE(sc.checkpoints.size() == 1);
    CHECK(sc.checkpoints[0] == 1.0);
    CHECK(sc.grid.x_max == 25.0);
    CHECK(sc.grid.levels == 40);
    CHECK(sc.grid.cells == 25000);
    CHECK_FALSE(sc.has_spectral);
}

TEST_CASE("invariant violations carry line numbers") {
    SECTION("k exceeding B") {
        const char* cfg =
            "[queue]\n"
            "k = 3\n"
            "B = 2\n"
            "mu = 1\n"
            "[rate]\n"
            "type = constant\n"
            "a = 1\n";
        try {
            parse_config(cfg);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("k must not exceed B") != std::string::npos);
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SECTION("sinusoid dipping negative") {
        const char* cfg =
            "[queue]\n"
            "k = 1\n"
            "B = 1\n"
            "mu = 1\n"
            "[rate]\n"
            "type = sinusoid\n"
            "a = 0.5\n"
            "b = 0.9\n"
            "omega = 1\n"
            "phi = 0\n";
        try {
            parse_config(cfg);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("nonnegative") != std::string::npos);
        }
    }
    SECTION("unknown keys are rejected") {
        const std::string cfg = std::string(kMinimalConfig) + "[sim]\nn_repz = 5\n";
        try {
            parse_config(cfg);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("unknown key 'n_repz'") != std::string::npos);
            CHECK(std::string(e.what()).find("line 12") != std::string::npos);
        }
    }
    SECTION("malformed numbers are rejected") {
        const char* cfg =
            "[queue]\n"
            "k = 1\n"
            "B = 1\n"
            "mu = fast\n"
            "[rate]\n"
            "type = constant\n"
            "a = 1\n";
        CHECK_THROWS_AS(parse_config(cfg), ConfigError);
    }
    SECTION("missing required keys are rejected") {
        CHECK_THROWS_AS(parse_config("[queue]\nk = 1\nB = 1\n"), ConfigError);
        CHECK_THROWS_AS(parse_config("[queue]\nk = 1\nB = 1\nmu = 1\n"), ConfigError);
    }
}

TEST_CASE("serialization round-trips every valid scenario shape") {
    Scenario sc;
    sc.queue = QueueConfig(2, 3, 1.5);
    sc.rate = RateFunction::sinusoid(0.5, 0.3, 1.0, 0.25);
    sc.grid = GridConfig(16, 10.0, 2000);
    sc.horizon = 2.0;
    sc.checkpoints = {0.5, 1.0, 2.0};
    sc.has_spectral = true;
    sc.spectral.gammas = {{0.5, 0.0}, {0.25, -0.75}};
    sc.spectral.n_boundary = 6;
    sc.spectral.frozen_lambda = 0.8;
    sc.sim.n_reps = 5000;
    sc.sim.seed = 99;
    sc.out_dir = "artifacts";
    CHECK(parse_config(serialize_config(sc)) == sc);

    Scenario pw;
    pw.queue = QueueConfig(1, 2, 2.0);
    pw.rate = RateFunction::piecewise({1.0, 2.5}, {2.0, 0.5, 1.25});
    pw.grid = GridConfig(10, 12.5, 1250);
    pw.horizon = 3.0;
    pw.checkpoints = {3.0};
    pw.spectral.has_sweep = true;
    pw.spectral.sweep_start = -0.5;
    pw.spectral.sweep_stop = 2.0;
    pw.spectral.sweep_count = 11;
    pw.has_spectral = true;
    CHECK(parse_config(serialize_config(pw)) == pw);
}

TEST_CASE("solve artifacts are deterministic byte for byte") {
    const auto tmp = std::filesystem::temp_directory_path() / "bulkq_test_cli";
    std::filesystem::remove_all(tmp);
    const std::string cfg =
        "[queue]\nk = 1\nB = 1\nmu = 1\n"
        "[rate]\ntype = constant\na = 1\n"
        "[grid]\nN = 10\nx_max = 5\nM = 500\n"
        "[run]\nhorizon = 0.5\ncheckpoints = 0.25, 0.5\n"
        "[sim]\nn_reps = 400\nseed = 7\n";
    const Scenario sc = parse_config(cfg);
    REQUIRE(run_solve(sc, (tmp / "a").string(), 1) == 0);
    REQUIRE(run_solve(sc, (tmp / "b").string(), 1) == 0);
    CHECK(read_file(tmp / "a" / "trajectory.csv") == read_file(tmp / "b" / "trajectory.csv"));

    REQUIRE(run_simulate(sc, (tmp / "a").string(), 2) == 0);
    REQUIRE(run_simulate(sc, (tmp / "b").string(), 1) == 0);
    CHECK(read_file(tmp / "a" / "sim_estimate.csv") == read_file(tmp / "b" / "sim_estimate.csv"));
    std::filesystem::remove_all(tmp);
}

TEST_CASE("verify passes on a small constant-rate scenario") {
    const auto tmp = std::filesystem::temp_directory_path() / "bulkq_test_verify";
    std::filesystem::remove_all(tmp);
    const std::string cfg =
        "[queue]\nk = 1\nB = 1\nmu = 1\n"
        "[rate]\ntype = constant\na = 1\n"
        "[grid]\nN = 30\nx_max = 15\nM = 7500\n"
        "[run]\nhorizon = 1\ncheckpoints = 0.5, 1\n"
        "[spectral]\ngamma = 0.5\nn_b = 8\n"
        "[sim]\nn_reps = 20000\nseed = 11\n";
    const Scenario sc = parse_config(cfg);
    CHECK(run_verify(sc, tmp.string(), 2) == 0);
    const std::string report = read_file(tmp / "verify_report.txt");
    CHECK(report.find("conservation PASS") != std::string::npos);
    CHECK(report.find("pde_vs_chain PASS") != std::string::npos);
    CHECK(report.find("sim_vs_chain_3se PASS") != std::string::npos);
    CHECK(report.find("result PASS") != std::string::npos);
    std::filesystem::remove_all(tmp);
}

TEST_CASE("spectral workflow needs a resolvable frozen rate") {
    Scenario sc = parse_config(kMinimalConfig);
    sc.has_spectral = true;
    sc.spectral.gammas = {{0.5, 0.0}};
    sc.rate = RateFunction::sinusoid(1.0, 0.5, 1.0, 0.0);
    CHECK_THROWS_AS(detail::resolve_frozen_lambda(sc), ConfigError);
    sc.spectral.frozen_lambda = 1.0;
    CHECK(detail::resolve_frozen_lambda(sc) == 1.0);
}
