#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "acceptance.hpp"
#include "commands.hpp"

using namespace fbsde;
using namespace fbsde::cli;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({"problem": {"builtin": "lq"}})";

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("fbsde_unit_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string first_line(const fs::path& file) {
    std::ifstream in(file);
    std::string line;
    std::getline(in, line);
    return line;
}

ExperimentConfig small_config(const std::string& name) {
    ExperimentConfig cfg = parse_config(
        R"({"problem": {"builtin": "lq"}, "grid": {"N": 10}, "monte_carlo": {"paths": 2000, "seed": 3}})");
    cfg.outputs.directory = scratch_dir(name);
    return cfg;
}

}  // namespace

TEST_CASE("config defaults", "[cli]") {
    const ExperimentConfig cfg = parse_config(kMinimal);
    CHECK(cfg.N == 100);
    CHECK(cfg.paths == 100000);
    CHECK(cfg.seed == 42);
    CHECK(cfg.lq.a == -1.0);
    CHECK(cfg.optimizer.seed == cfg.seed);
    CHECK(cfg.solver.projection_method == ProjectionMethod::weighted);
}

TEST_CASE("config errors name the offending key", "[cli]") {
    CHECK_THROWS_WITH(parse_config(R"({"problem": {"builtin": "lq"}, "monte_carlo": {"pathz": 10}})"),
                      Catch::Matchers::ContainsSubstring("monte_carlo.pathz"));
    CHECK_THROWS_WITH(parse_config(R"({"problem": {"builtin": "lq"}, "grid": {"N": 0}})"),
                      Catch::Matchers::ContainsSubstring("N >= 1"));
    CHECK_THROWS_WITH(parse_config(R"({"grid": {"N": 10}})"), Catch::Matchers::ContainsSubstring("problem"));
    CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
    CHECK_THROWS_WITH(parse_config(R"({"problem": {"builtin": "lq", "params": {"qu": "x"}}})"),
                      Catch::Matchers::ContainsSubstring("problem.params.qu"));
}

TEST_CASE("config hash covers the effective configuration", "[cli]") {
    const ExperimentConfig a = parse_config(kMinimal);
    const ExperimentConfig b = parse_config(R"({"problem": {"builtin": "lq"}, "grid": {"N": 100}})");
    const ExperimentConfig c = parse_config(R"({"problem": {"builtin": "lq"}, "grid": {"N": 50}})");
    const ExperimentConfig d = parse_config(R"({"problem": {"builtin": "lq"}, "monte_carlo": {"threads": 3}})");
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != c.hash());
    CHECK(a.hash() == d.hash());
    ExperimentConfig e = a;
    e.outputs.directory = "elsewhere";
    CHECK(a.hash() == e.hash());
    CHECK(a.hash().size() == 16);
    CHECK(a.header() == "# config_hash=" + a.hash() + " seed=42\n");
}

TEST_CASE("policy CSV round trip", "[cli]") {
    const ExperimentConfig cfg = parse_config(kMinimal);
    const ProblemSpec spec = cfg.spec();
    ControlPolicy pol(spec.control, 7);
    for (std::size_t n = 0; n < 7; ++n) {
        pol.theta(n, 0, 0) = 0.1 * static_cast<double>(n) - 1.0 / 3.0;
        pol.theta(n, 0, 1) = -0.7 + 1e-13 * static_cast<double>(n);
    }
    const fs::path file = scratch_dir("policy") / "p.csv";
    write_policy_csv(file, pol, cfg.header());
    CHECK(first_line(file).rfind("# config_hash=", 0) == 0);
    CHECK(read_policy_csv(file, spec.control, 7, pol.features()) == pol);
    CHECK_THROWS_AS(read_policy_csv(file, spec.control, 8, pol.features()), ConfigError);
}

TEST_CASE("simulate writes headed CSVs", "[cli]") {
    const ExperimentConfig cfg = small_config("simulate");
    std::ostringstream out, log;
    CHECK(run_command("simulate", cfg, out, log) == kExitPass);
    for (const char* name : {"paths.csv", "rho_martingale.csv"})
        CHECK(first_line(cfg.outputs.directory / name) == "# config_hash=" + cfg.hash() + " seed=3");
}

TEST_CASE("grad-check includes the zero direction", "[cli]") {
    ExperimentConfig cfg = small_config("grad_check");
    cfg.grad_check.directions = 1;
    std::ostringstream out, log;
    run_command("grad-check", cfg, out, log);
    const std::string table = out.str();
    CHECK(table.find("\nzero,0,0,") != std::string::npos);
}

TEST_CASE("verify-mp fails on a non-optimal policy", "[cli]") {
    const ExperimentConfig cfg = small_config("verify");
    std::ostringstream out, log;
    CHECK(run_command("verify-mp", cfg, out, log) == kExitCheckFailed);
    const fs::path report = cfg.outputs.directory / "report.json";
    REQUIRE(fs::exists(report));
    std::ifstream in(report);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().find("\"config_hash\"") != std::string::npos);
}
