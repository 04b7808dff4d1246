#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cplab/harness.hpp"
#include "result_body.hpp"

using namespace cplab;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cplab_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small(const std::string& sub, const fs::path& dir) {
  ExperimentConfig cfg;
  cfg.subcommand = sub;
  cfg.out = (dir / sub).string();
  cfg.n = 200;
  cfg.n_grid = {50, 100};
  cfg.M = 1000;
  cfg.bootstrap = 5;
  cfg.grid_points = 801;
  cfg.zol_points = 201;
  return cfg;
}

}  // namespace

TEST_CASE("config files merge over defaults and reject unknown keys", "[harness]") {
  const auto dir = scratch_dir("config");
  const auto good = dir / "good.json";
  std::ofstream(good) << R"({"seed": 17, "model": {"rho": 0.3}, "n_grid": [10, 20]})";
  const auto cfg = load_config(good);
  CHECK(cfg.seed == 17);
  CHECK(cfg.model.rho == 0.3);
  CHECK(cfg.model.family == "gaussian");
  CHECK(cfg.n_grid == std::vector<std::size_t>{10, 20});

  const auto unknown = dir / "unknown.json";
  std::ofstream(unknown) << R"({"sed": 17})";
  CHECK_THROWS_AS(load_config(unknown), ConfigError);
  const auto nested = dir / "nested.json";
  std::ofstream(nested) << R"({"model": {"rhoo": 0.3}})";
  CHECK_THROWS_AS(load_config(nested), ConfigError);
  const auto typed = dir / "typed.json";
  std::ofstream(typed) << R"({"seed": "seventeen"})";
  CHECK_THROWS_AS(load_config(typed), ConfigError);
  const auto broken = dir / "broken.json";
  std::ofstream(broken) << "{";
  CHECK_THROWS_AS(load_config(broken), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}

TEST_CASE("config hash", "[harness]") {
  ExperimentConfig a, b;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("rate writes a four-row CSV with the config hash", "[harness]") {
  const auto dir = scratch_dir("rate");
  auto cfg = small("rate", dir);
  cfg.n_grid = {100, 300, 1000, 3000};
  std::ostringstream log;
  CHECK(run(cfg, 1, log) == exit_code::ok);
  std::istringstream csv(slurp(dir / "rate_rate.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "# cplab rate config_hash=" + config_hash(cfg));
  std::getline(csv, line);
  CHECK(line == "n,M,levy_hat,levy_err,envelope_ratio,zol_bound,seconds");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);
  const auto doc = nlohmann::json::parse(slurp(dir / "rate_rate.json"));
  CHECK(doc["config_hash"] == config_hash(cfg));
  CHECK(doc["config"]["subcommand"] == "rate");
  CHECK(doc["results"]["rows"].size() == 4);
}

TEST_CASE("theoretical zol evaluation", "[harness]") {
  const auto dir = scratch_dir("zol");
  auto cfg = small("zol", dir);
  cfg.theoretical = {{"C1", 1}, {"C2", 1}, {"C3", 1}, {"mu", 1}, {"r", 0.5}, {"b", 2}, {"n", 10000}};
  std::ostringstream log;
  CHECK(run(cfg, 1, log) == exit_code::ok);
  CHECK(std::stod(log.str()) == Catch::Approx(3.741943).margin(1e-6));
  cfg.theoretical["q"] = 1.0;
  CHECK_THROWS_AS(run(cfg, 1, log), ConfigError);
}

TEST_CASE("errors surface with their categories", "[harness]") {
  const auto dir = scratch_dir("errors");
  std::ostringstream log;
  auto cfg = small("nope", dir);
  CHECK_THROWS_AS(run(cfg, 1, log), ConfigError);
  cfg = small("rate", dir);
  cfg.model.family = "cauchy";
  CHECK_THROWS_AS(run(cfg, 1, log), InvalidParameter);
  cfg = small("invariant", dir);
  cfg.max_iter = 1;
  cfg.model.rho = 0.9;
  CHECK_THROWS_AS(run(cfg, 1, log), NumericalError);
  cfg = small("threshold", dir);
  cfg.model.theta0 = 0.0;
  CHECK_THROWS_AS(run(cfg, 1, log), UnidentifiableModel);
}

TEST_CASE("every subcommand is independent of the worker count", "[harness]") {
  for (const std::string sub : {"simulate", "invariant", "convergence", "rate", "audit", "zol", "threshold"}) {
    INFO(sub);
    const auto d1 = scratch_dir(sub + "_w1");
    auto c1 = small(sub, d1);
    const auto c3 = c1;
    std::ostringstream log;
    CHECK(run(c1, 1, log) == exit_code::ok);
    std::map<std::string, std::string> first;
    for (const auto& e : fs::directory_iterator(d1))
      first[e.path().filename()] = testing::result_body(e.path());
    CHECK(run(c3, 3, log) == exit_code::ok);
    CHECK(first.size() >= 2);
    for (const auto& [name, body] : first) {
      INFO(name);
      CHECK(testing::result_body(d1 / name) == body);
    }
  }
}

TEST_CASE("timing fields are the only thing stripped", "[harness]") {
  const auto dir = scratch_dir("strip");
  std::ofstream(dir / "a.csv") << "# h\nn,M,seconds\n1,2,0.5\n";
  std::ofstream(dir / "b.json") << R"({"rows": [{"n": 1, "seconds": 3.0}], "seconds": 1})";
  std::ofstream(dir / "c.csv") << "# h\nx,p\n1,2\n";
  CHECK(testing::result_body(dir / "a.csv") == "# h\nn,M\n1,2\n");
  CHECK(nlohmann::json::parse(testing::result_body(dir / "b.json")) ==
        nlohmann::json::parse(R"({"rows": [{"n": 1}]})"));
  CHECK(testing::result_body(dir / "c.csv") == "# h\nx,p\n1,2\n");
}
