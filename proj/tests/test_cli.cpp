#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "wdro/cli.hpp"
#include "wdro/config.hpp"
#include "wdro/error.hpp"

using namespace wdro;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("wdro_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_config(const fs::path& dir, const std::string& body) {
  const auto p = dir / "config.json";
  std::ofstream(p) << body;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kBasic = R"({
  "space": {"boxes": [[0, 1]], "grid_resolution": 21},
  "cost": {"power_q": 1},
  "family": {"kind": "linear", "theta_box": [[0.5, 1]], "theta_grid_resolution": 3},
  "ground_truth": {"kind": "uniform_box"},
  "rho_list": [0.0, 0.02, 0.6],
  "n_list": [30],
  "trials": 12,
  "master_seed": 99
})";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("config round trip") {
  const auto dir = scratch("roundtrip");
  const auto path = write_config(dir, kBasic);
  const auto a = parse_config(path);
  CHECK(a.tol == 1e-8);
  CHECK(a.delta == 0.05);
  CHECK(a.space.grid_resolution() == 21);
  const auto b = parse_config_json(to_json(a), dir.string());
  CHECK(a == b);

  auto j = nlohmann::json::parse(kBasic);
  j["cost"]["p_norm"] = "inf";
  j["kernel"] = {{"kind", "truncated_laplace"}, {"scale", 0.5}, {"quadrature_nodes", 11}};
  j["reg"] = {{"tau", 0.1}, {"epsilon", 0.2}};
  j["rho_list"] = {0.9};
  const auto c = parse_config_json(j, dir.string());
  CHECK(std::isinf(c.cost.p_norm));
  CHECK(parse_config_json(to_json(c), dir.string()) == c);
}

TEST_CASE("config errors name the offending field") {
  auto j = nlohmann::json::parse(kBasic);
  j["rho_typo"] = 1;
  try {
    parse_config_json(j);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(e.path() == "rho_typo");
  }
  j = nlohmann::json::parse(kBasic);
  j["family"]["theta_box"] = {{1, 0}};
  CHECK_THROWS_AS(parse_config_json(j), ConfigError);
  j = nlohmann::json::parse(kBasic);
  j["reg"] = {{"epsilon", 0.1}};
  j["rho_list"] = {0.01};
  try {
    parse_config_json(j);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("increase rho") != std::string::npos);
    CHECK(e.path() == "rho_list[0]");
  }
}

TEST_CASE("exit codes") {
  const auto dir = scratch("exit");
  const auto path = write_config(dir, kBasic);
  CHECK(cli::dispatch({"nonsense", "--config", path}) == 1);
  CHECK(cli::dispatch({}) == 1);
  CHECK(cli::dispatch({"certify", "--config", (dir / "missing.json").string()}) == 2);
  CHECK(cli::dispatch({"certify", "--config", path, "--workers", "zero"}) == 1);
  std::ofstream(dir / "bad.json") << R"({"space": {"boxes": [[0, 1]]}, "family": {"kind": "linear", "theta_box": [[1, 1]]}, "rho_typo": 3})";
  CHECK(cli::dispatch({"certify", "--config", (dir / "bad.json").string(), "--quiet"}) == 2);
}

TEST_CASE("certify writes its outputs") {
  const auto dir = scratch("certify");
  const auto path = write_config(dir, kBasic);
  const auto out = dir / "out";
  REQUIRE(cli::dispatch({"certify", "--config", path, "--out", out.string(), "--quiet"}) == 0);
  CHECK(fs::file_size(out / "certificate.json") > 0);
  CHECK(fs::file_size(out / "rhomax.csv") > 0);
  const auto j = nlohmann::json::parse(slurp(out / "certificate.json"));
  CHECK(j["rho_crit"].get<double>() > 0.0);
  CHECK(j["alpha"].get<double>() > 0.0);
}

TEST_CASE("every subcommand succeeds and is byte-identical across worker counts") {
  const auto dir = scratch("determinism");
  auto j = nlohmann::json::parse(kBasic);
  j["kernel"] = {{"kind", "truncated_gaussian"}, {"sigma", 0.2}, {"quadrature_nodes", 11}};
  j["mu_points"] = 4;
  const auto std_path = write_config(dir, j.dump());
  auto jr = j;
  jr["reg"] = {{"tau", 0.0}, {"epsilon", 0.1}};
  jr["rho_list"] = {0.2, 0.5};
  std::ofstream(dir / "reg.json") << jr.dump();
  const auto reg_path = (dir / "reg.json").string();

  const std::vector<std::pair<std::string, std::string>> runs = {
      {"risk", std_path},     {"reg-risk", reg_path}, {"certify", std_path},
      {"coverage", std_path}, {"coverage", reg_path}, {"sweep", std_path},
      {"excess", std_path},   {"gap", std_path},      {"degeneracy", std_path}};
  int idx = 0;
  for (const auto& [cmd, cfg] : runs) {
    CAPTURE(cmd);
    const auto a = dir / ("a" + std::to_string(idx));
    const auto b = dir / ("b" + std::to_string(idx));
    ++idx;
    REQUIRE(cli::dispatch({cmd, "--config", cfg, "--out", a.string(), "--workers", "1", "--quiet"}) == 0);
    REQUIRE(cli::dispatch({cmd, "--config", cfg, "--out", b.string(), "--workers", "8", "--quiet"}) == 0);
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      ++files;
      CHECK(fs::file_size(e.path()) > 0);
      CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    }
    CHECK(files > 0);
  }
}

TEST_CASE("seed override changes coverage trials") {
  const auto dir = scratch("seed");
  const auto path = write_config(dir, kBasic);
  REQUIRE(cli::dispatch({"coverage", "--config", path, "--out", (dir / "a").string(), "--quiet"}) == 0);
  REQUIRE(cli::dispatch({"coverage", "--config", path, "--out", (dir / "b").string(), "--seed", "7", "--quiet"}) == 0);
  CHECK(slurp(dir / "a" / "trials.csv") != slurp(dir / "b" / "trials.csv"));
}

}  // TEST_SUITE
