#include "wdro/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>

#include "wdro/error.hpp"

namespace wdro {

using nlohmann::json;

namespace {

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

void reject_unknown(const json& j, const std::string& path, std::set<std::string> allowed) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(join(path, it.key()), "unknown key");
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "expected a finite number");
  return v;
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

std::vector<double> get_numbers(const json& j, const std::string& path) {
  if (j.is_number()) return {get_number(j, path)};
  if (!j.is_array()) throw ConfigError(path, "expected a number or an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(get_number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

std::vector<Interval> get_boxes(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path, "expected an array of [lo, hi] pairs");
  std::vector<Interval> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].size() != 2) throw ConfigError(p, "expected [lo, hi]");
    const Interval b{get_number(j[i][0], p + "[0]"), get_number(j[i][1], p + "[1]")};
    if (b.lo > b.hi) throw ConfigError(p, "lo must be <= hi");
    out.push_back(b);
  }
  return out;
}

std::string resolve(const std::string& file, const std::string& base_dir, const std::string& path) {
  namespace fs = std::filesystem;
  fs::path p(file);
  if (p.is_relative()) p = fs::path(base_dir) / p;
  if (!fs::exists(p)) throw ConfigError(path, "file '" + p.string() + "' does not exist");
  return p.lexically_normal().string();
}

template <typename F>
auto guarded(const std::string& path, F&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

}  // namespace

ExperimentConfig parse_config_json(const json& j, const std::string& base_dir) {
  reject_unknown(j, "", {"space", "cost", "family", "kernel", "reg", "ground_truth", "solver", "rho",
                         "rho_list", "n", "n_list", "trials", "delta", "master_seed",
                         "output_dir", "lambda_grid", "target_coverage", "mu_points"});
  ExperimentConfig c;

  // space
  if (!j.contains("space")) throw ConfigError("space", "missing required block");
  {
    const auto& s = j["space"];
    reject_unknown(s, "space", {"boxes", "alphabets", "grid_resolution"});
    std::vector<Interval> boxes;
    if (s.contains("boxes")) boxes = get_boxes(s["boxes"], "space.boxes");
    std::vector<int> alphabets;
    if (s.contains("alphabets")) {
      if (!s["alphabets"].is_array()) throw ConfigError("space.alphabets", "expected an array");
      for (std::size_t i = 0; i < s["alphabets"].size(); ++i)
        alphabets.push_back(get_int(s["alphabets"][i], "space.alphabets[" + std::to_string(i) + "]"));
    }
    const int res = s.contains("grid_resolution") ? get_int(s["grid_resolution"], "space.grid_resolution") : 41;
    c.space = guarded("space", [&] { return SampleSpace(boxes, alphabets, res); });
  }

  // cost
  if (j.contains("cost")) {
    const auto& s = j["cost"];
    reject_unknown(s, "cost", {"p_norm", "power_q", "label_weight_kappa", "label_power"});
    if (s.contains("p_norm")) {
      if (s["p_norm"].is_string()) {
        if (s["p_norm"].get<std::string>() != "inf") throw ConfigError("cost.p_norm", "expected a number or \"inf\"");
        c.cost.p_norm = std::numeric_limits<double>::infinity();
      } else {
        c.cost.p_norm = get_number(s["p_norm"], "cost.p_norm");
      }
    }
    if (s.contains("power_q")) c.cost.power_q = get_number(s["power_q"], "cost.power_q");
    if (s.contains("label_weight_kappa"))
      c.cost.label_weight_kappa = get_number(s["label_weight_kappa"], "cost.label_weight_kappa");
    if (s.contains("label_power")) c.cost.label_power = get_number(s["label_power"], "cost.label_power");
    guarded("cost", [&] { c.cost.validate(); return 0; });
  }

  // family
  if (!j.contains("family")) throw ConfigError("family", "missing required block");
  {
    const auto& s = j["family"];
    reject_unknown(s, "family", {"kind", "theta_box", "theta_grid_resolution", "kmeans_clusters", "tables_csv"});
    if (!s.contains("kind") || !s["kind"].is_string()) throw ConfigError("family.kind", "expected a string");
    c.family.kind = guarded("family.kind", [&] { return loss_kind_from_string(s["kind"].get<std::string>()); });
    if (s.contains("theta_box")) c.family.theta_box = get_boxes(s["theta_box"], "family.theta_box");
    if (s.contains("theta_grid_resolution"))
      c.family.theta_grid_resolution = get_int(s["theta_grid_resolution"], "family.theta_grid_resolution");
    if (s.contains("kmeans_clusters"))
      c.family.kmeans_clusters = get_int(s["kmeans_clusters"], "family.kmeans_clusters");
    if (s.contains("tables_csv")) {
      if (!s["tables_csv"].is_string()) throw ConfigError("family.tables_csv", "expected a string");
      c.family.tables_csv = resolve(s["tables_csv"].get<std::string>(), base_dir, "family.tables_csv");
    }
    if (c.family.kind == LossKind::tabulated && c.family.tables_csv.empty())
      throw ConfigError("family.tables_csv", "required for the tabulated kind");
  }

  if (j.contains("kernel")) {
    const auto& s = j["kernel"];
    reject_unknown(s, "kernel", {"kind", "sigma", "scale", "quadrature_nodes"});
    ReferenceKernel k;
    if (s.contains("kind")) {
      if (!s["kind"].is_string()) throw ConfigError("kernel.kind", "expected a string");
      k.kind = guarded("kernel.kind", [&] { return kernel_kind_from_string(s["kind"].get<std::string>()); });
    }
    if (s.contains("sigma")) k.sigma = get_number(s["sigma"], "kernel.sigma");
    if (s.contains("scale")) k.scale = get_number(s["scale"], "kernel.scale");
    if (s.contains("quadrature_nodes")) k.quadrature_nodes = get_int(s["quadrature_nodes"], "kernel.quadrature_nodes");
    guarded("kernel", [&] { k.validate(); return 0; });
    c.kernel = k;
  }
  if (j.contains("reg")) {
    const auto& s = j["reg"];
    reject_unknown(s, "reg", {"tau", "epsilon"});
    RegParams r;
    if (s.contains("tau")) r.tau = get_number(s["tau"], "reg.tau");
    if (s.contains("epsilon")) r.epsilon = get_number(s["epsilon"], "reg.epsilon");
    guarded("reg", [&] { r.validate(); return 0; });
    c.reg = r;
    if (!c.kernel) c.kernel = ReferenceKernel{};
  }

  if (j.contains("ground_truth")) {
    const auto& s = j["ground_truth"];
    reject_unknown(s, "ground_truth", {"kind", "mean", "sigma", "class_means", "class_probs", "path", "replace"});
    auto& g = c.ground_truth;
    if (s.contains("kind")) {
      if (!s["kind"].is_string()) throw ConfigError("ground_truth.kind", "expected a string");
      g.kind = guarded("ground_truth.kind", [&] { return truth_kind_from_string(s["kind"].get<std::string>()); });
    }
    if (s.contains("mean")) g.mean = get_numbers(s["mean"], "ground_truth.mean");
    if (s.contains("sigma")) g.sigma = get_numbers(s["sigma"], "ground_truth.sigma");
    if (s.contains("class_means")) {
      if (!s["class_means"].is_array()) throw ConfigError("ground_truth.class_means", "expected an array");
      for (std::size_t i = 0; i < s["class_means"].size(); ++i)
        g.class_means.push_back(get_numbers(s["class_means"][i], "ground_truth.class_means[" + std::to_string(i) + "]"));
    }
    if (s.contains("class_probs")) g.class_probs = get_numbers(s["class_probs"], "ground_truth.class_probs");
    if (s.contains("path")) {
      if (!s["path"].is_string()) throw ConfigError("ground_truth.path", "expected a string");
      g.path = resolve(s["path"].get<std::string>(), base_dir, "ground_truth.path");
    }
    if (s.contains("replace")) {
      if (!s["replace"].is_boolean()) throw ConfigError("ground_truth.replace", "expected a boolean");
      g.replace = s["replace"].get<bool>();
    }
    if (g.kind == TruthKind::dataset && g.path.empty())
      throw ConfigError("ground_truth.path", "required for the dataset kind");
    if (g.kind != TruthKind::dataset) guarded("ground_truth", [&] { g.validate(c.space); return 0; });
  }

  if (j.contains("solver")) {
    const auto& s = j["solver"];
    reject_unknown(s, "solver", {"tol", "tie_tol", "degeneracy_tol", "refine"});
    if (s.contains("tol")) c.tol = get_number(s["tol"], "solver.tol");
    if (s.contains("tie_tol")) c.tie_tol = get_number(s["tie_tol"], "solver.tie_tol");
    if (s.contains("degeneracy_tol")) c.degeneracy_tol = get_number(s["degeneracy_tol"], "solver.degeneracy_tol");
    if (s.contains("refine")) {
      if (!s["refine"].is_boolean()) throw ConfigError("solver.refine", "expected a boolean");
      c.refine = s["refine"].get<bool>();
    }
    if (!(c.tol > 0.0)) throw ConfigError("solver.tol", "must be > 0");
  }

  if (j.contains("rho") && j.contains("rho_list")) throw ConfigError("rho", "give either rho or rho_list");
  if (j.contains("rho")) c.rho_list = {get_number(j["rho"], "rho")};
  if (j.contains("rho_list")) c.rho_list = get_numbers(j["rho_list"], "rho_list");
  for (std::size_t i = 0; i < c.rho_list.size(); ++i)
    if (!(c.rho_list[i] >= 0.0)) throw ConfigError(j.contains("rho") ? "rho" : "rho_list[" + std::to_string(i) + "]", "must be >= 0");

  if (j.contains("n") && j.contains("n_list")) throw ConfigError("n", "give either n or n_list");
  if (j.contains("n")) c.n_list = {get_int(j["n"], "n")};
  if (j.contains("n_list")) {
    if (!j["n_list"].is_array()) throw ConfigError("n_list", "expected an array of integers");
    for (std::size_t i = 0; i < j["n_list"].size(); ++i)
      c.n_list.push_back(get_int(j["n_list"][i], "n_list[" + std::to_string(i) + "]"));
  }
  for (int n : c.n_list)
    if (n < 1) throw ConfigError(j.contains("n") ? "n" : "n_list", "sample sizes must be >= 1");

  if (j.contains("trials")) c.trials = get_int(j["trials"], "trials");
  if (c.trials < 1) throw ConfigError("trials", "must be >= 1");
  if (j.contains("delta")) c.delta = get_number(j["delta"], "delta");
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("delta", "must lie in (0, 1)");
  if (j.contains("master_seed")) {
    if (!j["master_seed"].is_number_unsigned() && !j["master_seed"].is_number_integer())
      throw ConfigError("master_seed", "expected a nonnegative integer");
    if (j["master_seed"].is_number_integer() && j["master_seed"].get<std::int64_t>() < 0)
      throw ConfigError("master_seed", "expected a nonnegative integer");
    c.master_seed = j["master_seed"].get<std::uint64_t>();
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ConfigError("output_dir", "expected a string");
    c.output_dir = j["output_dir"].get<std::string>();
  }
  if (j.contains("lambda_grid")) {
    c.lambda_grid = get_numbers(j["lambda_grid"], "lambda_grid");
    for (std::size_t i = 0; i < c.lambda_grid.size(); ++i)
      if (c.lambda_grid[i] < 0.0 || (i > 0 && c.lambda_grid[i] < c.lambda_grid[i - 1]))
        throw ConfigError("lambda_grid", "must be nonnegative and ascending");
  }
  if (j.contains("target_coverage")) c.target_coverage = get_number(j["target_coverage"], "target_coverage");
  if (!(c.target_coverage > 0.0 && c.target_coverage <= 1.0))
    throw ConfigError("target_coverage", "must lie in (0, 1]");
  if (j.contains("mu_points")) c.mu_points = get_int(j["mu_points"], "mu_points");
  if (c.mu_points < 1) throw ConfigError("mu_points", "must be >= 1");

  // The family must be constructible against the space.
  guarded("family", [&] {
    const auto f = build_family(c);
    family_constants(f, c.space, c.cost.p_norm);
    return 0;
  });

  if (c.reg) {
    const auto m = guarded("kernel", [&] { return kernel_moments(*c.kernel, c.cost, c.space); });
    for (std::size_t i = 0; i < c.rho_list.size(); ++i)
      if (!(c.rho_list[i] > m.m_c))
        throw ConfigError(j.contains("rho") ? "rho" : "rho_list[" + std::to_string(i) + "]",
                          "the regularized dual needs rho > m_c = " + std::to_string(m.m_c) +
                              " (worst-case expected kernel cost); increase rho");
  }
  return c;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "invalid JSON in '" + path + "': " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  return parse_config_json(j, dir.empty() ? "." : dir.string());
}

json to_json(const ExperimentConfig& c) {
  auto boxes = [](const std::vector<Interval>& b) {
    json a = json::array();
    for (const auto& i : b) a.push_back({i.lo, i.hi});
    return a;
  };
  json j;
  j["space"] = {{"boxes", boxes(c.space.boxes())},
                {"alphabets", c.space.alphabets()},
                {"grid_resolution", c.space.grid_resolution()}};
  j["cost"] = {{"power_q", c.cost.power_q},
               {"label_weight_kappa", c.cost.label_weight_kappa},
               {"label_power", c.cost.label_power}};
  if (std::isinf(c.cost.p_norm))
    j["cost"]["p_norm"] = "inf";
  else
    j["cost"]["p_norm"] = c.cost.p_norm;
  j["family"] = {{"kind", to_string(c.family.kind)},
                 {"theta_box", boxes(c.family.theta_box)},
                 {"theta_grid_resolution", c.family.theta_grid_resolution},
                 {"kmeans_clusters", c.family.kmeans_clusters}};
  if (!c.family.tables_csv.empty()) j["family"]["tables_csv"] = c.family.tables_csv;
  if (c.kernel)
    j["kernel"] = {{"kind", to_string(c.kernel->kind)},
                   {"sigma", c.kernel->sigma},
                   {"scale", c.kernel->scale},
                   {"quadrature_nodes", c.kernel->quadrature_nodes}};
  if (c.reg) j["reg"] = {{"tau", c.reg->tau}, {"epsilon", c.reg->epsilon}};
  const auto& g = c.ground_truth;
  j["ground_truth"] = {{"kind", to_string(g.kind)}, {"replace", g.replace}};
  if (!g.mean.empty()) j["ground_truth"]["mean"] = g.mean;
  if (!g.sigma.empty()) j["ground_truth"]["sigma"] = g.sigma;
  if (!g.class_means.empty()) j["ground_truth"]["class_means"] = g.class_means;
  if (!g.class_probs.empty()) j["ground_truth"]["class_probs"] = g.class_probs;
  if (!g.path.empty()) j["ground_truth"]["path"] = g.path;
  j["solver"] = {{"tol", c.tol}, {"tie_tol", c.tie_tol}, {"degeneracy_tol", c.degeneracy_tol}, {"refine", c.refine}};
  j["rho_list"] = c.rho_list;
  j["n_list"] = c.n_list;
  j["trials"] = c.trials;
  j["delta"] = c.delta;
  j["master_seed"] = c.master_seed;
  j["output_dir"] = c.output_dir;
  j["lambda_grid"] = c.lambda_grid;
  j["target_coverage"] = c.target_coverage;
  j["mu_points"] = c.mu_points;
  return j;
}

LossFamily build_family(const ExperimentConfig& c) {
  const auto& f = c.family;
  switch (f.kind) {
    case LossKind::least_squares: return LossFamily::least_squares(f.theta_box, f.theta_grid_resolution);
    case LossKind::logistic: return LossFamily::logistic(f.theta_box, f.theta_grid_resolution);
    case LossKind::hinge: return LossFamily::hinge(f.theta_box, f.theta_grid_resolution);
    case LossKind::linear: return LossFamily::linear(f.theta_box, f.theta_grid_resolution);
    case LossKind::kmeans:
      return LossFamily::kmeans(f.kmeans_clusters, f.theta_box, f.theta_grid_resolution);
    case LossKind::tabulated: return load_tabulated_csv(f.tables_csv, c.space);
  }
  throw DomainError("unknown loss kind");
}

ExperimentSetup build_setup(const ExperimentConfig& c, int workers) {
  ExperimentSetup s;
  s.space = c.space;
  s.cost = c.cost;
  s.family = build_family(c);
  s.truth = c.ground_truth;
  if (s.truth.kind == TruthKind::dataset) {
    s.truth.rows = load_dataset_csv(s.truth.path, c.space);
    s.truth.validate(c.space);
  }
  s.kernel = c.kernel;
  s.reg = c.reg;
  if (!c.n_list.empty()) s.n_list = c.n_list;
  if (!c.rho_list.empty()) s.rho_list = c.rho_list;
  s.trials = c.trials;
  s.master_seed = c.master_seed;
  s.tol = c.tol;
  s.tie_tol = c.tie_tol;
  s.refine = c.refine;
  s.delta = c.delta;
  s.target_coverage = c.target_coverage;
  s.workers = workers;
  return s;
}

}  // namespace wdro
