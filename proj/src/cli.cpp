#include "wdro/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "wdro/certificates.hpp"
#include "wdro/config.hpp"
#include "wdro/error.hpp"
#include "wdro/experiments.hpp"
#include "wdro/reg_dual.hpp"
#include "wdro/robust_risk.hpp"

namespace wdro::cli {

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  int workers = 0;
  bool quiet = false;
};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

InnerMaxOptions inner_options(const ExperimentSetup& s) {
  InnerMaxOptions o;
  o.tie_tol = s.tie_tol;
  o.refine = s.refine;
  return o;
}

std::string theta_str(const std::vector<double>& theta) {
  std::string s;
  for (std::size_t i = 0; i < theta.size(); ++i) s += (i ? ";" : "") + num(theta[i]);
  return s;
}

class Run {
 public:
  Run(const Options& opt, ExperimentConfig cfg) : opt_(opt), cfg_(std::move(cfg)) {
    if (opt.seed_given) cfg_.master_seed = opt.seed;
    if (!opt.out.empty()) cfg_.output_dir = opt.out;
    std::filesystem::create_directories(cfg_.output_dir);
  }

  std::ostream& out() { return opt_.quiet ? null_ : std::cout; }

  void write(const std::string& name, const std::string& content) {
    const auto path = (std::filesystem::path(cfg_.output_dir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DomainError("cannot write '" + path + "'");
    f << content;
    out() << "wrote " << path << "\n";
  }

  ExperimentSetup setup() { return build_setup(cfg_, workers()); }

  int workers() const {
    if (opt_.workers > 0) return opt_.workers;
    if (const char* env = std::getenv("WDROCERT_WORKERS")) {
      const int w = std::atoi(env);
      if (w > 0) return w;
    }
    return 1;
  }

  const ExperimentConfig& cfg() const { return cfg_; }

  // Empirical distribution for single-sample commands: the dataset itself
  // when no n is given, otherwise the trial-0 sample.
  EmpiricalDistribution working_sample(const ExperimentSetup& s) {
    if (s.truth.kind == TruthKind::dataset && cfg_.n_list.empty())
      return EmpiricalDistribution::uniform(s.truth.rows);
    const int n = cfg_.n_list.empty() ? 100 : cfg_.n_list.front();
    return sample(s.truth, s.space, n, {cfg_.master_seed, 0});
  }

  std::vector<double> rhos(const char* command) const {
    if (cfg_.rho_list.empty()) throw ConfigError("rho", std::string(command) + " needs rho or rho_list");
    return cfg_.rho_list;
  }

 private:
  struct NullBuf : std::streambuf {
    int overflow(int c) override { return c; }
  };
  Options opt_;
  ExperimentConfig cfg_;
  NullBuf null_buf_;
  std::ostream null_{&null_buf_};
};

int cmd_risk(Run& run) {
  const auto s = run.setup();
  const auto q = run.working_sample(s);
  std::ostringstream csv;
  csv << "theta,rho,value,lambda_star,evaluations\n";
  for (double rho : run.rhos("risk")) {
    std::vector<double> best_theta;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& theta : s.family.theta_grid()) {
      const DualEvaluator ev(q, s.family.member(theta), s.cost, s.space, inner_options(s));
      DualSolveResult r;
      if (rho == 0.0) {
        r.value = ev.mean_f();
      } else {
        r = solve_dual(ev, rho, s.tol);
      }
      csv << theta_str(theta) << ',' << num(rho) << ',' << num(r.value) << ','
          << num(r.lambda_star) << ',' << r.evaluations << '\n';
      if (r.value < best) {
        best = r.value;
        best_theta = theta;
      }
    }
    run.out() << "rho " << num(rho) << ": robust-optimal theta (" << theta_str(best_theta)
              << ") value " << num(best) << "\n";
  }
  run.write("risk.csv", csv.str());
  return 0;
}

int cmd_reg_risk(Run& run) {
  const auto s = run.setup();
  if (!s.reg) throw ConfigError("reg", "reg-risk needs a reg block");
  const auto q = run.working_sample(s);
  const auto moments = kernel_moments(*s.kernel, s.cost, s.space);
  const double sup = family_constants(s.family, s.space, s.cost.p_norm).sup_norm;
  std::ostringstream csv;
  csv << "theta,rho,value,lambda_star,evaluations,m_c,lambda_up\n";
  for (double rho : run.rhos("reg-risk")) {
    const double up = lambda_up(rho, sup, moments.m_c);
    for (const auto& theta : s.family.theta_grid()) {
      const auto r = robust_risk_reg(q, s.family.member(theta), rho, *s.kernel, s.cost, s.space,
                                     *s.reg, s.tol, moments, sup);
      csv << theta_str(theta) << ',' << num(rho) << ',' << num(r.value) << ','
          << num(r.lambda_star) << ',' << r.evaluations << ',' << num(moments.m_c) << ','
          << num(up) << '\n';
    }
    run.out() << "rho " << num(rho) << ": m_c " << num(moments.m_c) << ", lambda_up " << num(up)
              << "\n";
  }
  run.write("reg_risk.csv", csv.str());
  return 0;
}

int cmd_certify(Run& run) {
  const auto s = run.setup();
  const auto p_ref = reference_distribution(s.truth, s.space);
  const auto options = inner_options(s);
  const FamilyDualTable table(s.family, p_ref, s.cost, s.space, options);
  const auto b = certify(s.family, p_ref, s.cost, s.space, s.delta, inner_options(s));

  nlohmann::json j;
  j["rho_crit"] = b.rho_crit;
  j["lambda_low"] = b.lambda_low;
  j["dudley"] = b.dudley;
  j["sup_norm"] = b.sup_norm;
  j["lip_xi"] = b.lip_xi;
  j["alpha"] = b.alpha;
  j["beta"] = b.beta;
  j["n_min"] = b.n_min;
  j["delta"] = b.delta;
  j["provenance"] = {
      {"family_constants", b.constants_provenance},
      {"rho_crit", "minimum over the parameter grid (grid estimate, biased upward)"},
      {"lambda_low", "half the largest lambda with rho_max(lambda) >= rho_crit/4 (bisection)"},
      {"alpha", "48(sup_norm + 1/lambda_low)(dudley + 2/lambda_low) + (2 sup_norm/lambda_low) sqrt(2 log(2/delta))"},
      {"beta", "96 dudley/lambda_low + (4 sup_norm/lambda_low) sqrt(2 log(4/delta))"},
      {"n_min", "16 (alpha + beta)^2 / rho_crit^2"},
      {"theta_grid_size", b.theta_grid_size},
      {"grid_resolution", b.grid_resolution},
      {"reference_atoms", p_ref.size()}};
  nlohmann::json adm = nlohmann::json::array();
  for (int n : run.cfg().n_list)
    adm.push_back({{"n", n}, {"rho_lower", b.rho_admissible_lower(n)}});
  j["rho_admissible"] = adm;

  if (s.reg) {
    if (run.cfg().rho_list.empty()) {
      j["regularized"] = {{"skipped", "needs rho"}};
    } else {
      const double rho = run.cfg().rho_list.front();
      const auto r = certify_reg(s.family, p_ref, *s.kernel, s.cost, s.space, *s.reg, rho, s.delta);
      j["regularized"] = {{"rho", r.rho},
                          {"rho_crit_reg", r.rho_crit_reg},
                          {"m_c", r.m_c},
                          {"m_2c", r.m_2c},
                          {"lambda_low_reg", r.lambda_low_reg},
                          {"lambda_up", r.lambda_up},
                          {"alpha_reg", r.alpha_reg},
                          {"beta_reg", r.beta_reg},
                          {"n_min_reg", std::isinf(r.n_min_reg) ? nlohmann::json("inf") : nlohmann::json(r.n_min_reg)},
                          {"vacuous", r.vacuous}};
    }
  }

  std::vector<double> grid = run.cfg().lambda_grid;
  if (grid.empty())
    for (int k = 0; k <= 32; ++k) grid.push_back(4.0 * b.lambda_low * k / 32.0);
  std::ostringstream csv;
  csv << "lambda,rho_max\n";
  for (double lambda : grid) csv << num(lambda) << ',' << num(table.rho_max(lambda)) << '\n';

  run.write("certificate.json", j.dump(2) + "\n");
  run.write("rhomax.csv", csv.str());
  run.out() << "rho_crit " << num(b.rho_crit) << "\nlambda_low " << num(b.lambda_low)
            << "\nsup_norm " << num(b.sup_norm) << " (" << b.constants_provenance << ")"
            << "\ndudley " << num(b.dudley) << "\nalpha " << num(b.alpha) << "\nbeta "
            << num(b.beta) << "\nn_min " << num(b.n_min) << "\n";
  return 0;
}

int cmd_coverage(Run& run) {
  auto s = run.setup();
  s.rho_list = run.rhos("coverage");
  const bool regularized = s.reg.has_value();
  const auto reports = regularized ? run_coverage_reg(s) : run_coverage(s);
  double rho_crit = std::numeric_limits<double>::infinity();
  if (!regularized) {
    const auto p_ref = reference_distribution(s.truth, s.space);
    rho_crit = FamilyDualTable(s.family, p_ref, s.cost, s.space, inner_options(s)).critical_radius();
  }
  std::ostringstream cov, trials;
  cov << "n,rho,trials,coverage,failures,degenerate\n";
  trials << "n,rho,trial_index,seed,worst_theta,min_slack,failed\n";
  for (const auto& r : reports) {
    const bool degenerate = r.rho >= rho_crit;
    cov << r.n << ',' << num(r.rho) << ',' << r.trials << ',' << num(r.coverage) << ','
        << r.failures << ',' << (degenerate ? 1 : 0) << '\n';
    for (const auto& t : r.per_trial)
      trials << r.n << ',' << num(r.rho) << ',' << t.trial_index << ',' << t.seed << ','
             << theta_str(t.worst_theta) << ',' << num(t.min_slack) << ',' << (t.failed ? 1 : 0)
             << '\n';
    run.out() << "n " << r.n << " rho " << num(r.rho) << ": coverage " << num(r.coverage)
              << " over " << r.trials << " trials";
    if (r.failures) run.out() << " (" << r.failures << " failed)";
    if (degenerate)
      run.out() << " [degenerate radius: rho >= rho_crit estimate " << num(rho_crit)
                << ", robust risk equals the worst-case loss]";
    run.out() << "\n";
  }
  run.write("coverage.csv", cov.str());
  run.write("trials.csv", trials.str());
  return 0;
}

int cmd_sweep(Run& run) {
  const auto s = run.setup();
  const auto rows = sweep_radius_scaling(s);
  std::ostringstream csv;
  csv << "n,rho_star,rho_star_sqrt_n,failures,flagged\n";
  for (const auto& r : rows) {
    csv << r.n << ',' << num(r.rho_star) << ',' << num(r.rho_star_sqrt_n) << ',' << r.failures
        << ',' << (r.flagged ? 1 : 0) << '\n';
    run.out() << "n " << r.n << ": rho* " << num(r.rho_star) << ", rho* sqrt(n) "
              << num(r.rho_star_sqrt_n) << (r.flagged ? " [target unreachable]" : "") << "\n";
  }
  run.write("sweep.csv", csv.str());
  return 0;
}

int cmd_gap(Run& run) {
  const auto s = run.setup();
  const auto p_ref = reference_distribution(s.truth, s.space);
  const auto b = certify(s.family, p_ref, s.cost, s.space, s.delta, inner_options(s));
  const auto recs = measure_uniform_gap(s, b.lambda_low, b.alpha, run.cfg().mu_points);
  std::ostringstream csv;
  csv << "n,trial_index,seed,gap,gap_sqrt_n,alpha_over_sqrt_n,within_alpha\n";
  for (const auto& r : recs)
    csv << r.n << ',' << r.trial_index << ',' << r.seed << ',' << num(r.gap) << ','
        << num(r.gap_sqrt_n) << ',' << num(b.alpha / std::sqrt(static_cast<double>(r.n))) << ','
        << (r.within_alpha ? 1 : 0) << '\n';
  for (int n : s.n_list) {
    std::vector<double> v;
    for (const auto& r : recs)
      if (r.n == n) v.push_back(r.gap_sqrt_n);
    std::sort(v.begin(), v.end());
    const auto k = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(v.size()))) - 1;
    run.out() << "n " << n << ": 95th percentile of gap*sqrt(n) " << num(v[k]) << " (alpha "
              << num(b.alpha) << ")\n";
  }
  run.write("gap.csv", csv.str());
  return 0;
}

int cmd_excess(Run& run) {
  auto s = run.setup();
  s.rho_list = run.rhos("excess");
  const auto p_ref = reference_distribution(s.truth, s.space);
  const double lambda_low = lambda_low_numeric(FamilyDualTable(s.family, p_ref, s.cost, s.space, inner_options(s)));
  const auto recs = run_excess(s, lambda_low, run.cfg().mu_points);
  std::ostringstream csv;
  csv << "n,rho,trial_index,seed,gap,min_slack,violations\n";
  int violations = 0;
  for (const auto& r : recs) {
    csv << r.n << ',' << num(r.rho) << ',' << r.trial_index << ',' << r.seed << ',' << num(r.gap)
        << ',' << num(r.min_slack) << ',' << r.violations << '\n';
    violations += r.violations;
  }
  run.out() << "excess-risk bound violations: " << violations << " over " << recs.size()
            << " (trial, rho) pairs\n";
  run.write("excess.csv", csv.str());
  return 0;
}

int cmd_degeneracy(Run& run) {
  const auto s = run.setup();
  const auto p_ref = reference_distribution(s.truth, s.space);
  const auto options = inner_options(s);
  const FamilyDualTable table(s.family, p_ref, s.cost, s.space, options);
  const double rho_crit = table.critical_radius();
  double tol = run.cfg().degeneracy_tol;
  if (tol < 0.0) tol = 1e-6 * (1.0 + family_constants(s.family, s.space, s.cost.p_norm).sup_norm);
  std::ostringstream csv;
  csv << "rho,rho_crit,min_gap,degenerate,theta\n";
  for (double rho : run.rhos("degeneracy")) {
    const auto r = degeneracy_check(table, rho, tol, s.tol);
    csv << num(rho) << ',' << num(rho_crit) << ',' << num(r.min_gap) << ','
        << (r.degenerate ? 1 : 0) << ',' << theta_str(r.theta) << '\n';
    run.out() << "rho " << num(rho) << ": min gap " << num(r.min_gap)
              << (r.degenerate ? " (degenerate)" : "") << "\n";
  }
  run.out() << "rho_crit estimate " << num(rho_crit) << "\n";
  run.write("degeneracy.csv", csv.str());
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Wasserstein robust risk solver and certificate toolkit", "wdrocert"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config, "JSON experiment config");
  auto* seed = app.add_option("--seed", opt.seed, "override master_seed");
  app.add_option("--out", opt.out, "output directory (overrides output_dir)");
  app.add_option("--workers", opt.workers, "worker threads (default: WDROCERT_WORKERS or 1)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", opt.quiet, "suppress the summary");

  using Handler = int (*)(Run&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands = {
      {"risk", "robust risk per parameter and radius", cmd_risk},
      {"reg-risk", "regularized robust risk", cmd_reg_risk},
      {"certify", "critical radius, dual bound and generalization constants", cmd_certify},
      {"coverage", "Monte Carlo coverage of the exact bound", cmd_coverage},
      {"sweep", "minimal radius reaching the target coverage per n", cmd_sweep},
      {"excess", "excess-risk bound check", cmd_excess},
      {"gap", "uniform gap measurements", cmd_gap},
      {"degeneracy", "degeneracy threshold check", cmd_degeneracy}};
  for (const auto& [name, help, fn] : commands) app.add_subcommand(name, help);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  opt.seed_given = seed->count() > 0;
  if (opt.config.empty()) {
    std::cerr << "error: --config is required\n" << app.help();
    return 1;
  }
  for (const auto& [name, help, fn] : commands) {
    if (!app.got_subcommand(name)) continue;
    try {
      Run run(opt, parse_config(opt.config));
      return fn(run);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
  }
  return 1;
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args);
}

}  // namespace wdro::cli
