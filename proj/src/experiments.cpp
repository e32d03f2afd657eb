#include "wdro/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <mutex>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "wdro/error.hpp"

namespace wdro {

const char* to_string(TruthKind kind) {
  switch (kind) {
    case TruthKind::uniform_box: return "uniform_box";
    case TruthKind::truncated_gaussian: return "truncated_gaussian";
    case TruthKind::label_mixture: return "label_mixture";
    case TruthKind::dataset: return "dataset";
  }
  return "unknown";
}

TruthKind truth_kind_from_string(const std::string& name) {
  for (auto k : {TruthKind::uniform_box, TruthKind::truncated_gaussian, TruthKind::label_mixture,
                 TruthKind::dataset})
    if (name == to_string(k)) return k;
  throw DomainError("unknown ground truth kind '" + name + "'");
}

namespace {

double sigma_at(const GroundTruth& t, std::size_t axis) {
  if (t.sigma.empty()) return 0.0;
  return t.sigma.size() == 1 ? t.sigma[0] : t.sigma[axis];
}

std::vector<double> trapezoid(const std::vector<double>& nodes) {
  std::vector<double> w(nodes.size(), 1.0);
  if (nodes.size() < 2) return w;
  const double h = nodes[1] - nodes[0];
  for (auto& v : w) v = h;
  w.front() = w.back() = h / 2.0;
  return w;
}

double truncated_normal_draw(double u, double mean, double sigma, const Interval& box) {
  if (!(sigma > 0.0)) return std::clamp(mean, box.lo, box.hi);
  const boost::math::normal_distribution<double> normal(mean, sigma);
  const double a = boost::math::cdf(normal, box.lo);
  const double b = boost::math::cdf(normal, box.hi);
  if (!(b > a)) return mean < box.lo ? box.lo : box.hi;
  const double p = std::clamp(a + u * (b - a), std::numeric_limits<double>::min(),
                              1.0 - std::ldexp(1.0, -53));
  return std::clamp(boost::math::quantile(normal, p), box.lo, box.hi);
}

// log density of the continuous part under a product of normals
double log_gauss(const std::vector<double>& x, const std::vector<double>& mean,
                 const GroundTruth& t) {
  double s = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a) {
    const double sg = sigma_at(t, a);
    const double d = (x[a] - mean[a]) / sg;
    s -= 0.5 * d * d;
  }
  return s;
}

bool point_mass(const GroundTruth& t, std::size_t dims) {
  for (std::size_t a = 0; a < dims; ++a)
    if (!(sigma_at(t, a) > 0.0)) return true;
  return false;
}

}  // namespace

void GroundTruth::validate(const SampleSpace& space) const {
  const std::size_t m = space.continuous_dims();
  auto check_sigma = [&] {
    if (sigma.size() != 1 && sigma.size() != m)
      throw DomainError("ground truth sigma needs one value or one per continuous axis");
    for (double s : sigma)
      if (!(s >= 0.0) || std::isinf(s)) throw DomainError("ground truth sigma must be finite and >= 0");
  };
  switch (kind) {
    case TruthKind::uniform_box:
      break;
    case TruthKind::truncated_gaussian:
      if (mean.size() != m) throw DomainError("ground truth mean needs one value per continuous axis");
      check_sigma();
      break;
    case TruthKind::label_mixture: {
      if (space.label_dims() == 0) throw DomainError("label_mixture needs a label coordinate");
      const auto classes = static_cast<std::size_t>(space.alphabets()[0]);
      if (class_probs.size() != classes || class_means.size() != classes)
        throw DomainError("label_mixture needs one mean and one probability per class");
      double total = 0.0;
      for (double p : class_probs) {
        if (!(p >= 0.0)) throw DomainError("class probabilities must be >= 0");
        total += p;
      }
      if (std::abs(total - 1.0) > 1e-9) throw DomainError("class probabilities must sum to 1");
      for (const auto& mu : class_means)
        if (mu.size() != m) throw DomainError("class means need one value per continuous axis");
      check_sigma();
      break;
    }
    case TruthKind::dataset:
      if (rows.empty()) throw DomainError("dataset ground truth has no rows");
      for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
          space.check(rows[i]);
        } catch (const DomainError& e) {
          throw DomainError("dataset row " + std::to_string(i + 1) + ": " + e.what());
        }
      }
      break;
  }
}

std::vector<SamplePoint> load_dataset_csv(const std::string& path, const SampleSpace& space) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DomainError("dataset '" + path + "' is empty");
  std::size_t columns = std::count(line.begin(), line.end(), ',') + 1;
  const bool label_y = space.label_dims() == 1;
  const std::size_t features = columns - 1;
  const std::size_t expected = label_y ? space.continuous_dims() : space.continuous_dims() - 1;
  if (columns < 1 || features != expected || (!label_y && space.label_dims() != 0))
    throw DomainError("dataset '" + path + "' has " + std::to_string(features) +
                      " feature columns, the space expects " + std::to_string(expected));
  std::vector<SamplePoint> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    std::vector<double> v;
    double x = 0;
    while (row >> x) v.push_back(x);
    if (v.size() != columns)
      throw DomainError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                        " values");
    SamplePoint p;
    p.continuous.assign(v.begin(), v.begin() + static_cast<long>(features));
    if (label_y)
      p.labels.push_back(v.back() == -1.0 ? 0 : static_cast<int>(std::lround(v.back())));
    else
      p.continuous.push_back(v.back());
    rows.push_back(std::move(p));
  }
  return rows;
}

EmpiricalDistribution reference_distribution(const GroundTruth& truth, const SampleSpace& space) {
  truth.validate(space);
  if (truth.kind == TruthKind::dataset) return EmpiricalDistribution::uniform(truth.rows);

  const std::size_t m = space.continuous_dims();
  if (truth.kind == TruthKind::truncated_gaussian && point_mass(truth, m)) {
    SamplePoint p;
    for (std::size_t a = 0; a < m; ++a)
      p.continuous.push_back(std::clamp(truth.mean[a], space.boxes()[a].lo, space.boxes()[a].hi));
    p.labels.assign(space.label_dims(), 0);
    if (space.label_dims() > 0) {
      // labels stay uniform
      EmpiricalDistribution q;
      const GridLayout labels(SampleSpace({}, space.alphabets(), 2), 2);
      for (std::size_t j = 0; j < labels.size(); ++j) {
        p.labels = labels.node(j).labels;
        q.atoms.push_back(p);
        q.weights.push_back(1.0 / static_cast<double>(labels.size()));
      }
      return q;
    }
    return EmpiricalDistribution::uniform({p});
  }

  const GridLayout layout(space, space.grid_resolution());
  std::vector<std::vector<double>> trap;
  for (const auto& axis : layout.axes()) trap.push_back(trapezoid(axis));
  std::vector<double> logw(layout.size());
  const auto nodes = layout.nodes();
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    double lw = 0.0;
    for (std::size_t a = 0; a < m; ++a) lw += std::log(trap[a][layout.coordinate(j, a)]);
    switch (truth.kind) {
      case TruthKind::truncated_gaussian:
        lw += log_gauss(nodes[j].continuous, truth.mean, truth);
        break;
      case TruthKind::label_mixture: {
        const int y = nodes[j].labels[0];
        const double p = truth.class_probs[static_cast<std::size_t>(y)];
        if (p <= 0.0) {
          lw = -std::numeric_limits<double>::infinity();
          break;
        }
        // per-class normalization of the truncated density on the grid is
        // handled below
        lw += log_gauss(nodes[j].continuous, truth.class_means[static_cast<std::size_t>(y)], truth);
        break;
      }
      default:
        break;
    }
    logw[j] = lw;
  }
  std::vector<double> w(nodes.size(), 0.0);
  auto normalize = [&](const std::function<bool(std::size_t)>& in_group, double mass) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nodes.size(); ++j)
      if (in_group(j)) top = std::max(top, logw[j]);
    if (!std::isfinite(top)) return;
    double total = 0.0;
    for (std::size_t j = 0; j < nodes.size(); ++j)
      if (in_group(j)) total += std::exp(logw[j] - top);
    for (std::size_t j = 0; j < nodes.size(); ++j)
      if (in_group(j)) w[j] = mass * std::exp(logw[j] - top) / total;
  };
  if (truth.kind == TruthKind::label_mixture) {
    for (std::size_t y = 0; y < truth.class_probs.size(); ++y)
      normalize([&](std::size_t j) { return static_cast<std::size_t>(nodes[j].labels[0]) == y; },
                truth.class_probs[y]);
  } else {
    normalize([](std::size_t) { return true; }, 1.0);
  }
  EmpiricalDistribution q;
  double total = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    if (w[j] > 0.0) {
      q.atoms.push_back(nodes[j]);
      q.weights.push_back(w[j]);
      total += w[j];
    }
  }
  for (auto& v : q.weights) v /= total;
  return q;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t TrialSeed::derived() const {
  std::uint64_t state = master_seed;
  const std::uint64_t base = splitmix64(state);
  state = base ^ (trial_index * 0xD1B54A32D192ED03ULL);
  return splitmix64(state);
}

double TrialRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t TrialRng::below(std::uint64_t n) {
  if (n == 0) throw DomainError("empty range");
  return std::min<std::uint64_t>(n - 1, static_cast<std::uint64_t>(uniform() * static_cast<double>(n)));
}

EmpiricalDistribution sample(const GroundTruth& truth, const SampleSpace& space, int n,
                             TrialSeed seed) {
  if (n < 1) throw DomainError("sample size must be >= 1");
  truth.validate(space);
  TrialRng rng(seed);
  std::vector<SamplePoint> atoms;
  atoms.reserve(static_cast<std::size_t>(n));
  const auto& boxes = space.boxes();
  const auto& alphabets = space.alphabets();

  if (truth.kind == TruthKind::dataset) {
    const std::size_t rows = truth.rows.size();
    if (truth.replace) {
      for (int i = 0; i < n; ++i) atoms.push_back(truth.rows[rng.below(rows)]);
    } else {
      if (static_cast<std::size_t>(n) > rows)
        throw DomainError("dataset has " + std::to_string(rows) + " rows, fewer than n = " +
                          std::to_string(n) + " (sampling without replacement)");
      std::vector<std::size_t> idx(rows);
      for (std::size_t i = 0; i < rows; ++i) idx[i] = i;
      for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
        const std::size_t j = i + rng.below(rows - i);
        std::swap(idx[i], idx[j]);
        atoms.push_back(truth.rows[idx[i]]);
      }
    }
    return EmpiricalDistribution::uniform(std::move(atoms));
  }

  for (int i = 0; i < n; ++i) {
    SamplePoint p;
    p.labels.resize(alphabets.size());
    std::size_t first_label = 0;
    const std::vector<double>* mean = &truth.mean;
    if (truth.kind == TruthKind::label_mixture) {
      const double u = rng.uniform();
      double acc = 0.0;
      std::size_t y = truth.class_probs.size() - 1;
      for (std::size_t k = 0; k < truth.class_probs.size(); ++k) {
        acc += truth.class_probs[k];
        if (u < acc) {
          y = k;
          break;
        }
      }
      p.labels[0] = static_cast<int>(y);
      mean = &truth.class_means[y];
      first_label = 1;
    }
    for (std::size_t a = 0; a < boxes.size(); ++a) {
      const double u = rng.uniform();
      if (truth.kind == TruthKind::uniform_box)
        p.continuous.push_back(boxes[a].lo + u * boxes[a].length());
      else
        p.continuous.push_back(truncated_normal_draw(u, (*mean)[a], sigma_at(truth, a), boxes[a]));
    }
    for (std::size_t l = first_label; l < alphabets.size(); ++l)
      p.labels[l] = static_cast<int>(rng.below(static_cast<std::uint64_t>(alphabets[l])));
    atoms.push_back(std::move(p));
  }
  return EmpiricalDistribution::uniform(std::move(atoms));
}

double true_mean(const GroundTruth& truth, const MemberFunction& f, const SampleSpace& space) {
  const auto ref = reference_distribution(truth, space);
  double s = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) s += ref.weights[i] * f(ref.atoms[i]);
  return s;
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

namespace {

struct FamilyCache {
  std::vector<std::vector<double>> thetas;
  std::vector<MemberFunction> members;
  std::vector<double> means;  // E_P f per member
};

FamilyCache family_cache(const ExperimentSetup& s) {
  FamilyCache c;
  c.thetas = s.family.theta_grid();
  if (c.thetas.empty()) throw InfeasibleError("empty loss family");
  const auto ref = reference_distribution(s.truth, s.space);
  for (const auto& theta : c.thetas) {
    c.members.push_back(s.family.member(theta));
    double m = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) m += ref.weights[i] * c.members.back()(ref.atoms[i]);
    c.means.push_back(m);
  }
  return c;
}

InnerMaxOptions inner_options(const ExperimentSetup& s) {
  InnerMaxOptions o;
  o.tie_tol = s.tie_tol;
  o.refine = s.refine;
  return o;
}

// Evaluators for every member on one sample, sharing cost rows.
std::vector<DualEvaluator> evaluators_for(const EmpiricalDistribution& q, const FamilyCache& c,
                                          const ExperimentSetup& s) {
  std::vector<DualEvaluator> out;
  std::vector<std::shared_ptr<const std::vector<double>>> rows;
  out.reserve(c.members.size());
  for (const auto& f : c.members) {
    if (rows.empty()) {
      out.emplace_back(q, f, s.cost, s.space, inner_options(s));
      for (const auto& a : out.back().anchors()) rows.push_back(a.costs());
    } else {
      out.emplace_back(q, f, s.cost, s.space, inner_options(s), rows);
    }
  }
  return out;
}

void check_setup(const ExperimentSetup& s) {
  s.cost.validate();
  if (s.trials < 1) throw DomainError("trials must be >= 1");
  if (s.n_list.empty()) throw DomainError("n list is empty");
  for (int n : s.n_list)
    if (n < 1) throw DomainError("sample sizes must be >= 1");
  for (double r : s.rho_list)
    if (!(r >= 0.0) || std::isinf(r)) throw DomainError("radii must be finite and >= 0");
  s.truth.validate(s.space);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<CoverageReport> assemble(const ExperimentSetup& s, int n,
                                     const std::vector<std::vector<TrialRecord>>& records,
                                     double wall) {
  std::vector<CoverageReport> out;
  for (std::size_t r = 0; r < s.rho_list.size(); ++r) {
    CoverageReport rep;
    rep.n = n;
    rep.rho = s.rho_list[r];
    rep.trials = s.trials;
    int covered = 0;
    for (const auto& trial : records) {
      rep.per_trial.push_back(trial[r]);
      if (trial[r].failed)
        ++rep.failures;
      else if (trial[r].min_slack >= 0.0)
        ++covered;
    }
    rep.coverage = static_cast<double>(covered) / static_cast<double>(s.trials);
    rep.wall_time = wall;
    out.push_back(std::move(rep));
  }
  return out;
}

std::vector<TrialRecord> coverage_trial(const ExperimentSetup& s, const FamilyCache& c, int n,
                                        const std::vector<double>& rhos, int trial) {
  const TrialSeed seed{s.master_seed, static_cast<std::uint64_t>(trial)};
  std::vector<TrialRecord> out(rhos.size());
  for (auto& r : out) {
    r.trial_index = trial;
    r.seed = seed.derived();
  }
  try {
    const auto q = sample(s.truth, s.space, n, seed);
    const auto evs = evaluators_for(q, c, s);
    for (std::size_t r = 0; r < rhos.size(); ++r) {
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t t = 0; t < evs.size(); ++t) {
        const double slack = robust_risk(evs[t], rhos[r], s.tol) - c.means[t];
        if (slack < worst) {
          worst = slack;
          out[r].worst_theta = c.thetas[t];
        }
      }
      out[r].min_slack = worst;
    }
  } catch (const Error&) {
    for (auto& r : out) r.failed = true;
  }
  return out;
}

}  // namespace

std::vector<CoverageReport> run_coverage(const ExperimentSetup& s) {
  check_setup(s);
  const auto cache = family_cache(s);
  std::vector<CoverageReport> out;
  for (int n : s.n_list) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<TrialRecord>> records(static_cast<std::size_t>(s.trials));
    parallel_for(records.size(), s.workers, [&](std::size_t i) {
      records[i] = coverage_trial(s, cache, n, s.rho_list, static_cast<int>(i));
    });
    for (auto& rep : assemble(s, n, records, seconds_since(t0))) out.push_back(std::move(rep));
  }
  return out;
}

TrialRecord run_coverage_trial(const ExperimentSetup& s, int n, double rho, int trial_index) {
  check_setup(s);
  return coverage_trial(s, family_cache(s), n, {rho}, trial_index).front();
}

namespace {

double member_threshold(const DualEvaluator& ev, double target) {
  if (ev.mean_f() >= target) return 0.0;
  if (ev.expected_phi(0.0) < target) return std::numeric_limits<double>::infinity();
  // sup over lambda > 0 of (target - E phi(lambda)) / lambda; quasiconcave,
  // hence unimodal in log(lambda).
  auto h = [&](double u) {
    const double lambda = std::exp(u);
    return (target - ev.expected_phi(lambda)) / lambda;
  };
  const double u_lo = std::log(1e-8), u_hi = std::log(1e8);
  const int coarse = 48;
  double best_u = u_lo, best = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= coarse; ++k) {
    const double u = u_lo + (u_hi - u_lo) * k / coarse;
    const double v = h(u);
    if (v > best) {
      best = v;
      best_u = u;
    }
  }
  const double step = (u_hi - u_lo) / coarse;
  double a = best_u - step, b = best_u + step;
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
  double f1 = h(x1), f2 = h(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = h(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = h(x2);
    }
  }
  best = std::max({best, f1, f2});
  return std::max(0.0, best);
}

}  // namespace

double coverage_threshold(const EmpiricalDistribution& q, const LossFamily& family,
                          const std::vector<double>& true_means, const TransportCost& cost,
                          const SampleSpace& space, double tie_tol, bool refine) {
  const auto thetas = family.theta_grid();
  if (true_means.size() != thetas.size()) throw DomainError("one true mean per member expected");
  InnerMaxOptions o;
  o.tie_tol = tie_tol;
  o.refine = refine;
  double worst = 0.0;
  std::vector<std::shared_ptr<const std::vector<double>>> rows;
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    const auto f = family.member(thetas[t]);
    const DualEvaluator ev = rows.empty() ? DualEvaluator(q, f, cost, space, o)
                                          : DualEvaluator(q, f, cost, space, o, rows);
    if (rows.empty())
      for (const auto& a : ev.anchors()) rows.push_back(a.costs());
    worst = std::max(worst, member_threshold(ev, true_means[t]));
  }
  return worst;
}

std::vector<SweepRow> sweep_radius_scaling(const ExperimentSetup& s) {
  check_setup(s);
  if (!(s.target_coverage > 0.0 && s.target_coverage <= 1.0))
    throw DomainError("target coverage must lie in (0, 1]");
  const auto cache = family_cache(s);
  std::vector<SweepRow> out;
  for (int n : s.n_list) {
    std::vector<double> thresholds(static_cast<std::size_t>(s.trials),
                                   std::numeric_limits<double>::infinity());
    parallel_for(thresholds.size(), s.workers, [&](std::size_t i) {
      try {
        const auto q = sample(s.truth, s.space, n, {s.master_seed, i});
        thresholds[i] = coverage_threshold(q, s.family, cache.means, s.cost, s.space, s.tie_tol, s.refine);
      } catch (const Error&) {
      }
    });
    SweepRow row;
    row.n = n;
    for (double t : thresholds)
      if (std::isinf(t)) ++row.failures;
    std::sort(thresholds.begin(), thresholds.end());
    const auto k = static_cast<std::size_t>(
        std::ceil(s.target_coverage * static_cast<double>(s.trials) - 1e-9));
    row.rho_star = thresholds[std::max<std::size_t>(k, 1) - 1];
    row.flagged = std::isinf(row.rho_star);
    row.rho_star_sqrt_n = row.rho_star * std::sqrt(static_cast<double>(n));
    out.push_back(row);
  }
  return out;
}

std::vector<CoverageReport> run_coverage_reg(const ExperimentSetup& s) {
  check_setup(s);
  if (!s.kernel || !s.reg) throw DomainError("regularized coverage needs kernel and reg settings");
  const auto& kernel = *s.kernel;
  const auto& reg = *s.reg;
  reg.validate();
  const auto moments = kernel_moments(kernel, s.cost, s.space);
  for (double rho : s.rho_list)
    if (!(rho > moments.m_c)) lambda_up(rho, 0.0, moments.m_c);  // throws with guidance
  const double sup_norm = family_constants(s.family, s.space, s.cost.p_norm).sup_norm;

  const auto thetas = s.family.theta_grid();
  const auto nodes = grid(s.space, kernel.quadrature_nodes);
  std::vector<std::vector<double>> f_nodes;  // member x quadrature node
  std::vector<double> rhs;
  const auto ref = reference_distribution(s.truth, s.space);
  std::vector<Quadrature> ref_quads;
  for (const auto& xi : ref.atoms) ref_quads.push_back(kernel_quadrature(kernel, xi, s.space));
  for (const auto& theta : thetas) {
    const auto f = s.family.member(theta);
    std::vector<double> v(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) v[k] = f(nodes[k]);
    double e = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      double inner = 0.0;
      for (std::size_t k = 0; k < nodes.size(); ++k) inner += ref_quads[i].weights[k] * v[k];
      e += ref.weights[i] * inner;
    }
    f_nodes.push_back(std::move(v));
    rhs.push_back(e);
  }

  std::vector<CoverageReport> out;
  for (int n : s.n_list) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::vector<TrialRecord>> records(static_cast<std::size_t>(s.trials));
    parallel_for(records.size(), s.workers, [&](std::size_t i) {
      const TrialSeed seed{s.master_seed, i};
      auto& rec = records[i];
      rec.assign(s.rho_list.size(), TrialRecord{});
      for (auto& r : rec) {
        r.trial_index = static_cast<int>(i);
        r.seed = seed.derived();
      }
      try {
        const auto q = sample(s.truth, s.space, n, seed);
        std::vector<std::vector<double>> log_w, costs;
        for (const auto& xi : q.atoms) {
          const auto quad = kernel_quadrature(kernel, xi, s.space);
          std::vector<double> lw(nodes.size()), c(nodes.size());
          for (std::size_t k = 0; k < nodes.size(); ++k) {
            lw[k] = quad.weights[k] > 0.0 ? std::log(quad.weights[k])
                                          : -std::numeric_limits<double>::infinity();
            c[k] = cost_eval(s.cost, xi, nodes[k]);
          }
          log_w.push_back(std::move(lw));
          costs.push_back(std::move(c));
        }
        std::vector<RegDualEvaluator> evs;
        for (std::size_t t = 0; t < thetas.size(); ++t) {
          std::vector<RegAnchor> anchors;
          for (std::size_t a = 0; a < q.size(); ++a) anchors.emplace_back(log_w[a], f_nodes[t], costs[a]);
          evs.emplace_back(std::move(anchors), q.weights, reg, sup_norm);
        }
        for (std::size_t r = 0; r < s.rho_list.size(); ++r) {
          double worst = std::numeric_limits<double>::infinity();
          for (std::size_t t = 0; t < evs.size(); ++t) {
            const double v = solve_reg_dual(evs[t], s.rho_list[r], moments.m_c, sup_norm, s.tol).value;
            if (v - rhs[t] < worst) {
              worst = v - rhs[t];
              rec[r].worst_theta = thetas[t];
            }
          }
          rec[r].min_slack = worst;
        }
      } catch (const Error&) {
        for (auto& r : rec) r.failed = true;
      }
    });
    for (auto& rep : assemble(s, n, records, seconds_since(t0))) out.push_back(std::move(rep));
  }
  return out;
}

namespace {

std::vector<double> mu_grid(double lambda_low, int points) {
  if (!(lambda_low > 0.0)) throw DomainError("lambda_low must be > 0");
  if (points < 1) throw DomainError("mu grid needs at least one point");
  std::vector<double> mu;
  for (int k = 1; k <= points; ++k) mu.push_back(static_cast<double>(k) / points / lambda_low);
  return mu;
}

// E_P[psi(mu, f)] per member and mu.
std::vector<std::vector<double>> population_psi(const ExperimentSetup& s, const FamilyCache& c,
                                                const std::vector<double>& mu) {
  const auto ref = reference_distribution(s.truth, s.space);
  const auto evs = evaluators_for(ref, c, s);
  std::vector<std::vector<double>> out;
  for (const auto& ev : evs) {
    std::vector<double> row;
    for (double m : mu) row.push_back(m * ev.expected_phi(1.0 / m));
    out.push_back(std::move(row));
  }
  return out;
}

// sign +1: sup of population minus sample (coverage direction); -1: sample minus population,
// which is the deviation the excess-risk bound has to absorb.
double sample_gap(const std::vector<DualEvaluator>& evs, const std::vector<std::vector<double>>& pop,
                  const std::vector<double>& mu, double sign = 1.0) {
  double gap = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < evs.size(); ++t)
    for (std::size_t k = 0; k < mu.size(); ++k)
      gap = std::max(gap, sign * (pop[t][k] - mu[k] * evs[t].expected_phi(1.0 / mu[k])));
  return gap;
}

}  // namespace

std::vector<GapRecord> measure_uniform_gap(const ExperimentSetup& s, double lambda_low,
                                           double alpha, int mu_points) {
  check_setup(s);
  const auto mu = mu_grid(lambda_low, mu_points);
  const auto cache = family_cache(s);
  const auto pop = population_psi(s, cache, mu);
  std::vector<GapRecord> out;
  for (int n : s.n_list) {
    std::vector<GapRecord> recs(static_cast<std::size_t>(s.trials));
    parallel_for(recs.size(), s.workers, [&](std::size_t i) {
      const TrialSeed seed{s.master_seed, i};
      auto& r = recs[i];
      r.n = n;
      r.trial_index = static_cast<int>(i);
      r.seed = seed.derived();
      const auto q = sample(s.truth, s.space, n, seed);
      r.gap = sample_gap(evaluators_for(q, cache, s), pop, mu);
      r.gap_sqrt_n = r.gap * std::sqrt(static_cast<double>(n));
      r.within_alpha = r.gap <= alpha / std::sqrt(static_cast<double>(n));
    });
    out.insert(out.end(), recs.begin(), recs.end());
  }
  return out;
}

std::vector<ExcessRecord> run_excess(const ExperimentSetup& s, double lambda_low, int mu_points) {
  check_setup(s);
  if (s.space.label_dims() > 0)
    throw DomainError("excess-risk experiment needs a pure power of the distance; label costs are not supported");
  const auto mu = mu_grid(lambda_low, mu_points);
  const auto cache = family_cache(s);
  const auto pop = population_psi(s, cache, mu);
  const double lip = family_constants(s.family, s.space, s.cost.p_norm).lip_xi;
  const double p = s.cost.power_q;
  std::vector<ExcessRecord> out;
  for (int n : s.n_list) {
    std::vector<std::vector<ExcessRecord>> recs(static_cast<std::size_t>(s.trials));
    parallel_for(recs.size(), s.workers, [&](std::size_t i) {
      const TrialSeed seed{s.master_seed, i};
      const auto q = sample(s.truth, s.space, n, seed);
      const auto evs = evaluators_for(q, cache, s);
      const double gap = std::max(0.0, sample_gap(evs, pop, mu, -1.0));
      for (double rho : s.rho_list) {
        ExcessRecord r;
        r.n = n;
        r.rho = rho;
        r.trial_index = static_cast<int>(i);
        r.seed = seed.derived();
        r.gap = gap;
        r.min_slack = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < evs.size(); ++t) {
          const double bound = cache.means[t] + lip * std::pow(rho + gap, 1.0 / p);
          const double slack = bound - robust_risk(evs[t], rho, s.tol);
          r.min_slack = std::min(r.min_slack, slack);
          if (slack < -1e-6 * (1.0 + std::abs(bound))) ++r.violations;
        }
        recs[i].push_back(r);
      }
    });
    for (auto& v : recs) out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

}  // namespace wdro
