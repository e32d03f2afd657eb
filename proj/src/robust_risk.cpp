#include "wdro/robust_risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wdro/error.hpp"
#include "wdro/lp.hpp"

namespace wdro {

namespace {

constexpr double kInvPhi = 0.6180339887498949;
constexpr double kLambdaCap = 1e8;

void check_rho(double rho) {
  if (!(rho >= 0.0) || std::isinf(rho)) throw DomainError("rho must be finite and >= 0");
}

}  // namespace

EmpiricalDistribution EmpiricalDistribution::uniform(std::vector<SamplePoint> atoms) {
  EmpiricalDistribution q;
  const double w = atoms.empty() ? 0.0 : 1.0 / static_cast<double>(atoms.size());
  q.weights.assign(atoms.size(), w);
  q.atoms = std::move(atoms);
  return q;
}

void EmpiricalDistribution::validate(const SampleSpace& space) const {
  if (atoms.empty()) throw DomainError("distribution has no atoms");
  if (atoms.size() != weights.size()) throw DomainError("atoms and weights differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0)) throw DomainError("weight " + std::to_string(i) + " is not positive");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12 * static_cast<double>(weights.size() + 1))
    throw DomainError("weights do not sum to 1");
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    try {
      space.check(atoms[i]);
    } catch (const DomainError& e) {
      throw DomainError("atom " + std::to_string(i) + ": " + e.what());
    }
  }
}

DualEvaluator::DualEvaluator(const EmpiricalDistribution& Q, const MemberFunction& f,
                             const TransportCost& cost, const SampleSpace& space,
                             InnerMaxOptions options)
    : maximizer_(std::make_shared<GridMaximizer>(f, cost, space, options)), weights_(Q.weights) {
  Q.validate(space);
  anchors_.reserve(Q.size());
  for (std::size_t i = 0; i < Q.size(); ++i) {
    anchors_.push_back(maximizer_->anchor(Q.atoms[i]));
    mean_f_ += Q.weights[i] * f(Q.atoms[i]);
  }
}

DualEvaluator::DualEvaluator(
    const EmpiricalDistribution& Q, const MemberFunction& f, const TransportCost& cost,
    const SampleSpace& space, InnerMaxOptions options,
    const std::vector<std::shared_ptr<const std::vector<double>>>& atom_costs)
    : maximizer_(std::make_shared<GridMaximizer>(f, cost, space, options)), weights_(Q.weights) {
  Q.validate(space);
  if (atom_costs.size() != Q.size()) throw DomainError("one cost row per atom expected");
  anchors_.reserve(Q.size());
  for (std::size_t i = 0; i < Q.size(); ++i) {
    anchors_.push_back(maximizer_->anchor(Q.atoms[i], atom_costs[i]));
    mean_f_ += Q.weights[i] * f(Q.atoms[i]);
  }
}

double DualEvaluator::expected_phi(double lambda) const {
  double s = 0.0;
  for (std::size_t i = 0; i < anchors_.size(); ++i) s += weights_[i] * anchors_[i].value(lambda).value;
  if (!std::isfinite(s)) throw SolverError("non-finite dual objective");
  return s;
}

double DualEvaluator::expected_min_cost(double lambda) const {
  double s = 0.0;
  for (std::size_t i = 0; i < anchors_.size(); ++i)
    s += weights_[i] * anchors_[i].value(lambda).min_cost;
  return s;
}

double dual_objective(double lambda, const EmpiricalDistribution& Q, const MemberFunction& f,
                      double rho, const TransportCost& cost, const SampleSpace& space) {
  check_rho(rho);
  if (!(lambda >= 0.0)) throw DomainError("lambda must be >= 0");
  return DualEvaluator(Q, f, cost, space).objective(lambda, rho);
}

DualSolveResult solve_dual(const DualEvaluator& ev, double rho, double tol) {
  check_rho(rho);
  if (rho == 0.0) throw DomainError("rho = 0: the robust risk is the plain expectation E_Q[f]");
  if (!(tol > 0.0)) throw DomainError("tol must be > 0");

  DualSolveResult out;
  double best_value = std::numeric_limits<double>::infinity();
  double best_lambda = 0.0;
  auto obj = [&](double lambda) {
    const double v = ev.objective(lambda, rho);
    ++out.evaluations;
    if (v < best_value) {
      best_value = v;
      best_lambda = lambda;
    }
    return v;
  };

  const double at_zero = obj(0.0);
  double lo = 0.0;
  double hi = 1.0;  // convexity: obj(1) >= obj(0) puts a minimizer in [0, 1]
  double big = 1.0;
  double prev = obj(big);
  if (prev < at_zero) {
    double lower = 0.0;
    while (true) {
      if (2.0 * big > kLambdaCap) {
        out.flat_at_infinity = true;
        lo = big;
        hi = kLambdaCap;
        break;
      }
      const double next = obj(2.0 * big);
      if (next >= prev) {
        lo = lower;
        hi = 2.0 * big;
        break;
      }
      prev = next;
      lower = big;
      big *= 2.0;
    }
  }
  if (out.flat_at_infinity) {
    obj(kLambdaCap);
  } else {
    double a = lo, b = hi;
    double x1 = b - kInvPhi * (b - a);
    double x2 = a + kInvPhi * (b - a);
    double f1 = obj(x1);
    double f2 = obj(x2);
    for (int it = 0; it < 300 && b - a > tol; ++it) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - kInvPhi * (b - a);
        f1 = obj(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + kInvPhi * (b - a);
        f2 = obj(x2);
      }
    }
    lo = a;
    hi = b;
  }
  out.lambda_star = best_lambda;
  out.value = best_value;
  out.bracket_lo = std::min(lo, best_lambda);
  out.bracket_hi = std::max(hi, best_lambda);
  return out;
}

DualSolveResult solve_dual(const EmpiricalDistribution& Q, const MemberFunction& f, double rho,
                           const TransportCost& cost, const SampleSpace& space, double tol) {
  return solve_dual(DualEvaluator(Q, f, cost, space), rho, tol);
}

double robust_risk(const DualEvaluator& ev, double rho, double tol) {
  check_rho(rho);
  if (rho == 0.0) return ev.mean_f();
  return solve_dual(ev, rho, tol).value;
}

double robust_risk(const EmpiricalDistribution& Q, const MemberFunction& f, double rho,
                   const TransportCost& cost, const SampleSpace& space, double tol) {
  check_rho(rho);
  return robust_risk(DualEvaluator(Q, f, cost, space), rho, tol);
}

double primal_oracle(const EmpiricalDistribution& Q, const MemberFunction& f, double rho,
                     const TransportCost& cost, const SampleSpace& space) {
  if (rho < 0.0) throw InfeasibleError("rho must be >= 0");
  Q.validate(space);
  const auto nodes = grid(space);
  std::vector<double> fz(nodes.size());
  for (std::size_t j = 0; j < nodes.size(); ++j) fz[j] = f(nodes[j]);

  double base = 0.0;
  LinearProgram lp;
  std::vector<double> budget_row;
  std::vector<std::pair<std::size_t, double>> moves;  // (atom, cost) per variable
  for (std::size_t i = 0; i < Q.size(); ++i) {
    const double fi = f(Q.atoms[i]);
    base += Q.weights[i] * fi;
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      const double gain = fz[j] - fi;
      if (gain <= 0.0) continue;  // never part of an optimal plan
      lp.c.push_back(gain);
      budget_row.push_back(cost_eval(cost, Q.atoms[i], nodes[j]));
      moves.emplace_back(i, 0.0);
    }
  }
  if (lp.c.empty()) return base;
  for (std::size_t i = 0; i < Q.size(); ++i) {
    std::vector<double> row(lp.c.size(), 0.0);
    for (std::size_t k = 0; k < moves.size(); ++k)
      if (moves[k].first == i) row[k] = 1.0;
    lp.A.push_back(std::move(row));
    lp.b.push_back(Q.weights[i]);
  }
  lp.A.push_back(budget_row);
  lp.b.push_back(rho);
  const std::size_t total_pairs = Q.size() * nodes.size();
  const auto sol = total_pairs <= 12 ? solve_vertex_enumeration(lp) : solve_simplex(lp);
  return base + sol.objective;
}

WorstCaseDistribution worst_case_distribution(const EmpiricalDistribution& Q,
                                              const MemberFunction& f, double rho,
                                              const TransportCost& cost,
                                              const SampleSpace& space, double tol) {
  check_rho(rho);
  const DualEvaluator ev(Q, f, cost, space);
  WorstCaseDistribution out;
  if (rho == 0.0) {
    out.atoms = Q.atoms;
    out.weights = Q.weights;
    out.value = ev.mean_f();
    return out;
  }
  const auto sol = solve_dual(ev, rho, tol);

  // Per atom: the cheapest maximizer at the upper bracket end and the most
  // expensive one at the lower end; mixing them makes the budget bind.
  struct Move {
    SamplePoint point;
    double cost;
    double value;
  };
  std::vector<Move> near, far;
  std::vector<double> stay_value;
  for (const auto& anchor : ev.anchors()) {
    const auto hi = anchor.solve(sol.bracket_hi);
    const auto lo = anchor.solve(sol.bracket_lo);
    auto pick = [&](const InnerMaxResult& r, bool cheapest) {
      Move best{anchor.xi(), 0.0, 0.0};
      bool first = true;
      for (const auto& z : r.maximizers) {
        const double c = cost_eval(cost, anchor.xi(), z);
        if (first || (cheapest ? c < best.cost : c > best.cost)) {
          best = {z, c, f(z)};
          first = false;
        }
      }
      return best;
    };
    near.push_back(pick(hi, true));
    far.push_back(pick(lo, false));
    stay_value.push_back(f(anchor.xi()));
  }
  const auto& w = ev.weights();
  double c_near = 0.0, c_far = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    c_near += w[i] * near[i].cost;
    c_far += w[i] * far[i].cost;
  }

  std::vector<std::pair<SamplePoint, double>> mass;
  auto add = [&](const SamplePoint& z, double m) {
    if (m <= 0.0) return;
    for (auto& [p, q] : mass) {
      bool same = p.labels == z.labels && p.continuous.size() == z.continuous.size();
      for (std::size_t k = 0; same && k < z.continuous.size(); ++k)
        same = std::abs(p.continuous[k] - z.continuous[k]) <= 1e-9;
      if (same) {
        q += m;
        return;
      }
    }
    mass.emplace_back(z, m);
  };
  double used = 0.0;
  double value = 0.0;
  if (c_far <= rho) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      add(far[i].point, w[i]);
      value += w[i] * far[i].value;
    }
    used = c_far;
  } else if (c_near >= rho) {
    const double t = c_near > 0.0 ? rho / c_near : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      add(near[i].point, t * w[i]);
      add(ev.anchors()[i].xi(), (1.0 - t) * w[i]);
      value += w[i] * (t * near[i].value + (1.0 - t) * stay_value[i]);
    }
    used = t * c_near;
  } else {
    const double t = (rho - c_near) / (c_far - c_near);
    for (std::size_t i = 0; i < w.size(); ++i) {
      add(far[i].point, t * w[i]);
      add(near[i].point, (1.0 - t) * w[i]);
      value += w[i] * (t * far[i].value + (1.0 - t) * near[i].value);
    }
    used = rho;
  }
  for (auto& [p, q] : mass) {
    out.atoms.push_back(p);
    out.weights.push_back(q);
  }
  out.transport_cost_used = used;
  out.value = value;
  return out;
}

TrainResult train_robust(const EmpiricalDistribution& Q, const LossFamily& family, double rho,
                         const TransportCost& cost, const SampleSpace& space, double tol) {
  const auto thetas = family.theta_grid();
  if (thetas.empty()) throw InfeasibleError("empty parameter grid");
  TrainResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (const auto& theta : thetas) {
    const double v = robust_risk(Q, family.member(theta), rho, cost, space, tol);
    if (v < best.value) {
      best.value = v;
      best.theta = theta;
    }
  }
  return best;
}

ExcessReport excess_gap_check(const EmpiricalDistribution& Q, const MemberFunction& f,
                              double rho, double alpha_over_sqrt_n, double lip_f,
                              double power_p, double true_mean, const TransportCost& cost,
                              const SampleSpace& space, double tol) {
  if (!(lip_f >= 0.0)) throw DomainError("lip_f must be >= 0");
  if (!(power_p >= 1.0)) throw DomainError("power_p must be >= 1");
  if (!(alpha_over_sqrt_n >= 0.0)) throw DomainError("alpha_over_sqrt_n must be >= 0");
  if (space.label_dims() > 0)
    throw DomainError("excess-risk check needs a pure power of the distance; label costs are not supported");
  if (cost.power_q != power_p)
    throw DomainError("excess-risk check needs cost = distance^power_p (power_q differs)");
  ExcessReport r;
  r.robust_value = robust_risk(Q, f, rho, cost, space, tol);
  r.bound = true_mean + lip_f * std::pow(rho + alpha_over_sqrt_n, 1.0 / power_p);
  r.slack = r.bound - r.robust_value;
  r.holds = r.slack >= -std::max(1e-6, 10.0 * tol) * (1.0 + std::abs(r.bound));
  return r;
}

}  // namespace wdro
