#include "wdro/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wdro/error.hpp"

namespace wdro {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
}

}  // namespace

FamilyDualTable::FamilyDualTable(const LossFamily& family, const EmpiricalDistribution& P_ref,
                                 const TransportCost& cost, const SampleSpace& space,
                                 InnerMaxOptions options)
    : thetas_(family.theta_grid()) {
  if (thetas_.empty()) throw InfeasibleError("empty loss family");
  P_ref.validate(space);
  std::vector<std::shared_ptr<const std::vector<double>>> rows;
  evaluators_.reserve(thetas_.size());
  for (const auto& theta : thetas_) {
    const auto f = family.member(theta);
    if (rows.empty()) {
      evaluators_.emplace_back(P_ref, f, cost, space, options);
      for (const auto& a : evaluators_.back().anchors()) rows.push_back(a.costs());
    } else {
      evaluators_.emplace_back(P_ref, f, cost, space, options, rows);
    }
  }
}

double FamilyDualTable::rho_max(double lambda) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& ev : evaluators_) best = std::min(best, ev.expected_min_cost(lambda));
  return best;
}

double critical_radius(const LossFamily& family, const EmpiricalDistribution& P_ref,
                       const TransportCost& cost, const SampleSpace& space, double tie_tol) {
  InnerMaxOptions options;
  options.tie_tol = tie_tol;
  return FamilyDualTable(family, P_ref, cost, space, options).critical_radius();
}

std::vector<std::pair<double, double>> rho_max_curve(const LossFamily& family,
                                                     const EmpiricalDistribution& P_ref,
                                                     const TransportCost& cost,
                                                     const SampleSpace& space,
                                                     const std::vector<double>& lambda_grid,
                                                     double tie_tol) {
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] >= 0.0)) throw DomainError("lambda grid must be nonnegative");
    if (i > 0 && lambda_grid[i] < lambda_grid[i - 1])
      throw DomainError("lambda grid must be ascending");
  }
  InnerMaxOptions options;
  options.tie_tol = tie_tol;
  const FamilyDualTable table(family, P_ref, cost, space, options);
  std::vector<std::pair<double, double>> curve;
  for (double lambda : lambda_grid) curve.emplace_back(lambda, table.rho_max(lambda));
  return curve;
}

double lambda_low_numeric(const FamilyDualTable& table) {
  const double rho_crit = table.critical_radius();
  if (!(rho_crit > 0.0))
    throw InfeasibleError(
        "critical radius is zero: the family contains a (near-)constant member, so no "
        "positive dual lower bound exists");
  const double target = rho_crit / 4.0;
  double lo = 0.0;
  double hi = 1.0;
  while (table.rho_max(hi) >= target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e8) return lo / 2.0;
  }
  while (hi - lo > 1e-6 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (table.rho_max(mid) >= target)
      lo = mid;
    else
      hi = mid;
  }
  return lo / 2.0;
}

double lambda_low_numeric(const LossFamily& family, const EmpiricalDistribution& P_ref,
                          const TransportCost& cost, const SampleSpace& space, double tie_tol) {
  InnerMaxOptions options;
  options.tie_tol = tie_tol;
  return lambda_low_numeric(FamilyDualTable(family, P_ref, cost, space, options));
}

Constants generalization_constants(double lambda_low, double sup_norm, double dudley,
                                   double delta) {
  check_delta(delta);
  if (!(lambda_low > 0.0)) throw DomainError("lambda_low must be > 0");
  if (!(sup_norm >= 0.0) || !(dudley >= 0.0)) throw DomainError("sup_norm and dudley must be >= 0");
  Constants k;
  k.alpha = 48.0 * (sup_norm + 1.0 / lambda_low) * (dudley + 2.0 / lambda_low) +
            (2.0 * sup_norm / lambda_low) * std::sqrt(2.0 * std::log(2.0 / delta));
  k.beta = 96.0 * dudley / lambda_low +
           (4.0 * sup_norm / lambda_low) * std::sqrt(2.0 * std::log(4.0 / delta));
  return k;
}

double n_min_standard(double alpha, double beta, double rho_crit) {
  if (!(rho_crit > 0.0)) throw DomainError("rho_crit must be > 0");
  const double s = alpha + beta;
  return 16.0 * s * s / (rho_crit * rho_crit);
}

double CertificateBundle::rho_admissible_lower(double n) const {
  if (!(n > 0.0)) throw DomainError("n must be > 0");
  return alpha / std::sqrt(n);
}

CertificateBundle certify(const LossFamily& family, const EmpiricalDistribution& P_ref,
                          const TransportCost& cost, const SampleSpace& space, double delta,
                          double tie_tol) {
  InnerMaxOptions options;
  options.tie_tol = tie_tol;
  return certify(family, P_ref, cost, space, delta, options);
}

CertificateBundle certify(const LossFamily& family, const EmpiricalDistribution& P_ref,
                          const TransportCost& cost, const SampleSpace& space, double delta,
                          const InnerMaxOptions& options) {
  check_delta(delta);
  const FamilyDualTable table(family, P_ref, cost, space, options);
  const auto fc = family_constants(family, space, cost.p_norm);
  CertificateBundle b;
  b.delta = delta;
  b.rho_crit = table.critical_radius();
  b.lambda_low = lambda_low_numeric(table);
  b.dudley = fc.dudley;
  b.sup_norm = fc.sup_norm;
  b.lip_xi = fc.lip_xi;
  b.constants_provenance = fc.provenance;
  const auto k = generalization_constants(b.lambda_low, b.sup_norm, b.dudley, delta);
  b.alpha = k.alpha;
  b.beta = k.beta;
  b.n_min = n_min_standard(b.alpha, b.beta, b.rho_crit);
  b.theta_grid_size = table.thetas().size();
  b.grid_resolution = space.grid_resolution();
  return b;
}

double reg_critical_radius(const LossFamily& family, const EmpiricalDistribution& P_ref,
                           const ReferenceKernel& kernel, const TransportCost& cost,
                           const SampleSpace& space, const RegParams& reg) {
  reg.validate();
  P_ref.validate(space);
  const auto thetas = family.theta_grid();
  if (thetas.empty()) throw InfeasibleError("empty loss family");
  std::vector<Quadrature> quads;
  for (const auto& xi : P_ref.atoms) quads.push_back(kernel_quadrature(kernel, xi, space));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& theta : thetas) {
    const auto f = family.member(theta);
    double total = 0.0;
    for (std::size_t i = 0; i < quads.size(); ++i) {
      const auto& q = quads[i];
      std::vector<double> a(q.nodes.size()), fv(q.nodes.size());
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < a.size(); ++k) {
        fv[k] = f(q.nodes[k]);
        a[k] = q.weights[k] > 0.0 ? std::log(q.weights[k]) + fv[k] / reg.epsilon
                                  : -std::numeric_limits<double>::infinity();
        top = std::max(top, a[k]);
      }
      double z = 0.0;
      for (double v : a) z += std::exp(v - top);
      const double lse = top + std::log(z);
      double gibbs = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        if (q.weights[k] <= 0.0) continue;
        const double g = std::exp(a[k] - lse);
        gibbs += g * ((reg.tau / reg.epsilon) * fv[k] + cost_eval(cost, P_ref.atoms[i], q.nodes[k]));
      }
      total += P_ref.weights[i] * (gibbs - reg.tau * lse);
    }
    best = std::min(best, total);
  }
  return best;
}

double lambda_low_reg_closed_form(double sup_norm, double m_c, double m_2c, double rho,
                                  double rho_crit_reg, const RegParams& reg) {
  reg.validate();
  if (!(rho > m_c)) throw InfeasibleError("rho must exceed m_c");
  const double eps = reg.epsilon;
  double exponent_min = 2.0 * sup_norm * m_c / ((rho - m_c) * eps);
  if (reg.tau > 0.0) exponent_min = std::min(m_c / reg.tau, exponent_min);
  const double denom = (reg.tau * reg.tau / (eps * eps)) * sup_norm * sup_norm +
                       m_2c * std::exp(sup_norm / eps + exponent_min);
  if (!(denom > 0.0)) throw InfeasibleError("degenerate regularized constants (zero denominator)");
  return 3.0 * eps * rho_crit_reg / (8.0 * denom);
}

Constants reg_generalization_constants(double lambda_low_reg, double sup_norm, double dudley,
                                       double m_c, double rho, const RegParams& reg,
                                       double delta) {
  check_delta(delta);
  reg.validate();
  if (!(rho > m_c)) throw InfeasibleError("rho must exceed m_c");
  if (!(lambda_low_reg > 0.0)) throw DomainError("lambda_low_reg must be > 0");
  const double eps = reg.epsilon;
  const double lam = lambda_low_reg;
  const double shift =
      2.0 * sup_norm * m_c * eps / (eps * (rho - m_c) + 2.0 * reg.tau * sup_norm);
  Constants k;
  k.alpha = 48.0 * (sup_norm + 1.0 / lam + shift) * (dudley + 2.0 / lam) +
            (2.0 * sup_norm / lam + m_c) * std::sqrt(2.0 * std::log(2.0 / delta));
  k.beta = 96.0 * dudley / lam + 4.0 * (sup_norm / lam + m_c) * std::sqrt(2.0 * std::log(4.0 / delta));
  return k;
}

RegCertificateBundle certify_reg(const LossFamily& family, const EmpiricalDistribution& P_ref,
                                 const ReferenceKernel& kernel, const TransportCost& cost,
                                 const SampleSpace& space, const RegParams& reg, double rho,
                                 double delta) {
  const auto moments = kernel_moments(kernel, cost, space);
  const auto fc = family_constants(family, space, cost.p_norm);
  RegCertificateBundle b;
  b.rho = rho;
  b.delta = delta;
  b.m_c = moments.m_c;
  b.m_2c = moments.m_2c;
  b.sup_norm = fc.sup_norm;
  b.dudley = fc.dudley;
  b.lambda_up = lambda_up(rho, fc.sup_norm, moments.m_c);
  b.rho_crit_reg = reg_critical_radius(family, P_ref, kernel, cost, space, reg);
  b.vacuous = b.rho_crit_reg <= 4.0 * b.m_c;
  if (b.rho_crit_reg > 0.0) {
    b.lambda_low_reg =
        lambda_low_reg_closed_form(b.sup_norm, b.m_c, b.m_2c, rho, b.rho_crit_reg, reg);
    const auto k =
        reg_generalization_constants(b.lambda_low_reg, b.sup_norm, b.dudley, b.m_c, rho, reg, delta);
    b.alpha_reg = k.alpha;
    b.beta_reg = k.beta;
  }
  if (b.vacuous || !(b.lambda_low_reg > 0.0)) {
    b.n_min_reg = std::numeric_limits<double>::infinity();
  } else {
    const double s = b.alpha_reg + b.beta_reg;
    const double gap = b.rho_crit_reg - 4.0 * b.m_c;
    b.n_min_reg = 16.0 * s * s / (gap * gap);
  }
  return b;
}

LinearModelBounds linear_model_constants(LinearModelKind kind, double omega, double Omega,
                                         double D) {
  if (!(omega > 0.0)) throw DomainError("omega must be > 0");
  if (!(D > 0.0)) throw DomainError("D must be > 0");
  LinearModelBounds b;
  b.rho_crit_lb = D * D;
  if (kind == LinearModelKind::linear_regression) {
    b.lambda_low_lb = omega / 2.0;
    b.conditions =
        "squared Euclidean cost; inf ||(theta,-1)||^2 >= omega with omega >= 1; data in a ball of "
        "diameter D, domain extending D beyond it";
    if (omega < 1.0) b.conditions += " (violated: omega < 1)";
  } else {
    if (!(Omega >= 0.0)) throw DomainError("Omega must be >= 0");
    b.lambda_low_lb = omega / (8.0 * (1.0 + std::exp(D * Omega)));
    b.conditions =
        "squared Euclidean cost; inf ||theta||^2 >= omega; Omega = sup ||theta||^2; data in a "
        "ball of diameter D, domain extending D beyond it";
  }
  return b;
}

DegeneracyReport degeneracy_check(const FamilyDualTable& table, double rho, double tol,
                                  double solver_tol) {
  if (!(rho >= 0.0)) throw DomainError("rho must be >= 0");
  if (!(tol >= 0.0)) throw DomainError("tolerance must be >= 0");
  DegeneracyReport r;
  r.tolerance = tol;
  r.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < table.thetas().size(); ++t) {
    const auto& ev = table.evaluators()[t];
    const double top = ev.expected_phi(0.0);
    const double risk = robust_risk(ev, rho, solver_tol);
    const double gap = std::max(0.0, top - risk);
    if (gap < r.min_gap) {
      r.min_gap = gap;
      r.theta = table.thetas()[t];
    }
  }
  r.degenerate = r.min_gap <= tol;
  return r;
}

DegeneracyReport degeneracy_check(const LossFamily& family, const EmpiricalDistribution& P_ref,
                                  double rho, const TransportCost& cost,
                                  const SampleSpace& space, double tol) {
  return degeneracy_check(FamilyDualTable(family, P_ref, cost, space), rho, tol);
}

}  // namespace wdro
