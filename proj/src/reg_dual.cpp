#include "wdro/reg_dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wdro/error.hpp"

namespace wdro {

namespace {

constexpr double kInvPhi = 0.6180339887498949;

double log_sum_exp(const std::vector<double>& a) {
  const double m = *std::max_element(a.begin(), a.end());
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double v : a) s += std::exp(v - m);
  return m + std::log(s);
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || std::isinf(lambda)) throw DomainError("lambda must be finite and >= 0");
}

}  // namespace

const char* to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::truncated_gaussian: return "truncated_gaussian";
    case KernelKind::uniform: return "uniform";
    case KernelKind::truncated_laplace: return "truncated_laplace";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  for (auto k : {KernelKind::truncated_gaussian, KernelKind::uniform, KernelKind::truncated_laplace})
    if (name == to_string(k)) return k;
  throw DomainError("unknown kernel kind '" + name + "'");
}

void ReferenceKernel::validate() const {
  if (quadrature_nodes < 2) throw DomainError("quadrature_nodes must be >= 2");
  if (kind == KernelKind::truncated_laplace && !(scale > 0.0))
    throw DomainError("laplace kernel scale must be > 0");
  if (!std::isfinite(sigma)) throw DomainError("kernel sigma must be finite");
}

double ReferenceKernel::log_density(const SamplePoint& xi, const SamplePoint& z,
                                    const SampleSpace& space) const {
  switch (kind) {
    case KernelKind::uniform:
      return 0.0;
    case KernelKind::truncated_gaussian: {
      const double s = sigma > 0.0 ? sigma : space.max_edge() / 4.0;
      if (!(s > 0.0)) return 0.0;  // zero-volume box: a single node anyway
      double d2 = 0.0;
      for (std::size_t i = 0; i < xi.continuous.size(); ++i) {
        const double d = xi.continuous[i] - z.continuous[i];
        d2 += d * d;
      }
      return -d2 / (2.0 * s * s);
    }
    case KernelKind::truncated_laplace: {
      double d1 = 0.0;
      for (std::size_t i = 0; i < xi.continuous.size(); ++i)
        d1 += std::abs(xi.continuous[i] - z.continuous[i]);
      return -d1 / scale;
    }
  }
  return 0.0;
}

void RegParams::validate() const {
  if (!(epsilon > 0.0) || std::isinf(epsilon)) throw DomainError("epsilon must be finite and > 0");
  if (!(tau >= 0.0) || std::isinf(tau)) throw DomainError("tau must be finite and >= 0");
}

Quadrature kernel_quadrature(const ReferenceKernel& kernel, const SamplePoint& xi,
                             const SampleSpace& space) {
  kernel.validate();
  space.check_shape(xi);
  Quadrature q;
  q.nodes = grid(space, kernel.quadrature_nodes);
  std::vector<double> logs(q.nodes.size());
  for (std::size_t k = 0; k < q.nodes.size(); ++k) logs[k] = kernel.log_density(xi, q.nodes[k], space);
  const double norm = log_sum_exp(logs);
  if (!std::isfinite(norm)) throw SolverError("kernel has zero total mass");
  q.weights.resize(logs.size());
  for (std::size_t k = 0; k < logs.size(); ++k) q.weights[k] = std::exp(logs[k] - norm);
  return q;
}

KernelMoments kernel_moments(const ReferenceKernel& kernel, const TransportCost& cost,
                             const SampleSpace& space) {
  kernel.validate();
  cost.validate();
  const auto nodes = grid(space, kernel.quadrature_nodes);
  KernelMoments m;
  std::vector<double> logs(nodes.size());
  for (const auto& xi : nodes) {
    for (std::size_t k = 0; k < nodes.size(); ++k) logs[k] = kernel.log_density(xi, nodes[k], space);
    const double norm = log_sum_exp(logs);
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const double w = std::exp(logs[k] - norm);
      const double c = cost_eval(cost, xi, nodes[k]);
      e1 += w * c;
      e2 += w * c * c;
    }
    m.m_c = std::max(m.m_c, e1);
    m.m_2c = std::max(m.m_2c, e2);
  }
  return m;
}

RegAnchor::RegAnchor(const MemberFunction& f, const SamplePoint& xi,
                     const ReferenceKernel& kernel, const TransportCost& cost,
                     const SampleSpace& space) {
  const auto q = kernel_quadrature(kernel, xi, space);
  for (std::size_t k = 0; k < q.nodes.size(); ++k) {
    if (q.weights[k] <= 0.0) continue;  // underflow: drops out of every expectation
    log_w_.push_back(std::log(q.weights[k]));
    f_.push_back(f(q.nodes[k]));
    c_.push_back(cost_eval(cost, xi, q.nodes[k]));
  }
}

RegAnchor::RegAnchor(std::vector<double> log_weights, std::vector<double> f_values,
                     std::vector<double> costs)
    : log_w_(std::move(log_weights)), f_(std::move(f_values)), c_(std::move(costs)) {
  if (log_w_.empty() || log_w_.size() != f_.size() || f_.size() != c_.size())
    throw DomainError("quadrature arrays must be nonempty and of equal length");
}

double RegAnchor::value(double lambda, const RegParams& reg) const {
  check_lambda(lambda);
  reg.validate();
  const double s = reg.epsilon + lambda * reg.tau;
  std::vector<double> a(f_.size());
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = log_w_[k] + (f_[k] - lambda * c_[k]) / s;
  const double v = s * log_sum_exp(a);
  if (!std::isfinite(v)) throw SolverError("non-finite regularized generator");
  return v;
}

double RegAnchor::derivative(double lambda, const RegParams& reg) const {
  check_lambda(lambda);
  reg.validate();
  const double s = reg.epsilon + lambda * reg.tau;
  std::vector<double> a(f_.size());
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = log_w_[k] + (f_[k] - lambda * c_[k]) / s;
  const double lse = log_sum_exp(a);
  double gibbs = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    gibbs += std::exp(a[k] - lse) * (reg.tau * f_[k] + reg.epsilon * c_[k]) / s;
  return -gibbs + reg.tau * lse;
}

double RegAnchor::f_abs_max() const {
  double m = 0.0;
  for (double v : f_) m = std::max(m, std::abs(v));
  return m;
}

double phi_reg(double lambda, const MemberFunction& f, const SamplePoint& xi,
               const ReferenceKernel& kernel, const TransportCost& cost,
               const SampleSpace& space, const RegParams& reg) {
  check_lambda(lambda);
  reg.validate();
  return RegAnchor(f, xi, kernel, cost, space).value(lambda, reg);
}

double phi_reg_derivative(double lambda, const MemberFunction& f, const SamplePoint& xi,
                          const ReferenceKernel& kernel, const TransportCost& cost,
                          const SampleSpace& space, const RegParams& reg) {
  check_lambda(lambda);
  reg.validate();
  return RegAnchor(f, xi, kernel, cost, space).derivative(lambda, reg);
}

double lambda_up(double rho, double sup_norm, double m_c) {
  if (!(sup_norm >= 0.0)) throw DomainError("sup_norm must be >= 0");
  if (!(rho > m_c))
    throw InfeasibleError("rho = " + std::to_string(rho) + " must exceed the conditional moment m_c = " +
                          std::to_string(m_c) +
                          " for the regularized dual to be well posed; increase rho");
  return 2.0 * sup_norm / (rho - m_c);
}

RegDualEvaluator::RegDualEvaluator(const EmpiricalDistribution& Q, const MemberFunction& f,
                                   const ReferenceKernel& kernel, const TransportCost& cost,
                                   const SampleSpace& space, const RegParams& reg)
    : weights_(Q.weights), reg_(reg) {
  reg.validate();
  Q.validate(space);
  anchors_.reserve(Q.size());
  for (const auto& xi : Q.atoms) {
    anchors_.emplace_back(f, xi, kernel, cost, space);
    f_abs_max_ = std::max({f_abs_max_, anchors_.back().f_abs_max(), std::abs(f(xi))});
  }
}

RegDualEvaluator::RegDualEvaluator(std::vector<RegAnchor> anchors, std::vector<double> weights,
                                   const RegParams& reg, double f_abs_max)
    : anchors_(std::move(anchors)), weights_(std::move(weights)), reg_(reg), f_abs_max_(f_abs_max) {
  reg.validate();
  if (anchors_.empty() || anchors_.size() != weights_.size())
    throw DomainError("one weight per anchor expected");
}

double RegDualEvaluator::expected_phi(double lambda) const {
  double s = 0.0;
  for (std::size_t i = 0; i < anchors_.size(); ++i) s += weights_[i] * anchors_[i].value(lambda, reg_);
  return s;
}

DualSolveResult solve_reg_dual(const RegDualEvaluator& ev, double rho, double m_c,
                               double sup_norm, double tol, double interval_scale) {
  if (!(tol > 0.0)) throw DomainError("tol must be > 0");
  if (!(interval_scale > 0.0)) throw DomainError("interval_scale must be > 0");
  const double cap = interval_scale * lambda_up(rho, sup_norm, m_c);

  DualSolveResult out;
  double best = std::numeric_limits<double>::infinity();
  double best_lambda = 0.0;
  auto obj = [&](double lambda) {
    const double v = ev.objective(lambda, rho);
    ++out.evaluations;
    if (v < best) {
      best = v;
      best_lambda = lambda;
    }
    return v;
  };
  obj(0.0);
  obj(cap);
  double a = 0.0, b = cap;
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
  out.lambda_star = best_lambda;
  out.value = best;
  out.bracket_lo = std::min(a, best_lambda);
  out.bracket_hi = std::max(b, best_lambda);
  return out;
}

DualSolveResult robust_risk_reg(const EmpiricalDistribution& Q, const MemberFunction& f,
                                double rho, const ReferenceKernel& kernel,
                                const TransportCost& cost, const SampleSpace& space,
                                const RegParams& reg, double tol) {
  const auto moments = kernel_moments(kernel, cost, space);
  if (!(rho > moments.m_c)) lambda_up(rho, 0.0, moments.m_c);  // throws
  const RegDualEvaluator ev(Q, f, kernel, cost, space, reg);
  return solve_reg_dual(ev, rho, moments.m_c, ev.f_abs_max(), tol);
}

DualSolveResult robust_risk_reg(const EmpiricalDistribution& Q, const MemberFunction& f,
                                double rho, const ReferenceKernel& kernel,
                                const TransportCost& cost, const SampleSpace& space,
                                const RegParams& reg, double tol, const KernelMoments& moments,
                                double sup_norm, double interval_scale) {
  if (!(rho > moments.m_c)) lambda_up(rho, sup_norm, moments.m_c);
  const RegDualEvaluator ev(Q, f, kernel, cost, space, reg);
  return solve_reg_dual(ev, rho, moments.m_c, sup_norm, tol, interval_scale);
}

std::vector<double> psi_mu_derivative_probe(const std::vector<double>& mu_list,
                                            const MemberFunction& f, const SamplePoint& xi,
                                            const ReferenceKernel& kernel,
                                            const TransportCost& cost, const SampleSpace& space,
                                            const RegParams& reg) {
  reg.validate();
  if (reg.tau != 0.0) throw DomainError("the psi derivative probe requires tau = 0");
  if (kernel.kind != KernelKind::truncated_laplace)
    throw DomainError("the psi derivative probe requires the truncated_laplace kernel");
  const RegAnchor anchor(f, xi, kernel, cost, space);
  auto psi_reg = [&](double mu) { return mu * anchor.value(1.0 / mu, reg); };
  std::vector<double> out;
  for (double mu : mu_list) {
    if (!(mu > 0.0)) throw DomainError("mu values must be > 0");
    const double h = 1e-3 * mu;
    out.push_back(std::abs((psi_reg(mu + h) - psi_reg(mu - h)) / (2.0 * h)));
  }
  return out;
}

}  // namespace wdro
