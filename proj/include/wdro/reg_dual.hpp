#pragma once

#include <string>
#include <vector>

#include "wdro/losses.hpp"
#include "wdro/robust_risk.hpp"
#include "wdro/space.hpp"

namespace wdro {

enum class KernelKind { truncated_gaussian, uniform, truncated_laplace };

const char* to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

/// Reference conditional kernel pi0(.|xi) restricted to the space. Label
/// coordinates always get a uniform conditional.
struct ReferenceKernel {
  KernelKind kind = KernelKind::truncated_gaussian;
  double sigma = -1.0;  // gaussian; <= 0 means max box edge / 4
  double scale = 1.0;   // laplace: density ~ exp(-||z - xi||_1 / scale)
  int quadrature_nodes = 41;

  void validate() const;
  /// Unnormalized log density of z given xi.
  double log_density(const SamplePoint& xi, const SamplePoint& z, const SampleSpace& space) const;
  friend bool operator==(const ReferenceKernel&, const ReferenceKernel&) = default;
};

struct RegParams {
  double tau = 0.0;
  double epsilon = 1.0;
  void validate() const;
  friend bool operator==(const RegParams&, const RegParams&) = default;
};

struct KernelMoments {
  double m_c = 0.0;
  double m_2c = 0.0;
};

struct Quadrature {
  std::vector<SamplePoint> nodes;
  std::vector<double> weights;
};

/// Nodes: the grid of `space` at kernel.quadrature_nodes per axis; weights
/// proportional to the kernel density, normalized to 1.
Quadrature kernel_quadrature(const ReferenceKernel& kernel, const SamplePoint& xi,
                             const SampleSpace& space);

/// Maxima over the quadrature grid of E[c(xi, .)] and E[c(xi, .)^2].
KernelMoments kernel_moments(const ReferenceKernel& kernel, const TransportCost& cost,
                             const SampleSpace& space);

/// Regularized generator for one anchor, on precomputed quadrature data.
class RegAnchor {
 public:
  RegAnchor(const MemberFunction& f, const SamplePoint& xi, const ReferenceKernel& kernel,
            const TransportCost& cost, const SampleSpace& space);
  RegAnchor(std::vector<double> log_weights, std::vector<double> f_values,
            std::vector<double> costs);

  double value(double lambda, const RegParams& reg) const;
  double derivative(double lambda, const RegParams& reg) const;
  /// max |f| over the quadrature nodes.
  double f_abs_max() const;

 private:
  std::vector<double> log_w_;
  std::vector<double> f_;
  std::vector<double> c_;
};

double phi_reg(double lambda, const MemberFunction& f, const SamplePoint& xi,
               const ReferenceKernel& kernel, const TransportCost& cost,
               const SampleSpace& space, const RegParams& reg);

double phi_reg_derivative(double lambda, const MemberFunction& f, const SamplePoint& xi,
                          const ReferenceKernel& kernel, const TransportCost& cost,
                          const SampleSpace& space, const RegParams& reg);

/// 2 sup_norm / (rho - m_c); rho must exceed m_c.
double lambda_up(double rho, double sup_norm, double m_c);

/// E_Q[phi_reg] with per-atom caches.
class RegDualEvaluator {
 public:
  RegDualEvaluator(const EmpiricalDistribution& Q, const MemberFunction& f,
                   const ReferenceKernel& kernel, const TransportCost& cost,
                   const SampleSpace& space, const RegParams& reg);
  RegDualEvaluator(std::vector<RegAnchor> anchors, std::vector<double> weights,
                   const RegParams& reg, double f_abs_max);

  double expected_phi(double lambda) const;
  double objective(double lambda, double rho) const { return lambda * rho + expected_phi(lambda); }
  /// max |f| over atoms and quadrature nodes.
  double f_abs_max() const { return f_abs_max_; }

 private:
  std::vector<RegAnchor> anchors_;
  std::vector<double> weights_;
  RegParams reg_;
  double f_abs_max_ = 0.0;
};

/// Golden-section minimization over [0, interval_scale * lambda_up].
DualSolveResult solve_reg_dual(const RegDualEvaluator& evaluator, double rho, double m_c,
                               double sup_norm, double tol = 1e-8,
                               double interval_scale = 1.0);

DualSolveResult robust_risk_reg(const EmpiricalDistribution& Q, const MemberFunction& f,
                                double rho, const ReferenceKernel& kernel,
                                const TransportCost& cost, const SampleSpace& space,
                                const RegParams& reg, double tol = 1e-8);

/// Same with precomputed moments and sup norm.
DualSolveResult robust_risk_reg(const EmpiricalDistribution& Q, const MemberFunction& f,
                                double rho, const ReferenceKernel& kernel,
                                const TransportCost& cost, const SampleSpace& space,
                                const RegParams& reg, double tol, const KernelMoments& moments,
                                double sup_norm, double interval_scale = 1.0);

/// |d/dmu [mu phi_reg(1/mu)]| by central differences (h = 1e-3 mu), for the
/// truncated Laplace kernel with tau = 0.
std::vector<double> psi_mu_derivative_probe(const std::vector<double>& mu_list,
                                            const MemberFunction& f, const SamplePoint& xi,
                                            const ReferenceKernel& kernel,
                                            const TransportCost& cost, const SampleSpace& space,
                                            const RegParams& reg);

}  // namespace wdro
