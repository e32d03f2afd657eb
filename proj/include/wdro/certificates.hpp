#pragma once

#include <string>
#include <utility>
#include <vector>

#include "wdro/dual.hpp"
#include "wdro/losses.hpp"
#include "wdro/reg_dual.hpp"
#include "wdro/robust_risk.hpp"

namespace wdro {

/// Dual evaluators for every member of the parameter grid against one
/// reference distribution; cost rows are shared between members.
class FamilyDualTable {
 public:
  FamilyDualTable(const LossFamily& family, const EmpiricalDistribution& P_ref,
                  const TransportCost& cost, const SampleSpace& space,
                  InnerMaxOptions options = {});

  /// min over members of E_P[min cost to argmax(f - lambda c)].
  double rho_max(double lambda) const;
  double critical_radius() const { return rho_max(0.0); }

  const std::vector<std::vector<double>>& thetas() const { return thetas_; }
  const std::vector<DualEvaluator>& evaluators() const { return evaluators_; }

 private:
  std::vector<std::vector<double>> thetas_;
  std::vector<DualEvaluator> evaluators_;
};

double critical_radius(const LossFamily& family, const EmpiricalDistribution& P_ref,
                       const TransportCost& cost, const SampleSpace& space,
                       double tie_tol = -1.0);

std::vector<std::pair<double, double>> rho_max_curve(const LossFamily& family,
                                                     const EmpiricalDistribution& P_ref,
                                                     const TransportCost& cost,
                                                     const SampleSpace& space,
                                                     const std::vector<double>& lambda_grid,
                                                     double tie_tol = -1.0);

/// Half the largest lambda with rho_max(lambda) >= rho_crit / 4 (bisection).
double lambda_low_numeric(const FamilyDualTable& table);
double lambda_low_numeric(const LossFamily& family, const EmpiricalDistribution& P_ref,
                          const TransportCost& cost, const SampleSpace& space,
                          double tie_tol = -1.0);

struct Constants {
  double alpha = 0.0;
  double beta = 0.0;
};

Constants generalization_constants(double lambda_low, double sup_norm, double dudley,
                                   double delta);

/// 16 (alpha + beta)^2 / rho_crit^2.
double n_min_standard(double alpha, double beta, double rho_crit);

struct CertificateBundle {
  double rho_crit = 0.0;
  double lambda_low = 0.0;
  double dudley = 0.0;
  double sup_norm = 0.0;
  double lip_xi = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double n_min = 0.0;
  double delta = 0.05;
  std::string constants_provenance;
  std::size_t theta_grid_size = 0;
  int grid_resolution = 0;

  /// Lower end of the admissible radius interval (alpha / sqrt(n), inf).
  double rho_admissible_lower(double n) const;
};

CertificateBundle certify(const LossFamily& family, const EmpiricalDistribution& P_ref,
                          const TransportCost& cost, const SampleSpace& space, double delta,
                          double tie_tol = -1.0);
CertificateBundle certify(const LossFamily& family, const EmpiricalDistribution& P_ref,
                          const TransportCost& cost, const SampleSpace& space, double delta,
                          const InnerMaxOptions& options);

double reg_critical_radius(const LossFamily& family, const EmpiricalDistribution& P_ref,
                           const ReferenceKernel& kernel, const TransportCost& cost,
                           const SampleSpace& space, const RegParams& reg);

double lambda_low_reg_closed_form(double sup_norm, double m_c, double m_2c, double rho,
                                  double rho_crit_reg, const RegParams& reg);

Constants reg_generalization_constants(double lambda_low_reg, double sup_norm, double dudley,
                                       double m_c, double rho, const RegParams& reg,
                                       double delta);

struct RegCertificateBundle {
  double rho = 0.0;
  double rho_crit_reg = 0.0;
  double m_c = 0.0;
  double m_2c = 0.0;
  double sup_norm = 0.0;
  double dudley = 0.0;
  double lambda_low_reg = 0.0;
  double lambda_up = 0.0;
  double alpha_reg = 0.0;
  double beta_reg = 0.0;
  double n_min_reg = 0.0;  // +inf when vacuous
  double delta = 0.05;
  bool vacuous = false;    // rho_crit_reg <= 4 m_c
};

RegCertificateBundle certify_reg(const LossFamily& family, const EmpiricalDistribution& P_ref,
                                 const ReferenceKernel& kernel, const TransportCost& cost,
                                 const SampleSpace& space, const RegParams& reg, double rho,
                                 double delta);

enum class LinearModelKind { linear_regression, logistic_regression };

struct LinearModelBounds {
  double rho_crit_lb = 0.0;
  double lambda_low_lb = 0.0;
  std::string conditions;
};

/// Lower bounds for squared-cost linear models when the data lie in a ball
/// of diameter D and the domain extends D beyond it.
LinearModelBounds linear_model_constants(LinearModelKind kind, double omega, double Omega,
                                         double D);

struct DegeneracyReport {
  double min_gap = 0.0;  // min over members of max f - robust risk
  std::vector<double> theta;
  double tolerance = 0.0;
  bool degenerate = false;
};

DegeneracyReport degeneracy_check(const LossFamily& family, const EmpiricalDistribution& P_ref,
                                  double rho, const TransportCost& cost,
                                  const SampleSpace& space, double tol);
DegeneracyReport degeneracy_check(const FamilyDualTable& table, double rho, double tol,
                                  double solver_tol = 1e-8);

}  // namespace wdro
