#pragma once

#include <memory>
#include <vector>

#include "wdro/dual.hpp"
#include "wdro/losses.hpp"
#include "wdro/space.hpp"

namespace wdro {

struct EmpiricalDistribution {
  std::vector<SamplePoint> atoms;
  std::vector<double> weights;

  static EmpiricalDistribution uniform(std::vector<SamplePoint> atoms);
  /// Throws DomainError unless weights are positive, sum to 1 within 1e-12
  /// and every atom lies in `space`.
  void validate(const SampleSpace& space) const;
  std::size_t size() const { return atoms.size(); }
};

struct DualSolveResult {
  double lambda_star = 0.0;
  double value = 0.0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  int evaluations = 0;
  bool flat_at_infinity = false;
};

struct WorstCaseDistribution {
  std::vector<SamplePoint> atoms;
  std::vector<double> weights;
  double transport_cost_used = 0.0;
  double value = 0.0;  // expectation of f under the returned distribution
};

/// Expected dual generator E_Q[phi(lambda, f, .)] with per-atom caches, so
/// repeated evaluations in lambda only rescan the grid.
class DualEvaluator {
 public:
  DualEvaluator(const EmpiricalDistribution& Q, const MemberFunction& f,
                const TransportCost& cost, const SampleSpace& space,
                InnerMaxOptions options = {});
  /// Shares per-atom cost rows (from GridMaximizer::costs_to) across members.
  DualEvaluator(const EmpiricalDistribution& Q, const MemberFunction& f,
                const TransportCost& cost, const SampleSpace& space, InnerMaxOptions options,
                const std::vector<std::shared_ptr<const std::vector<double>>>& atom_costs);

  double expected_phi(double lambda) const;
  /// E_Q of the minimal cost to the argmax set (= minus the right derivative).
  double expected_min_cost(double lambda) const;
  double objective(double lambda, double rho) const { return lambda * rho + expected_phi(lambda); }

  double mean_f() const { return mean_f_; }
  const GridMaximizer& maximizer() const { return *maximizer_; }
  const std::vector<GridMaximizer::Anchor>& anchors() const { return anchors_; }
  const std::vector<double>& weights() const { return weights_; }

 private:
  std::shared_ptr<GridMaximizer> maximizer_;
  std::vector<GridMaximizer::Anchor> anchors_;
  std::vector<double> weights_;
  double mean_f_ = 0.0;
};

double dual_objective(double lambda, const EmpiricalDistribution& Q, const MemberFunction& f,
                      double rho, const TransportCost& cost, const SampleSpace& space);

/// Minimizes the convex objective lambda*rho + E_Q[phi] by geometric bracket
/// growth and golden-section search. rho must be > 0.
DualSolveResult solve_dual(const DualEvaluator& evaluator, double rho, double tol = 1e-8);
DualSolveResult solve_dual(const EmpiricalDistribution& Q, const MemberFunction& f, double rho,
                           const TransportCost& cost, const SampleSpace& space,
                           double tol = 1e-8);

/// Robust risk; rho = 0 returns E_Q[f] exactly.
double robust_risk(const DualEvaluator& evaluator, double rho, double tol = 1e-8);
double robust_risk(const EmpiricalDistribution& Q, const MemberFunction& f, double rho,
                   const TransportCost& cost, const SampleSpace& space, double tol = 1e-8);

/// Exact primal value over couplings supported on atoms x grid(space).
double primal_oracle(const EmpiricalDistribution& Q, const MemberFunction& f, double rho,
                     const TransportCost& cost, const SampleSpace& space);

WorstCaseDistribution worst_case_distribution(const EmpiricalDistribution& Q,
                                              const MemberFunction& f, double rho,
                                              const TransportCost& cost,
                                              const SampleSpace& space, double tol = 1e-8);

struct TrainResult {
  std::vector<double> theta;
  double value = 0.0;
};

/// Minimizes the robust risk over the parameter grid; ties go to the
/// lexicographically smallest parameter.
TrainResult train_robust(const EmpiricalDistribution& Q, const LossFamily& family, double rho,
                         const TransportCost& cost, const SampleSpace& space,
                         double tol = 1e-8);

struct ExcessReport {
  double robust_value = 0.0;  // empirical robust risk
  double bound = 0.0;         // true_mean + lip_f * (rho + alpha/sqrt(n))^(1/p)
  double slack = 0.0;         // bound - robust_value
  bool holds = false;
};

/// Checks robust risk <= true_mean + lip_f (rho + alpha_over_sqrt_n)^(1/power_p).
/// The cost must be ||.||^power_p on a label-free space.
ExcessReport excess_gap_check(const EmpiricalDistribution& Q, const MemberFunction& f,
                              double rho, double alpha_over_sqrt_n, double lip_f,
                              double power_p, double true_mean, const TransportCost& cost,
                              const SampleSpace& space, double tol = 1e-8);

}  // namespace wdro
