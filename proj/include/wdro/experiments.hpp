#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "wdro/losses.hpp"
#include "wdro/reg_dual.hpp"
#include "wdro/robust_risk.hpp"
#include "wdro/space.hpp"

namespace wdro {

enum class TruthKind { uniform_box, truncated_gaussian, label_mixture, dataset };

const char* to_string(TruthKind kind);
TruthKind truth_kind_from_string(const std::string& name);

struct GroundTruth {
  TruthKind kind = TruthKind::uniform_box;
  std::vector<double> mean;                      // truncated_gaussian, per continuous axis
  std::vector<double> sigma;                     // one value (broadcast) or one per axis
  std::vector<std::vector<double>> class_means;  // label_mixture, per class and axis
  std::vector<double> class_probs;               // label_mixture, over the first label
  std::string path;                              // dataset
  std::vector<SamplePoint> rows;                 // dataset, filled by load_dataset_csv
  bool replace = true;                           // dataset sampling with replacement

  void validate(const SampleSpace& space) const;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// Rows of a CSV with header x1..xm,y. With one label coordinate in the space
/// y becomes the label (-1 maps to 0); otherwise y is the last continuous
/// coordinate.
std::vector<SamplePoint> load_dataset_csv(const std::string& path, const SampleSpace& space);

/// The population distribution as weighted atoms: trapezoid-weighted density
/// on grid(space) for the parametric kinds, the dataset rows for datasets.
EmpiricalDistribution reference_distribution(const GroundTruth& truth, const SampleSpace& space);

/// Deterministic per-trial stream from (master_seed, trial_index).
struct TrialSeed {
  std::uint64_t master_seed = 0;
  std::uint64_t trial_index = 0;

  std::uint64_t derived() const;
};

std::uint64_t splitmix64(std::uint64_t& state);

class TrialRng {
 public:
  explicit TrialRng(TrialSeed seed) : engine_(seed.derived()) {}
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

EmpiricalDistribution sample(const GroundTruth& truth, const SampleSpace& space, int n,
                             TrialSeed seed);

/// Density-table quadrature of E_P[f].
double true_mean(const GroundTruth& truth, const MemberFunction& f, const SampleSpace& space);

struct ExperimentSetup {
  SampleSpace space;
  TransportCost cost;
  LossFamily family = LossFamily::linear({}, 1);
  GroundTruth truth;
  std::optional<ReferenceKernel> kernel;
  std::optional<RegParams> reg;
  std::vector<int> n_list{100};
  std::vector<double> rho_list{0.0};
  int trials = 200;
  std::uint64_t master_seed = 0;
  double tol = 1e-8;
  double tie_tol = -1.0;
  bool refine = true;  // continuous polish of smooth members
  double delta = 0.05;
  double target_coverage = 0.9;
  int workers = 1;
};

struct TrialRecord {
  int trial_index = 0;
  std::uint64_t seed = 0;
  std::vector<double> worst_theta;
  double min_slack = 0.0;
  bool failed = false;
};

struct CoverageReport {
  int n = 0;
  double rho = 0.0;
  int trials = 0;
  int failures = 0;
  double coverage = 0.0;
  std::vector<TrialRecord> per_trial;
  double wall_time = 0.0;
};

/// Runs fn(i) for i in [0, count) on `workers` threads.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

/// One report per (n, rho); trials are paired across rho (same samples).
std::vector<CoverageReport> run_coverage(const ExperimentSetup& setup);

/// Single trial of the standard coverage experiment, for reproduction.
TrialRecord run_coverage_trial(const ExperimentSetup& setup, int n, double rho,
                               int trial_index);

/// Smallest rho with R_rho(f) >= E_P[f] for every member, for one sample.
double coverage_threshold(const EmpiricalDistribution& sample, const LossFamily& family,
                          const std::vector<double>& true_means, const TransportCost& cost,
                          const SampleSpace& space, double tie_tol = -1.0,
                          bool refine = true);

struct SweepRow {
  int n = 0;
  double rho_star = 0.0;
  double rho_star_sqrt_n = 0.0;
  int failures = 0;
  bool flagged = false;  // target coverage unreachable
};

std::vector<SweepRow> sweep_radius_scaling(const ExperimentSetup& setup);

/// Regularized coverage against E_{P x pi0}[f]; every rho must exceed m_c.
std::vector<CoverageReport> run_coverage_reg(const ExperimentSetup& setup);

struct GapRecord {
  int n = 0;
  int trial_index = 0;
  std::uint64_t seed = 0;
  double gap = 0.0;
  double gap_sqrt_n = 0.0;
  bool within_alpha = false;  // gap <= alpha / sqrt(n)
};

/// Per trial sup over a (mu, theta) grid, mu in (0, 1/lambda_low], of
/// E_P[psi(mu, f)] - E_Pn[psi(mu, f)].
std::vector<GapRecord> measure_uniform_gap(const ExperimentSetup& setup, double lambda_low,
                                           double alpha, int mu_points = 16);

struct ExcessRecord {
  int n = 0;
  double rho = 0.0;
  int trial_index = 0;
  std::uint64_t seed = 0;
  double gap = 0.0;        // measured uniform gap used in place of alpha / sqrt(n)
  double min_slack = 0.0;  // min over members of bound - robust risk
  int violations = 0;
};

std::vector<ExcessRecord> run_excess(const ExperimentSetup& setup, double lambda_low,
                                     int mu_points = 16);

}  // namespace wdro
