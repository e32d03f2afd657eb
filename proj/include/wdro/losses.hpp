#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "wdro/space.hpp"

namespace wdro {

enum class LossKind { least_squares, logistic, hinge, kmeans, linear, tabulated };

const char* to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// One member f(theta, .) of a loss family, seen as a function on the sample
/// space. `smooth` enables continuous refinement in the inner maximization.
class MemberFunction {
 public:
  using Eval = std::function<double(const SamplePoint&)>;

  MemberFunction(Eval eval, bool smooth) : eval_(std::move(eval)), smooth_(smooth) {}

  double operator()(const SamplePoint& z) const { return eval_(z); }
  bool smooth() const { return smooth_; }

  static MemberFunction constant(double value) {
    return MemberFunction([value](const SamplePoint&) { return value; }, true);
  }

 private:
  Eval eval_;
  bool smooth_;
};

/// Parametric family {f(theta, .) : theta in theta_box}.
///
/// Sample conventions per kind:
///  - least_squares: (<theta, x> - y)^2 with x the first m-1 continuous
///    coordinates and y the last one;
///  - logistic, hinge: x all continuous coordinates, y = +1 for label 1 and
///    -1 for label 0 of the first label coordinate;
///  - kmeans: min_i ||theta_i - x||^2, theta stacked cluster-major;
///  - linear: <theta, x> over all continuous coordinates;
///  - tabulated: theta is a table index, values given on grid(space) and
///    multilinearly interpolated between nodes.
class LossFamily {
 public:
  static LossFamily least_squares(std::vector<Interval> theta_box, int theta_grid_resolution);
  static LossFamily logistic(std::vector<Interval> theta_box, int theta_grid_resolution);
  static LossFamily hinge(std::vector<Interval> theta_box, int theta_grid_resolution);
  static LossFamily linear(std::vector<Interval> theta_box, int theta_grid_resolution);
  static LossFamily kmeans(int clusters, std::vector<Interval> theta_box,
                           int theta_grid_resolution);
  /// tables[t][g] is the value of member t at node g of grid(space).
  static LossFamily tabulated(const SampleSpace& space,
                              std::vector<std::vector<double>> tables);

  LossKind kind() const { return kind_; }
  const std::vector<Interval>& theta_box() const { return theta_box_; }
  int theta_grid_resolution() const { return theta_grid_resolution_; }
  int kmeans_clusters() const { return clusters_; }
  std::size_t parameter_dim() const { return theta_box_.size(); }
  /// Differentiable in the sample (continuous refinement allowed).
  bool smooth() const;

  /// Lexicographically ordered parameter grid (resolution 1 gives the box
  /// center; tabulated families enumerate their table indices).
  std::vector<std::vector<double>> theta_grid() const;

  /// Unchecked evaluation.
  double eval(std::span<const double> theta, const SamplePoint& xi) const;
  MemberFunction member(std::vector<double> theta) const;

  const std::vector<std::vector<double>>& tables() const;
  const SampleSpace& table_space() const;

 private:
  LossFamily() = default;

  struct Tabulated {
    SampleSpace space;
    std::vector<std::vector<double>> tables;
  };

  LossKind kind_ = LossKind::linear;
  std::vector<Interval> theta_box_;
  int theta_grid_resolution_ = 1;
  int clusters_ = 1;
  std::shared_ptr<const Tabulated> tabulated_;
};

/// Checked evaluation: theta must lie in the box and match the sample shape.
double loss_eval(const LossFamily& family, std::span<const double> theta,
                 const SamplePoint& xi);

struct FamilyConstants {
  double sup_norm = 0.0;   // ||F||_inf
  double lip_xi = 0.0;     // Lipschitz in the sample w.r.t. the natural distance
  double lip_theta = 0.0;  // Lipschitz in theta (Euclidean), uniform in the sample
  double dudley = 0.0;     // upper bound on the entropy integral I_F
  std::string provenance;  // "closed-form" or "grid-estimated"
};

/// `p_norm` is the norm of the natural distance used for lip_xi.
FamilyConstants family_constants(const LossFamily& family, const SampleSpace& space,
                                 double p_norm = 2.0);

/// Integral of sqrt(log N(t)) with the box packing bound
/// N(t) <= prod_i (floor(lip_theta * len_i / t) + 1).
double dudley_entropy(double lip_theta, std::span<const Interval> theta_box);

/// True iff some member has grid oscillation max - min <= tolerance.
bool is_constant_family(const LossFamily& family, const SampleSpace& space,
                        double tolerance);

/// Tabulated family from CSV rows (theta_index, grid_index, value); a header
/// row is skipped if present.
LossFamily load_tabulated_csv(const std::string& path, const SampleSpace& space);

}  // namespace wdro
