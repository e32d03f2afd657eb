#pragma once

#include <memory>
#include <vector>

#include "wdro/losses.hpp"
#include "wdro/space.hpp"

namespace wdro {

struct InnerMaxOptions {
  double tie_tol = -1.0;  // negative: 1e-9 * (1 + max |f| over the grid)
  bool refine = true;     // golden-section polish for smooth members
  int golden_iterations = 40;
};

struct InnerMaxResult {
  double value = 0.0;
  std::vector<SamplePoint> maximizers;
  double min_cost_to_argmax = 0.0;
};

/// Value and minimal argmax cost only (no maximizer list).
struct InnerMaxValue {
  double value = 0.0;
  double min_cost = 0.0;
};

/// Inner maximization of f(z) - lambda * c(xi, z) over the grid of `space`
/// plus xi itself, with optional continuous refinement. Member values on the
/// grid are computed once at construction.
class GridMaximizer {
 public:
  GridMaximizer(MemberFunction f, TransportCost cost, SampleSpace space,
                InnerMaxOptions options = {});

  /// Per-anchor cache of transport costs to every grid node.
  class Anchor {
   public:
    InnerMaxResult solve(double lambda) const;
    InnerMaxValue value(double lambda) const;
    const SamplePoint& xi() const { return xi_; }
    const std::shared_ptr<const std::vector<double>>& costs() const { return costs_; }

   private:
    friend class GridMaximizer;
    Anchor(const GridMaximizer* owner, SamplePoint xi,
           std::shared_ptr<const std::vector<double>> costs);
    InnerMaxValue run(double lambda, std::vector<SamplePoint>* maximizers) const;

    const GridMaximizer* owner_;
    SamplePoint xi_;
    double f_xi_;
    std::shared_ptr<const std::vector<double>> costs_;
  };

  Anchor anchor(const SamplePoint& xi) const { return Anchor(this, xi, costs_to(xi)); }
  /// Reuses a cost row from costs_to(xi) computed on a maximizer over the
  /// same space and cost (for instance another member of a family).
  Anchor anchor(const SamplePoint& xi, std::shared_ptr<const std::vector<double>> costs) const {
    return Anchor(this, xi, std::move(costs));
  }
  std::shared_ptr<const std::vector<double>> costs_to(const SamplePoint& xi) const;

  double tie_tol() const { return tie_tol_; }
  double grid_max() const { return grid_max_; }
  const std::vector<SamplePoint>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  const MemberFunction& member() const { return f_; }
  const TransportCost& cost() const { return cost_; }
  const SampleSpace& space() const { return space_; }

 private:
  MemberFunction f_;
  TransportCost cost_;
  SampleSpace space_;
  InnerMaxOptions options_;
  GridLayout layout_;
  std::vector<SamplePoint> nodes_;
  std::vector<double> values_;
  std::vector<double> spacing_;
  double tie_tol_ = 0.0;
  double grid_max_ = 0.0;
};

InnerMaxResult inner_max(const MemberFunction& f, double lambda, const SamplePoint& xi,
                         const TransportCost& cost, const SampleSpace& space,
                         double tie_tol = -1.0);

double phi(double lambda, const MemberFunction& f, const SamplePoint& xi,
           const TransportCost& cost, const SampleSpace& space);

/// -min{c(xi, z) : z in argmax (f - lambda c(xi, .))}.
double phi_right_derivative(double lambda, const MemberFunction& f, const SamplePoint& xi,
                            const TransportCost& cost, const SampleSpace& space,
                            double tie_tol = -1.0);

/// mu * phi(1/mu) = sup_z {mu f(z) - c(xi, z)}.
double psi(double mu, const MemberFunction& f, const SamplePoint& xi,
           const TransportCost& cost, const SampleSpace& space);

}  // namespace wdro
