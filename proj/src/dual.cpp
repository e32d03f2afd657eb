#include "wdro/dual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wdro/error.hpp"

namespace wdro {

namespace {

constexpr double kInvPhi = 0.6180339887498949;

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || std::isinf(lambda)) throw DomainError("lambda must be finite and >= 0");
}

struct Candidate {
  SamplePoint point;
  double value;
  double cost;
};

}  // namespace

GridMaximizer::GridMaximizer(MemberFunction f, TransportCost cost, SampleSpace space,
                             InnerMaxOptions options)
    : f_(std::move(f)),
      cost_(cost),
      space_(std::move(space)),
      options_(options),
      layout_(space_, space_.grid_resolution()) {
  cost_.validate();
  nodes_ = layout_.nodes();
  values_.resize(nodes_.size());
  double abs_max = 0.0;
  grid_max_ = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < nodes_.size(); ++j) {
    values_[j] = f_(nodes_[j]);
    if (!std::isfinite(values_[j])) throw SolverError("member function is not finite on the grid");
    abs_max = std::max(abs_max, std::abs(values_[j]));
    grid_max_ = std::max(grid_max_, values_[j]);
  }
  tie_tol_ = options_.tie_tol >= 0.0 ? options_.tie_tol : 1e-9 * (1.0 + abs_max);
  for (const auto& axis : layout_.axes())
    spacing_.push_back(axis.size() > 1 ? axis[1] - axis[0] : 0.0);
}

std::shared_ptr<const std::vector<double>> GridMaximizer::costs_to(const SamplePoint& xi) const {
  space_.check_shape(xi);
  auto costs = std::make_shared<std::vector<double>>(nodes_.size());
  for (std::size_t j = 0; j < nodes_.size(); ++j) (*costs)[j] = cost_eval(cost_, xi, nodes_[j]);
  return costs;
}

GridMaximizer::Anchor::Anchor(const GridMaximizer* owner, SamplePoint xi,
                              std::shared_ptr<const std::vector<double>> costs)
    : owner_(owner), xi_(std::move(xi)), costs_(std::move(costs)) {
  owner_->space_.check_shape(xi_);
  if (!costs_ || costs_->size() != owner_->nodes_.size())
    throw DomainError("cost row does not match the grid");
  f_xi_ = owner_->f_(xi_);
}

InnerMaxValue GridMaximizer::Anchor::run(double lambda,
                                         std::vector<SamplePoint>* maximizers) const {
  check_lambda(lambda);
  const auto& g = *owner_;
  const auto& values = g.values_;
  const auto& costs = *costs_;
  const std::size_t n = values.size();

  double best = f_xi_;
  for (std::size_t j = 0; j < n; ++j) best = std::max(best, values[j] - lambda * costs[j]);

  std::vector<Candidate> refined;
  const std::size_t m = g.space_.continuous_dims();
  if (g.options_.refine && g.f_.smooth() && m > 0 && n > 1) {
    // Discrete local maxima of the grid objective, best few first.
    std::vector<std::pair<double, std::size_t>> peaks;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = values[j] - lambda * costs[j];
      bool peak = true;
      for (std::size_t a = 0; a < m && peak; ++a) {
        const std::size_t pos = g.layout_.coordinate(j, a);
        const std::size_t s = g.layout_.stride(a);
        if (pos > 0 && values[j - s] - lambda * costs[j - s] > v) peak = false;
        if (pos + 1 < g.layout_.extent(a) && values[j + s] - lambda * costs[j + s] > v)
          peak = false;
      }
      if (peak) peaks.emplace_back(v, j);
    }
    std::sort(peaks.begin(), peaks.end(),
              [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    if (peaks.size() > 4) peaks.resize(4);

    auto objective = [&](const SamplePoint& z, double& c) {
      c = cost_eval(g.cost_, xi_, z);
      return g.f_(z) - lambda * c;
    };
    const int sweeps = m == 1 ? 1 : 3;
    for (const auto& [start_value, j] : peaks) {
      SamplePoint z = g.nodes_[j];
      double z_value = start_value;
      double z_cost = costs[j];
      for (int sweep = 0; sweep < sweeps; ++sweep) {
        for (std::size_t a = 0; a < m; ++a) {
          const double h = g.spacing_[a];
          if (h <= 0.0) continue;
          const auto& box = g.space_.boxes()[a];
          double lo = std::max(box.lo, z.continuous[a] - h);
          double hi = std::min(box.hi, z.continuous[a] + h);
          SamplePoint probe = z;
          auto eval_at = [&](double t, double& c) {
            probe.continuous[a] = t;
            const double v = objective(probe, c);
            if (v > z_value) {
              z_value = v;
              z_cost = c;
              z.continuous[a] = t;
            }
            return v;
          };
          double c = 0.0;
          double x1 = hi - kInvPhi * (hi - lo);
          double x2 = lo + kInvPhi * (hi - lo);
          double f1 = eval_at(x1, c);
          double f2 = eval_at(x2, c);
          for (int it = 0; it < g.options_.golden_iterations; ++it) {
            if (f1 >= f2) {
              hi = x2;
              x2 = x1;
              f2 = f1;
              x1 = hi - kInvPhi * (hi - lo);
              f1 = eval_at(x1, c);
            } else {
              lo = x1;
              x1 = x2;
              f1 = f2;
              x2 = lo + kInvPhi * (hi - lo);
              f2 = eval_at(x2, c);
            }
          }
        }
      }
      if (z_value > start_value) {
        best = std::max(best, z_value);
        refined.push_back({std::move(z), z_value, z_cost});
      }
    }
  }

  const double cut = best - g.tie_tol_;
  double min_cost = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (values[j] - lambda * costs[j] >= cut) {
      min_cost = std::min(min_cost, costs[j]);
      if (maximizers) maximizers->push_back(g.nodes_[j]);
    }
  }
  for (auto& r : refined) {
    if (r.value >= cut) {
      min_cost = std::min(min_cost, r.cost);
      if (maximizers) maximizers->push_back(r.point);
    }
  }
  if (f_xi_ >= cut) {
    min_cost = 0.0;
    if (maximizers && std::find(maximizers->begin(), maximizers->end(), xi_) == maximizers->end())
      maximizers->push_back(xi_);
  }
  return {best, min_cost};
}

InnerMaxValue GridMaximizer::Anchor::value(double lambda) const { return run(lambda, nullptr); }

InnerMaxResult GridMaximizer::Anchor::solve(double lambda) const {
  InnerMaxResult out;
  const auto v = run(lambda, &out.maximizers);
  out.value = v.value;
  out.min_cost_to_argmax = v.min_cost;
  return out;
}

InnerMaxResult inner_max(const MemberFunction& f, double lambda, const SamplePoint& xi,
                         const TransportCost& cost, const SampleSpace& space, double tie_tol) {
  check_lambda(lambda);
  space.check(xi);
  InnerMaxOptions options;
  options.tie_tol = tie_tol;
  const GridMaximizer g(f, cost, space, options);
  return g.anchor(xi).solve(lambda);
}

double phi(double lambda, const MemberFunction& f, const SamplePoint& xi,
           const TransportCost& cost, const SampleSpace& space) {
  return inner_max(f, lambda, xi, cost, space).value;
}

double phi_right_derivative(double lambda, const MemberFunction& f, const SamplePoint& xi,
                            const TransportCost& cost, const SampleSpace& space,
                            double tie_tol) {
  return -inner_max(f, lambda, xi, cost, space, tie_tol).min_cost_to_argmax;
}

double psi(double mu, const MemberFunction& f, const SamplePoint& xi, const TransportCost& cost,
           const SampleSpace& space) {
  if (!(mu > 0.0) || std::isinf(mu)) throw DomainError("mu must be finite and > 0");
  return mu * phi(1.0 / mu, f, xi, cost, space);
}

}  // namespace wdro
