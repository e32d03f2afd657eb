#include "wdro/space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wdro/error.hpp"

namespace wdro {

SampleSpace::SampleSpace(std::vector<Interval> boxes, std::vector<int> alphabets,
                         int grid_resolution)
    : boxes_(std::move(boxes)),
      alphabets_(std::move(alphabets)),
      grid_resolution_(grid_resolution) {
  for (std::size_t i = 0; i < boxes_.size(); ++i) {
    const auto& b = boxes_[i];
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || b.lo > b.hi)
      throw DomainError("continuous coordinate " + std::to_string(i) +
                        ": need finite lo <= hi");
  }
  for (std::size_t i = 0; i < alphabets_.size(); ++i)
    if (alphabets_[i] < 1)
      throw DomainError("label coordinate " + std::to_string(i) +
                        ": alphabet size must be >= 1");
  if (grid_resolution_ < 2)
    throw DomainError("grid_resolution must be >= 2");
}

void SampleSpace::check_shape(const SamplePoint& p) const {
  if (p.continuous.size() != boxes_.size())
    throw DomainError("point has " + std::to_string(p.continuous.size()) +
                      " continuous coordinates, space has " +
                      std::to_string(boxes_.size()));
  if (p.labels.size() != alphabets_.size())
    throw DomainError("point has " + std::to_string(p.labels.size()) +
                      " label coordinates, space has " +
                      std::to_string(alphabets_.size()));
}

void SampleSpace::check(const SamplePoint& p) const {
  check_shape(p);
  for (std::size_t i = 0; i < boxes_.size(); ++i)
    if (!boxes_[i].contains(p.continuous[i]))
      throw DomainError("continuous coordinate " + std::to_string(i) + " = " +
                        std::to_string(p.continuous[i]) + " outside [" +
                        std::to_string(boxes_[i].lo) + ", " +
                        std::to_string(boxes_[i].hi) + "]");
  for (std::size_t i = 0; i < alphabets_.size(); ++i)
    if (p.labels[i] < 0 || p.labels[i] >= alphabets_[i])
      throw DomainError("label coordinate " + std::to_string(i) + " = " +
                        std::to_string(p.labels[i]) + " outside alphabet of size " +
                        std::to_string(alphabets_[i]));
}

bool SampleSpace::contains(const SamplePoint& p) const {
  try {
    check(p);
    return true;
  } catch (const DomainError&) {
    return false;
  }
}

double SampleSpace::max_edge() const {
  double m = 0.0;
  for (const auto& b : boxes_) m = std::max(m, b.length());
  return m;
}

void TransportCost::validate() const {
  if (!(p_norm >= 1.0)) throw DomainError("cost p_norm must be in [1, inf]");
  if (!(power_q >= 1.0) || !std::isfinite(power_q))
    throw DomainError("cost power_q must be in [1, inf)");
  if (!(label_weight_kappa >= 0.0) || !std::isfinite(label_weight_kappa))
    throw DomainError("cost label_weight_kappa must be finite and >= 0");
  if (!(label_power >= 1.0) || !std::isfinite(label_power))
    throw DomainError("cost label_power must be in [1, inf)");
}

double lp_norm_diff(std::span<const double> a, std::span<const double> b,
                    double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
  }
  if (p == 2.0) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }
  if (p == 1.0) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(std::abs(a[i] - b[i]), p);
  return std::pow(s, 1.0 / p);
}

namespace {

void check_same_shape(const SamplePoint& xi, const SamplePoint& zeta) {
  if (xi.continuous.size() != zeta.continuous.size())
    throw DomainError("continuous coordinate " +
                      std::to_string(std::min(xi.continuous.size(), zeta.continuous.size())) +
                      ": dimension mismatch (" + std::to_string(xi.continuous.size()) +
                      " vs " + std::to_string(zeta.continuous.size()) + ")");
  if (xi.labels.size() != zeta.labels.size())
    throw DomainError("label coordinate " +
                      std::to_string(std::min(xi.labels.size(), zeta.labels.size())) +
                      ": dimension mismatch (" + std::to_string(xi.labels.size()) +
                      " vs " + std::to_string(zeta.labels.size()) + ")");
}

}  // namespace

double cost_eval(const TransportCost& cost, const SamplePoint& xi,
                 const SamplePoint& zeta) {
  check_same_shape(xi, zeta);
  double c = 0.0;
  if (!xi.continuous.empty()) {
    if (cost.p_norm == 2.0 && cost.power_q == 2.0) {
      for (std::size_t i = 0; i < xi.continuous.size(); ++i) {
        const double d = xi.continuous[i] - zeta.continuous[i];
        c += d * d;
      }
    } else {
      const double d = lp_norm_diff(xi.continuous, zeta.continuous, cost.p_norm);
      c = cost.power_q == 1.0 ? d : std::pow(d, cost.power_q);
    }
  }
  if (cost.label_weight_kappa > 0.0) {
    int mismatches = 0;
    for (std::size_t i = 0; i < xi.labels.size(); ++i)
      mismatches += xi.labels[i] != zeta.labels[i];
    if (mismatches > 0)
      c += cost.label_weight_kappa *
           std::pow(static_cast<double>(mismatches), cost.label_power);
  }
  return c;
}

double distance_eval(const SampleSpace& space, const SamplePoint& xi,
                     const SamplePoint& zeta, double p_norm) {
  space.check_shape(xi);
  space.check_shape(zeta);
  double d = lp_norm_diff(xi.continuous, zeta.continuous, p_norm);
  if (xi.labels != zeta.labels) d += 1.0;
  return d;
}

std::vector<double> axis_nodes(const Interval& box, int resolution) {
  if (resolution < 2) throw DomainError("grid resolution must be >= 2");
  if (box.lo == box.hi) return {box.lo};
  std::vector<double> nodes(static_cast<std::size_t>(resolution));
  const double span = box.hi - box.lo;
  for (int k = 0; k < resolution; ++k)
    nodes[k] = box.lo + span * static_cast<double>(k) / (resolution - 1);
  nodes.back() = box.hi;
  return nodes;
}

GridLayout::GridLayout(const SampleSpace& space, int resolution)
    : alphabets_(space.alphabets()) {
  for (const auto& b : space.boxes()) axes_.push_back(axis_nodes(b, resolution));
  for (const auto& a : axes_) extent_.push_back(a.size());
  for (int a : alphabets_) extent_.push_back(static_cast<std::size_t>(a));
  strides_.assign(extent_.size(), 1);
  size_ = 1;
  for (std::size_t i = extent_.size(); i-- > 0;) {
    strides_[i] = size_;
    size_ *= extent_[i];
  }
}

SamplePoint GridLayout::node(std::size_t flat) const {
  SamplePoint p;
  p.continuous.resize(axes_.size());
  p.labels.resize(alphabets_.size());
  for (std::size_t a = 0; a < axes_.size(); ++a) p.continuous[a] = axes_[a][coordinate(flat, a)];
  for (std::size_t l = 0; l < alphabets_.size(); ++l)
    p.labels[l] = static_cast<int>(coordinate(flat, axes_.size() + l));
  return p;
}

std::vector<SamplePoint> GridLayout::nodes() const {
  std::vector<SamplePoint> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(node(i));
  return out;
}

std::vector<SamplePoint> grid(const SampleSpace& space, int resolution) {
  return GridLayout(space, resolution).nodes();
}

std::vector<SamplePoint> grid(const SampleSpace& space) {
  return grid(space, space.grid_resolution());
}

}  // namespace wdro
