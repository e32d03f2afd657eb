#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace wdro {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// A point of the mixed sample space: continuous features plus finite labels.
struct SamplePoint {
  std::vector<double> continuous;
  std::vector<int> labels;

  friend bool operator==(const SamplePoint&, const SamplePoint&) = default;
};

/// Compact sample space: a box of continuous coordinates times a product of
/// finite alphabets, with a uniform grid discretization.
class SampleSpace {
 public:
  SampleSpace() = default;
  SampleSpace(std::vector<Interval> boxes, std::vector<int> alphabets,
              int grid_resolution);

  const std::vector<Interval>& boxes() const { return boxes_; }
  const std::vector<int>& alphabets() const { return alphabets_; }
  int grid_resolution() const { return grid_resolution_; }

  std::size_t continuous_dims() const { return boxes_.size(); }
  std::size_t label_dims() const { return alphabets_.size(); }

  bool contains(const SamplePoint& p) const;
  /// Throws DomainError naming the first offending coordinate.
  void check(const SamplePoint& p) const;
  /// Throws DomainError if the shapes differ (values unchecked).
  void check_shape(const SamplePoint& p) const;

  /// Largest box edge over continuous coordinates.
  double max_edge() const;

  friend bool operator==(const SampleSpace&, const SampleSpace&) = default;

 private:
  std::vector<Interval> boxes_;
  std::vector<int> alphabets_;
  int grid_resolution_ = 2;
};

/// Transport cost ||x - x'||_p^q + kappa * (#label mismatches)^label_power.
struct TransportCost {
  double p_norm = 2.0;  // may be +infinity
  double power_q = 2.0;
  double label_weight_kappa = 0.0;
  double label_power = 1.0;

  /// Throws DomainError on out-of-range parameters.
  void validate() const;
  friend bool operator==(const TransportCost&, const TransportCost&) = default;
};

/// ||a - b||_p for equal-length spans; p may be +infinity.
double lp_norm_diff(std::span<const double> a, std::span<const double> b,
                    double p);

double cost_eval(const TransportCost& cost, const SamplePoint& xi,
                 const SamplePoint& zeta);

/// Natural distance ||x - x'||_p + 1{labels differ}.
double distance_eval(const SampleSpace& space, const SamplePoint& xi,
                     const SamplePoint& zeta, double p_norm = 2.0);

/// Uniform nodes of one continuous axis (endpoints included; a degenerate
/// interval collapses to a single node).
std::vector<double> axis_nodes(const Interval& box, int resolution);

/// Cartesian grid of the space, continuous axes first then labels, first axis
/// varying slowest.
std::vector<SamplePoint> grid(const SampleSpace& space);
std::vector<SamplePoint> grid(const SampleSpace& space, int resolution);

/// Index arithmetic for the grid produced by grid(space, resolution).
class GridLayout {
 public:
  GridLayout(const SampleSpace& space, int resolution);

  std::size_t size() const { return size_; }
  const std::vector<std::vector<double>>& axes() const { return axes_; }
  const std::vector<int>& alphabets() const { return alphabets_; }
  /// Stride of axis a in the flat index (continuous axes then labels).
  std::size_t stride(std::size_t axis) const { return strides_[axis]; }
  /// Position of node `flat` along axis a.
  std::size_t coordinate(std::size_t flat, std::size_t axis) const {
    return (flat / strides_[axis]) % extent_[axis];
  }
  std::size_t extent(std::size_t axis) const { return extent_[axis]; }
  std::size_t axis_count() const { return extent_.size(); }

  SamplePoint node(std::size_t flat) const;
  std::vector<SamplePoint> nodes() const;

 private:
  std::vector<std::vector<double>> axes_;
  std::vector<int> alphabets_;
  std::vector<std::size_t> extent_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

}  // namespace wdro
