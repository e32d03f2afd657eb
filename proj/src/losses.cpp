#include "wdro/losses.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

#include "wdro/error.hpp"

namespace wdro {

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::least_squares: return "least_squares";
    case LossKind::logistic: return "logistic";
    case LossKind::hinge: return "hinge";
    case LossKind::kmeans: return "kmeans";
    case LossKind::linear: return "linear";
    case LossKind::tabulated: return "tabulated";
  }
  return "unknown";
}

LossKind loss_kind_from_string(const std::string& name) {
  for (auto k : {LossKind::least_squares, LossKind::logistic, LossKind::hinge,
                 LossKind::kmeans, LossKind::linear, LossKind::tabulated})
    if (name == to_string(k)) return k;
  throw DomainError("unknown loss kind '" + name + "'");
}

namespace {

void check_theta_box(const std::vector<Interval>& box, int resolution) {
  for (std::size_t i = 0; i < box.size(); ++i)
    if (!std::isfinite(box[i].lo) || !std::isfinite(box[i].hi) || box[i].lo > box[i].hi)
      throw DomainError("theta coordinate " + std::to_string(i) + ": need finite lo <= hi");
  if (resolution < 1) throw DomainError("theta_grid_resolution must be >= 1");
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double label_sign(const SamplePoint& xi) { return xi.labels[0] == 0 ? -1.0 : 1.0; }

// log(1 + e^u) without overflow.
double softplus(double u) { return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

double abs_max(const Interval& b) { return std::max(std::abs(b.lo), std::abs(b.hi)); }

double dual_exponent(double p) {
  if (std::isinf(p)) return 1.0;
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  return p / (p - 1.0);
}

double norm_p(const std::vector<double>& v, double p) {
  std::vector<double> zero(v.size(), 0.0);
  return lp_norm_diff(v, zero, p);
}

double interpolate(const GridLayout& layout, const std::vector<double>& table,
                   const SamplePoint& xi) {
  const auto& axes = layout.axes();
  const std::size_t m = axes.size();
  std::size_t base = 0;
  for (std::size_t l = 0; l < layout.alphabets().size(); ++l)
    base += static_cast<std::size_t>(xi.labels[l]) * layout.stride(m + l);
  std::vector<std::size_t> lower(m);
  std::vector<double> frac(m, 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    const auto& nodes = axes[a];
    if (nodes.size() == 1) {
      lower[a] = 0;
      continue;
    }
    const double pos = (xi.continuous[a] - nodes.front()) / (nodes.back() - nodes.front()) *
                       static_cast<double>(nodes.size() - 1);
    const double k = std::clamp(std::floor(pos), 0.0, static_cast<double>(nodes.size() - 2));
    lower[a] = static_cast<std::size_t>(k);
    frac[a] = std::clamp(pos - k, 0.0, 1.0);
  }
  double value = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << m); ++corner) {
    double w = 1.0;
    std::size_t idx = base;
    for (std::size_t a = 0; a < m; ++a) {
      const bool up = (corner >> a) & 1U;
      if (up && frac[a] == 0.0) {
        w = 0.0;
        break;
      }
      w *= up ? frac[a] : 1.0 - frac[a];
      idx += (lower[a] + (up ? 1 : 0)) * layout.stride(a);
    }
    if (w != 0.0) value += w * table[idx];
  }
  return value;
}

}  // namespace

LossFamily LossFamily::least_squares(std::vector<Interval> theta_box, int res) {
  check_theta_box(theta_box, res);
  LossFamily f;
  f.kind_ = LossKind::least_squares;
  f.theta_box_ = std::move(theta_box);
  f.theta_grid_resolution_ = res;
  return f;
}

LossFamily LossFamily::logistic(std::vector<Interval> theta_box, int res) {
  auto f = least_squares(std::move(theta_box), res);
  f.kind_ = LossKind::logistic;
  return f;
}

LossFamily LossFamily::hinge(std::vector<Interval> theta_box, int res) {
  auto f = least_squares(std::move(theta_box), res);
  f.kind_ = LossKind::hinge;
  return f;
}

LossFamily LossFamily::linear(std::vector<Interval> theta_box, int res) {
  auto f = least_squares(std::move(theta_box), res);
  f.kind_ = LossKind::linear;
  return f;
}

LossFamily LossFamily::kmeans(int clusters, std::vector<Interval> theta_box, int res) {
  if (clusters < 1) throw DomainError("kmeans_clusters must be >= 1");
  if (theta_box.size() % static_cast<std::size_t>(clusters) != 0)
    throw DomainError("kmeans theta_box size must be a multiple of kmeans_clusters");
  auto f = least_squares(std::move(theta_box), res);
  f.kind_ = LossKind::kmeans;
  f.clusters_ = clusters;
  return f;
}

LossFamily LossFamily::tabulated(const SampleSpace& space,
                                 std::vector<std::vector<double>> tables) {
  if (tables.empty()) throw DomainError("tabulated family needs at least one table");
  const std::size_t n = GridLayout(space, space.grid_resolution()).size();
  for (std::size_t t = 0; t < tables.size(); ++t) {
    if (tables[t].size() != n)
      throw DomainError("table " + std::to_string(t) + " has " +
                        std::to_string(tables[t].size()) + " values, grid has " +
                        std::to_string(n));
    for (double v : tables[t])
      if (!std::isfinite(v)) throw DomainError("table " + std::to_string(t) + " has a non-finite value");
  }
  LossFamily f;
  f.kind_ = LossKind::tabulated;
  f.theta_box_ = {Interval{0.0, static_cast<double>(tables.size() - 1)}};
  f.theta_grid_resolution_ = static_cast<int>(tables.size());
  f.tabulated_ = std::make_shared<const Tabulated>(Tabulated{space, std::move(tables)});
  return f;
}

bool LossFamily::smooth() const {
  return kind_ == LossKind::least_squares || kind_ == LossKind::logistic ||
         kind_ == LossKind::linear;
}

const std::vector<std::vector<double>>& LossFamily::tables() const {
  if (!tabulated_) throw DomainError("family is not tabulated");
  return tabulated_->tables;
}

const SampleSpace& LossFamily::table_space() const {
  if (!tabulated_) throw DomainError("family is not tabulated");
  return tabulated_->space;
}

std::vector<std::vector<double>> LossFamily::theta_grid() const {
  std::vector<std::vector<double>> out;
  if (kind_ == LossKind::tabulated) {
    for (std::size_t t = 0; t < tabulated_->tables.size(); ++t)
      out.push_back({static_cast<double>(t)});
    return out;
  }
  std::vector<std::vector<double>> axes;
  for (const auto& b : theta_box_) {
    if (theta_grid_resolution_ == 1)
      axes.push_back({0.5 * (b.lo + b.hi)});
    else
      axes.push_back(axis_nodes(b, theta_grid_resolution_));
  }
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.size();
  out.reserve(total);
  for (std::size_t flat = 0; flat < total; ++flat) {
    std::vector<double> theta(axes.size());
    std::size_t rem = flat;
    for (std::size_t i = axes.size(); i-- > 0;) {
      theta[i] = axes[i][rem % axes[i].size()];
      rem /= axes[i].size();
    }
    out.push_back(std::move(theta));
  }
  return out;
}

double LossFamily::eval(std::span<const double> theta, const SamplePoint& xi) const {
  switch (kind_) {
    case LossKind::least_squares: {
      const std::size_t p = theta.size();
      const double r = dot(theta, std::span<const double>(xi.continuous).first(p)) -
                       xi.continuous[p];
      return r * r;
    }
    case LossKind::logistic:
      return softplus(-label_sign(xi) * dot(theta, xi.continuous));
    case LossKind::hinge:
      return std::max(0.0, 1.0 - label_sign(xi) * dot(theta, xi.continuous));
    case LossKind::linear:
      return dot(theta, xi.continuous);
    case LossKind::kmeans: {
      const std::size_t m = xi.continuous.size();
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < clusters_; ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const double d = theta[k * m + j] - xi.continuous[j];
          s += d * d;
        }
        best = std::min(best, s);
      }
      return best;
    }
    case LossKind::tabulated: {
      const auto& tab = *tabulated_;
      const auto t = static_cast<std::size_t>(std::llround(theta[0]));
      return interpolate(GridLayout(tab.space, tab.space.grid_resolution()), tab.tables[t], xi);
    }
  }
  return 0.0;
}

MemberFunction LossFamily::member(std::vector<double> theta) const {
  if (kind_ == LossKind::tabulated) {
    auto tab = tabulated_;
    auto layout = std::make_shared<GridLayout>(tab->space, tab->space.grid_resolution());
    const auto t = static_cast<std::size_t>(std::llround(theta.at(0)));
    return MemberFunction(
        [tab, layout, t](const SamplePoint& z) { return interpolate(*layout, tab->tables[t], z); },
        false);
  }
  auto self = *this;
  return MemberFunction(
      [self, theta = std::move(theta)](const SamplePoint& z) { return self.eval(theta, z); },
      smooth());
}

double loss_eval(const LossFamily& family, std::span<const double> theta,
                 const SamplePoint& xi) {
  const auto& box = family.theta_box();
  if (theta.size() != box.size())
    throw DomainError("theta has " + std::to_string(theta.size()) + " entries, family expects " +
                      std::to_string(box.size()));
  for (std::size_t i = 0; i < box.size(); ++i)
    if (!box[i].contains(theta[i]))
      throw DomainError("theta coordinate " + std::to_string(i) + " outside the parameter box");
  const std::size_t m = xi.continuous.size();
  switch (family.kind()) {
    case LossKind::least_squares:
      if (m != box.size() + 1)
        throw DomainError("least_squares expects " + std::to_string(box.size() + 1) +
                          " continuous coordinates (features then response)");
      break;
    case LossKind::logistic:
    case LossKind::hinge:
      if (m != box.size()) throw DomainError("feature dimension does not match theta");
      if (xi.labels.empty()) throw DomainError("classification loss needs a label coordinate");
      break;
    case LossKind::linear:
      if (m != box.size()) throw DomainError("feature dimension does not match theta");
      break;
    case LossKind::kmeans:
      if (box.size() != m * static_cast<std::size_t>(family.kmeans_clusters()))
        throw DomainError("kmeans theta must have clusters * feature_dim entries");
      break;
    case LossKind::tabulated:
      family.table_space().check(xi);
      if (std::abs(theta[0] - std::round(theta[0])) > 1e-12)
        throw DomainError("tabulated theta must be an integer table index");
      break;
  }
  return family.eval(theta, xi);
}

double dudley_entropy(double lip_theta, std::span<const Interval> theta_box) {
  if (!(lip_theta >= 0.0) || !std::isfinite(lip_theta))
    throw DomainError("lip_theta must be finite and >= 0");
  std::vector<double> scale;
  for (const auto& b : theta_box)
    if (lip_theta * b.length() > 0.0) scale.push_back(lip_theta * b.length());
  if (scale.empty()) return 0.0;

  const double t_max = *std::max_element(scale.begin(), scale.end());
  const double dims = static_cast<double>(scale.size());
  const std::size_t per_axis = std::max<std::size_t>(4096, (std::size_t{1} << 20) / scale.size());
  const double t_floor = t_max / static_cast<double>(per_axis);

  // N(t) is piecewise constant: walk its breakpoints scale_i / k downwards.
  using Event = std::pair<double, std::size_t>;  // (breakpoint, axis)
  std::priority_queue<Event> events;
  std::vector<double> count(scale.size(), 0.0);
  for (std::size_t i = 0; i < scale.size(); ++i) events.push({scale[i], i});
  double log_n = 0.0;
  double t = t_max;
  double integral = 0.0;
  while (!events.empty()) {
    const double next = events.top().first;
    if (next <= t_floor) break;
    integral += std::sqrt(std::max(log_n, 0.0)) * (t - next);
    t = next;
    while (!events.empty() && events.top().first == next) {
      const std::size_t i = events.top().second;
      events.pop();
      log_n += std::log(count[i] + 2.0) - std::log(count[i] + 1.0);
      count[i] += 1.0;
      events.push({scale[i] / (count[i] + 1.0), i});
    }
  }
  integral += std::sqrt(std::max(log_n, 0.0)) * (t - t_floor);

  // Below t_floor: sqrt(log N) <= sqrt(d log(2 t_max / t)), integrated in
  // closed form via the upper incomplete gamma function Gamma(3/2, s0).
  const double s0 = std::log(2.0 * static_cast<double>(per_axis));
  const double gamma_tail =
      std::sqrt(s0) * std::exp(-s0) + 0.5 * std::sqrt(std::numbers::pi) * std::erfc(std::sqrt(s0));
  integral += std::sqrt(dims) * 2.0 * t_max * gamma_tail;
  return integral;
}

namespace {

FamilyConstants grid_estimated_constants(const LossFamily& family, const SampleSpace& space,
                                         double p_norm) {
  FamilyConstants out;
  out.provenance = "grid-estimated";
  const GridLayout layout(space, space.grid_resolution());
  const auto nodes = layout.nodes();
  std::vector<std::vector<double>> values;
  for (const auto& theta : family.theta_grid()) {
    const auto f = family.member(theta);
    std::vector<double> v(nodes.size());
    for (std::size_t g = 0; g < nodes.size(); ++g) v[g] = f(nodes[g]);
    values.push_back(std::move(v));
  }
  for (const auto& v : values)
    for (double x : v) out.sup_norm = std::max(out.sup_norm, std::abs(x));
  for (const auto& v : values) {
    for (std::size_t g = 0; g < nodes.size(); ++g) {
      for (std::size_t a = 0; a < layout.axis_count(); ++a) {
        if (layout.coordinate(g, a) + 1 >= layout.extent(a)) continue;
        const std::size_t h = g + layout.stride(a);
        const double d = distance_eval(space, nodes[g], nodes[h], p_norm);
        if (d > 0.0) out.lip_xi = std::max(out.lip_xi, std::abs(v[g] - v[h]) / d);
      }
    }
  }
  if (family.kind() == LossKind::tabulated) {
    // Finite family: N(t) <= #members below the diameter and 1 above it.
    double diameter = 0.0;
    for (std::size_t a = 0; a < values.size(); ++a)
      for (std::size_t b = a + 1; b < values.size(); ++b)
        for (std::size_t g = 0; g < nodes.size(); ++g)
          diameter = std::max(diameter, std::abs(values[a][g] - values[b][g]));
    out.dudley = diameter * std::sqrt(std::log(static_cast<double>(values.size())));
  }
  return out;
}

}  // namespace

FamilyConstants family_constants(const LossFamily& family, const SampleSpace& space,
                                 double p_norm) {
  if (family.kind() == LossKind::tabulated) {
    if (!(family.table_space() == space))
      throw DomainError("tabulated family grid does not match the sample space");
    return grid_estimated_constants(family, space, p_norm);
  }
  const auto& tb = family.theta_box();
  const auto& xb = space.boxes();
  const std::size_t p = tb.size();
  const double q = dual_exponent(p_norm);
  FamilyConstants out;
  out.provenance = "closed-form";

  auto feature_terms = [&](std::size_t features) {
    double s = 0.0;
    std::vector<double> theta_abs, x_abs;
    for (std::size_t i = 0; i < features; ++i) {
      s += abs_max(tb[i]) * abs_max(xb[i]);
      theta_abs.push_back(abs_max(tb[i]));
      x_abs.push_back(abs_max(xb[i]));
    }
    return std::tuple{s, theta_abs, x_abs};
  };

  switch (family.kind()) {
    case LossKind::least_squares: {
      if (xb.size() != p + 1)
        throw DomainError("least_squares needs feature_dim + 1 continuous coordinates");
      auto [s, theta_abs, x_abs] = feature_terms(p);
      const double g_max = s + abs_max(xb[p]);
      theta_abs.push_back(1.0);
      out.sup_norm = g_max * g_max;
      out.lip_xi = 2.0 * g_max * norm_p(theta_abs, q);
      out.lip_theta = 2.0 * g_max * norm_p(x_abs, 2.0);
      break;
    }
    case LossKind::logistic:
    case LossKind::hinge:
    case LossKind::linear: {
      if (xb.size() != p) throw DomainError("feature dimension does not match theta");
      auto [s, theta_abs, x_abs] = feature_terms(p);
      const double t = norm_p(theta_abs, q);
      out.lip_theta = norm_p(x_abs, 2.0);
      if (family.kind() == LossKind::linear) {
        out.sup_norm = s;
        out.lip_xi = t;
      } else if (family.kind() == LossKind::logistic) {
        out.sup_norm = softplus(s);
        out.lip_xi = space.label_dims() > 0 ? std::max(t, s) : t;
      } else {
        out.sup_norm = 1.0 + s;
        out.lip_xi = space.label_dims() > 0 ? std::max(t, 2.0 * s) : t;
      }
      break;
    }
    case LossKind::kmeans: {
      const std::size_t m = xb.size();
      const int clusters = family.kmeans_clusters();
      if (p != m * static_cast<std::size_t>(clusters))
        throw DomainError("kmeans theta must have clusters * feature_dim entries");
      double r_max = 0.0;
      double sup = std::numeric_limits<double>::infinity();
      for (int k = 0; k < clusters; ++k) {
        double r2 = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const auto& t = tb[k * m + j];
          const double d = std::max(std::abs(t.hi - xb[j].lo), std::abs(xb[j].hi - t.lo));
          r2 += d * d;
        }
        sup = std::min(sup, r2);
        r_max = std::max(r_max, std::sqrt(r2));
      }
      double to_euclid = 1.0;
      if (p_norm > 2.0)
        to_euclid = std::isinf(p_norm) ? std::sqrt(static_cast<double>(m))
                                       : std::pow(static_cast<double>(m), 0.5 - 1.0 / p_norm);
      out.sup_norm = sup;
      out.lip_xi = 2.0 * r_max * to_euclid;
      out.lip_theta = 2.0 * r_max;
      break;
    }
    case LossKind::tabulated:
      break;
  }
  // The box bound counts l_inf-separated parameters; convert the Euclidean
  // Lipschitz constant to an l_inf one so the result stays an upper bound.
  out.dudley = dudley_entropy(out.lip_theta * std::sqrt(static_cast<double>(p)), tb);
  return out;
}

bool is_constant_family(const LossFamily& family, const SampleSpace& space, double tolerance) {
  if (!(tolerance >= 0.0)) throw DomainError("tolerance must be >= 0");
  const auto nodes = grid(space);
  for (const auto& theta : family.theta_grid()) {
    const auto f = family.member(theta);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& z : nodes) {
      const double v = f(z);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo <= tolerance) return true;
  }
  return false;
}

LossFamily load_tabulated_csv(const std::string& path, const SampleSpace& space) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open tabulated family file '" + path + "'");
  const std::size_t n = GridLayout(space, space.grid_resolution()).size();
  std::vector<std::vector<double>> tables;
  std::vector<std::vector<bool>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    double t = 0, g = 0, v = 0;
    if (!(row >> t >> g >> v)) {
      if (line_no == 1) continue;  // header
      throw DomainError(path + ":" + std::to_string(line_no) + ": expected theta_index,grid_index,value");
    }
    if (t < 0 || g < 0 || g >= static_cast<double>(n) || t != std::floor(t) || g != std::floor(g))
      throw DomainError(path + ":" + std::to_string(line_no) + ": index out of range");
    const auto ti = static_cast<std::size_t>(t);
    const auto gi = static_cast<std::size_t>(g);
    if (ti >= tables.size()) {
      tables.resize(ti + 1, std::vector<double>(n, 0.0));
      seen.resize(ti + 1, std::vector<bool>(n, false));
    }
    tables[ti][gi] = v;
    seen[ti][gi] = true;
  }
  for (std::size_t t = 0; t < seen.size(); ++t)
    for (std::size_t g = 0; g < n; ++g)
      if (!seen[t][g])
        throw DomainError(path + ": table " + std::to_string(t) + " misses grid index " +
                          std::to_string(g));
  return LossFamily::tabulated(space, std::move(tables));
}

}  // namespace wdro
