#include "wdro/lp.hpp"

#include <cmath>
#include <limits>

#include "wdro/error.hpp"

namespace wdro {

namespace {

constexpr double kPivotTol = 1e-12;

void validate(const LinearProgram& lp) {
  if (lp.A.size() != lp.b.size()) throw DomainError("LP: A and b row counts differ");
  for (const auto& row : lp.A)
    if (row.size() != lp.c.size()) throw DomainError("LP: row length differs from c");
  for (double v : lp.b)
    if (!(v >= 0.0)) throw InfeasibleError("LP: right-hand side must be nonnegative");
}

// Solves the square system M y = r in place; false when singular.
bool solve_square(std::vector<std::vector<double>> M, std::vector<double> r,
                  std::vector<double>& y) {
  const std::size_t n = r.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t i = col + 1; i < n; ++i)
      if (std::abs(M[i][col]) > std::abs(M[piv][col])) piv = i;
    if (std::abs(M[piv][col]) < 1e-12) return false;
    std::swap(M[piv], M[col]);
    std::swap(r[piv], r[col]);
    for (std::size_t i = 0; i < n; ++i) {
      if (i == col) continue;
      const double f = M[i][col] / M[col][col];
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) M[i][k] -= f * M[col][k];
      r[i] -= f * r[col];
    }
  }
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = r[i] / M[i][i];
  return true;
}

}  // namespace

LpSolution solve_simplex(const LinearProgram& lp) {
  validate(lp);
  const std::size_t m = lp.b.size();
  const std::size_t n = lp.c.size();
  const std::size_t width = n + m + 1;
  // Rows 0..m-1 constraints, row m the reduced costs (negated objective).
  std::vector<std::vector<double>> T(m + 1, std::vector<double>(width, 0.0));
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) T[i][j] = lp.A[i][j];
    T[i][n + i] = 1.0;
    T[i][width - 1] = lp.b[i];
    basis[i] = n + i;
  }
  for (std::size_t j = 0; j < n; ++j) T[m][j] = -lp.c[j];

  const std::size_t max_iter = 50 * (n + m) + 1000;
  for (std::size_t iter = 0;; ++iter) {
    if (iter > max_iter) throw SolverError("simplex: iteration limit reached");
    std::size_t enter = width;
    for (std::size_t j = 0; j + 1 < width; ++j)
      if (T[m][j] < -kPivotTol) {
        enter = j;
        break;
      }
    if (enter == width) break;
    std::size_t leave = m;
    double ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (T[i][enter] <= kPivotTol) continue;
      const double r = T[i][width - 1] / T[i][enter];
      if (r < ratio - 1e-15 || (std::abs(r - ratio) <= 1e-15 && leave < m && basis[i] < basis[leave])) {
        ratio = r;
        leave = i;
      }
    }
    if (leave == m) throw SolverError("simplex: objective unbounded");
    const double p = T[leave][enter];
    for (auto& v : T[leave]) v /= p;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double f = T[i][enter];
      if (f == 0.0) continue;
      for (std::size_t k = 0; k < width; ++k) T[i][k] -= f * T[leave][k];
    }
    basis[leave] = enter;
  }
  LpSolution out;
  out.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) out.x[basis[i]] = T[i][width - 1];
  for (std::size_t j = 0; j < n; ++j) out.objective += lp.c[j] * out.x[j];
  return out;
}

LpSolution solve_vertex_enumeration(const LinearProgram& lp) {
  validate(lp);
  const std::size_t m = lp.b.size();
  const std::size_t n = lp.c.size();
  if (n > 20) throw DomainError("vertex enumeration limited to 20 variables");
  // Constraint k < m is row k of A; k >= m is -x_{k-m} <= 0.
  const std::size_t total = m + n;
  auto row = [&](std::size_t k) {
    std::vector<double> r(n, 0.0);
    if (k < m)
      r = lp.A[k];
    else
      r[k - m] = -1.0;
    return r;
  };
  auto rhs = [&](std::size_t k) { return k < m ? lp.b[k] : 0.0; };

  LpSolution best;
  best.objective = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pick(n);
  for (std::size_t i = 0; i < n; ++i) pick[i] = i;
  if (n == 0) {
    best.objective = 0.0;
    return best;
  }
  while (true) {
    std::vector<std::vector<double>> M;
    std::vector<double> r;
    for (std::size_t k : pick) {
      M.push_back(row(k));
      r.push_back(rhs(k));
    }
    std::vector<double> x;
    if (solve_square(M, r, x)) {
      bool feasible = true;
      for (std::size_t j = 0; j < n && feasible; ++j) feasible = x[j] >= -1e-9;
      for (std::size_t i = 0; i < m && feasible; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += lp.A[i][j] * x[j];
        feasible = s <= lp.b[i] + 1e-9 * (1.0 + std::abs(lp.b[i]));
      }
      if (feasible) {
        double obj = 0.0;
        for (std::size_t j = 0; j < n; ++j) obj += lp.c[j] * x[j];
        if (obj > best.objective) {
          best.objective = obj;
          best.x = x;
        }
      }
    }
    // next combination
    std::size_t i = n;
    while (i-- > 0) {
      if (pick[i] != i + total - n) break;
      if (i == 0) return best;
    }
    if (pick[i] == i + total - n) return best;
    ++pick[i];
    for (std::size_t k = i + 1; k < n; ++k) pick[k] = pick[k - 1] + 1;
  }
}

}  // namespace wdro
