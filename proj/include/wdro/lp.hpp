#pragma once

#include <vector>

namespace wdro {

/// maximize c^T x  subject to  A x <= b, x >= 0, with b >= 0 (the origin is
/// feasible, so no phase one is needed).
struct LinearProgram {
  std::vector<std::vector<double>> A;
  std::vector<double> b;
  std::vector<double> c;
};

struct LpSolution {
  double objective = 0.0;
  std::vector<double> x;
};

/// Dense tableau simplex with Bland's rule; pivots below 1e-12 are skipped.
LpSolution solve_simplex(const LinearProgram& lp);

/// Exhaustive search over basic feasible solutions. Exponential; meant for
/// a dozen variables or fewer.
LpSolution solve_vertex_enumeration(const LinearProgram& lp);

}  // namespace wdro
