#pragma once

// Small dense linear programs: maximize c'x subject to row constraints and
// x >= 0, solved with a two-phase tableau simplex (Bland's rule, so
// degenerate occupancy-measure programs cannot cycle).

#include <vector>

namespace ncmdp {

enum class RowSense { equal, greater_equal, less_equal };

struct LinearProgram {
  struct Row {
    std::vector<double> coeffs;
    RowSense sense = RowSense::equal;
    double rhs = 0.0;
  };

  int num_vars = 0;
  std::vector<double> objective;  // maximized
  std::vector<Row> rows;
};

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpOptions {
  double pivot_tolerance = 1e-9;
  double feasibility_tolerance = 1e-8;
  int max_iterations = 100000;
};

struct LpResult {
  LpStatus status = LpStatus::iteration_limit;
  double objective = 0.0;
  std::vector<double> x;
  /// Shadow prices d(objective)/d(rhs_i); <= 0 for binding >= rows.
  std::vector<double> duals;
  /// Optimal phase-one value (sum of artificial variables).
  double infeasibility = 0.0;
  int iterations = 0;
};

LpResult solve_lp(const LinearProgram& lp, const LpOptions& options = {});

}  // namespace ncmdp
