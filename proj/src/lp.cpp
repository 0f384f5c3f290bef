#include "ncmdp/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ncmdp {

namespace {

class Tableau {
 public:
  Tableau(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * (cols + 1), 0.0) {}

  double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * (cols_ + 1) + j]; }
  double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * (cols_ + 1) + j]; }
  double& rhs(int i) { return at(i, cols_); }
  double rhs(int i) const { return at(i, cols_); }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  void pivot(int r, int c) {
    const double p = at(r, c);
    for (int j = 0; j <= cols_; ++j) at(r, j) /= p;
    at(r, c) = 1.0;
    for (int i = 0; i < rows_; ++i) {
      if (i == r) continue;
      const double f = at(i, c);
      if (f == 0.0) continue;
      for (int j = 0; j <= cols_; ++j) at(i, j) -= f * at(r, j);
      at(i, c) = 0.0;
    }
  }

 private:
  int rows_;
  int cols_;
  std::vector<double> data_;
};

enum class PhaseOutcome { optimal, unbounded, iteration_limit };

// Maximizes cost'x over the current tableau with Bland's rule.
PhaseOutcome run_phase(Tableau& t, std::vector<int>& basis, const std::vector<double>& cost,
                       const std::vector<bool>& may_enter, const LpOptions& opt, int& iterations) {
  const int m = t.rows();
  const int n = t.cols();
  std::vector<double> reduced(n);
  for (;;) {
    for (int j = 0; j < n; ++j) {
      double z = 0.0;
      for (int i = 0; i < m; ++i) z += cost[basis[i]] * t.at(i, j);
      reduced[j] = cost[j] - z;
    }
    int enter = -1;
    for (int j = 0; j < n; ++j) {
      if (may_enter[j] && reduced[j] > opt.pivot_tolerance) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return PhaseOutcome::optimal;
    if (iterations >= opt.max_iterations) return PhaseOutcome::iteration_limit;

    int leave = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < m; ++i) {
      const double a = t.at(i, enter);
      if (a <= opt.pivot_tolerance) continue;
      const double ratio = t.rhs(i) / a;
      if (leave < 0 || ratio < best_ratio - 1e-12 ||
          (std::abs(ratio - best_ratio) <= 1e-12 && basis[i] < basis[leave])) {
        leave = i;
        best_ratio = ratio;
      }
    }
    if (leave < 0) return PhaseOutcome::unbounded;
    t.pivot(leave, enter);
    basis[leave] = enter;
    ++iterations;
  }
}

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const LpOptions& opt) {
  const int n = lp.num_vars;
  const int m = static_cast<int>(lp.rows.size());
  if (n <= 0 || lp.objective.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("solve_lp: objective size does not match num_vars");
  }
  for (const auto& row : lp.rows) {
    if (row.coeffs.size() != static_cast<std::size_t>(n)) {
      throw std::invalid_argument("solve_lp: row size does not match num_vars");
    }
  }

  // Standard form: flip rows to rhs >= 0, add slack/surplus, then one
  // artificial per row that has no slack to start the basis with.
  std::vector<bool> flipped(m);
  std::vector<RowSense> sense(m);
  int extra = 0;
  for (int i = 0; i < m; ++i) {
    flipped[i] = lp.rows[i].rhs < 0.0;
    sense[i] = lp.rows[i].sense;
    if (flipped[i] && sense[i] != RowSense::equal) {
      sense[i] = sense[i] == RowSense::less_equal ? RowSense::greater_equal : RowSense::less_equal;
    }
    if (sense[i] != RowSense::equal) ++extra;
  }
  int artificial_count = 0;
  for (int i = 0; i < m; ++i) {
    if (sense[i] != RowSense::less_equal) ++artificial_count;
  }
  const int first_artificial = n + extra;
  const int total = first_artificial + artificial_count;

  Tableau t(m, total);
  std::vector<int> basis(m);
  std::vector<int> initial_column(m);
  int slack = n;
  int art = first_artificial;
  for (int i = 0; i < m; ++i) {
    const double sign = flipped[i] ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) t.at(i, j) = sign * lp.rows[i].coeffs[j];
    t.rhs(i) = sign * lp.rows[i].rhs;
    if (sense[i] == RowSense::less_equal) {
      t.at(i, slack) = 1.0;
      basis[i] = initial_column[i] = slack++;
    } else {
      if (sense[i] == RowSense::greater_equal) t.at(i, slack++) = -1.0;
      t.at(i, art) = 1.0;
      basis[i] = initial_column[i] = art++;
    }
  }

  LpResult result;
  std::vector<bool> may_enter(total, true);

  // Phase one: maximize -(sum of artificials).
  std::vector<double> cost(total, 0.0);
  for (int j = first_artificial; j < total; ++j) cost[j] = -1.0;
  auto outcome = run_phase(t, basis, cost, may_enter, opt, result.iterations);
  if (outcome == PhaseOutcome::iteration_limit) return result;
  double infeasibility = 0.0;
  for (int i = 0; i < m; ++i) {
    if (basis[i] >= first_artificial) infeasibility += t.rhs(i);
  }
  result.infeasibility = infeasibility;
  if (infeasibility > opt.feasibility_tolerance) {
    result.status = LpStatus::infeasible;
    return result;
  }

  // Pivot zero-level artificials out where possible. Rows where that fails
  // are redundant; their artificial stays basic at zero and never moves.
  for (int i = 0; i < m; ++i) {
    if (basis[i] < first_artificial) continue;
    for (int j = 0; j < first_artificial; ++j) {
      if (std::abs(t.at(i, j)) > opt.pivot_tolerance) {
        t.pivot(i, j);
        basis[i] = j;
        break;
      }
    }
  }
  for (int j = first_artificial; j < total; ++j) may_enter[j] = false;

  std::fill(cost.begin(), cost.end(), 0.0);
  for (int j = 0; j < n; ++j) cost[j] = lp.objective[j];
  outcome = run_phase(t, basis, cost, may_enter, opt, result.iterations);
  if (outcome == PhaseOutcome::iteration_limit) return result;
  if (outcome == PhaseOutcome::unbounded) {
    result.status = LpStatus::unbounded;
    return result;
  }

  result.status = LpStatus::optimal;
  result.x.assign(n, 0.0);
  for (int i = 0; i < m; ++i) {
    if (basis[i] < n) result.x[basis[i]] = std::max(0.0, t.rhs(i));
  }
  result.objective = 0.0;
  for (int j = 0; j < n; ++j) result.objective += lp.objective[j] * result.x[j];

  // The initial identity columns now hold B^{-1}, so y' = c_B' B^{-1}.
  result.duals.assign(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double y = 0.0;
    for (int k = 0; k < m; ++k) y += cost[basis[k]] * t.at(k, initial_column[i]);
    result.duals[i] = flipped[i] ? -y : y;
  }
  return result;
}

}  // namespace ncmdp
