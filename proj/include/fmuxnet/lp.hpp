#pragma once

#include <cstddef>
#include <utility>
#include <vector>

namespace fmuxnet {

enum class Relation { less_equal, equal, greater_equal };

// maximize objective . x  subject to  rows,  x >= 0.
struct LinearProgram {
  struct Row {
    std::vector<std::pair<std::size_t, double>> terms;  // (variable, coefficient)
    Relation relation = Relation::less_equal;
    double rhs = 0.0;
  };

  std::size_t variable_count = 0;
  std::vector<double> objective;
  std::vector<Row> rows;

  std::size_t add_variable(double objective_coefficient = 0.0);
  void add_row(std::vector<std::pair<std::size_t, double>> terms, Relation relation, double rhs);
};

struct LpResiduals {
  double primal = 0.0;        // worst constraint or bound violation
  double dual = 0.0;          // worst reduced-cost or dual-sign violation
  double slackness = 0.0;     // worst complementary-slackness product
  double gap = 0.0;           // |primal objective - dual objective|
};

struct LpSolution {
  std::vector<double> x;
  std::vector<double> duals;  // one per row
  double objective = 0.0;
  LpResiduals residuals;
  std::size_t pivots = 0;
};

struct LpTolerances {
  double feasibility = 1e-9;
  double optimality = 1e-8;
};

// Dense two-phase tableau simplex. Entering column: most negative reduced cost,
// lowest index on ties; falls back to Bland's rule after a run of degenerate
// pivots. The optimum is certified by recomputing the residuals above from the
// final basis duals.
//
// Throws LPNumericalFailure when the residual check fails, the problem is
// infeasible or unbounded, or the pivot limit is hit.
LpSolution solve_lp(const LinearProgram& lp, const LpTolerances& tol = {});

}  // namespace fmuxnet
