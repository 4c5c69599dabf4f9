#include "fmuxnet/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fmuxnet/errors.hpp"

namespace fmuxnet {

std::size_t LinearProgram::add_variable(double objective_coefficient) {
  objective.push_back(objective_coefficient);
  return variable_count++;
}

void LinearProgram::add_row(std::vector<std::pair<std::size_t, double>> terms, Relation relation,
                            double rhs) {
  rows.push_back(Row{std::move(terms), relation, rhs});
}

namespace {

constexpr double kPivotEps = 1e-11;
constexpr std::size_t kDegenerateRunBeforeBland = 50;

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_((rows + 1) * (cols + 1), 0.0) {}

  double& at(std::size_t r, std::size_t c) { return data_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * (cols_ + 1) + c]; }
  // Column cols_ holds the right-hand side; row rows_ is the objective row.
  double& rhs(std::size_t r) { return at(r, cols_); }
  double& cost(std::size_t c) { return at(rows_, c); }

  void pivot(std::size_t pr, std::size_t pc) {
    const double inv = 1.0 / at(pr, pc);
    for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (std::size_t r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

enum class RunResult { optimal, unbounded, pivot_limit };

// Minimizes the objective row (stored as reduced costs) over the allowed columns.
RunResult run_simplex(Tableau& t, std::vector<std::size_t>& basis, const std::vector<char>& allowed,
                      double eps, std::size_t& pivots) {
  const std::size_t limit = 50000 + 50 * (t.rows() + t.cols());
  std::size_t degenerate_run = 0;
  bool bland = false;
  while (true) {
    if (pivots > limit) return RunResult::pivot_limit;
    std::size_t enter = t.cols();
    double best = -eps;
    for (std::size_t c = 0; c < t.cols(); ++c) {
      if (!allowed[c]) continue;
      const double rc = t.cost(c);
      if (bland) {
        if (rc < -eps) {
          enter = c;
          break;
        }
      } else if (rc < best) {
        best = rc;
        enter = c;
      }
    }
    if (enter == t.cols()) return RunResult::optimal;

    std::size_t leave = t.rows();
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, enter);
      if (a <= kPivotEps) continue;
      const double ratio = t.rhs(r) / a;
      if (ratio < best_ratio - 1e-12 ||
          (ratio <= best_ratio + 1e-12 && leave < t.rows() && basis[r] < basis[leave])) {
        best_ratio = std::min(best_ratio, ratio);
        leave = r;
      }
    }
    if (leave == t.rows()) return RunResult::unbounded;

    if (t.rhs(leave) <= eps) {
      if (++degenerate_run > kDegenerateRunBeforeBland) bland = true;
    } else {
      degenerate_run = 0;
    }
    t.pivot(leave, enter);
    basis[leave] = enter;
    ++pivots;
  }
}

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const LpTolerances& tol) {
  const std::size_t m = lp.rows.size();
  const std::size_t n = lp.variable_count;
  if (lp.objective.size() != n) throw LPNumericalFailure("objective length mismatch");

  // Normalize to nonnegative right-hand sides.
  std::vector<double> sign(m, 1.0);
  std::vector<Relation> rel(m);
  for (std::size_t i = 0; i < m; ++i) {
    rel[i] = lp.rows[i].relation;
    if (lp.rows[i].rhs < 0.0) {
      sign[i] = -1.0;
      if (rel[i] == Relation::less_equal)
        rel[i] = Relation::greater_equal;
      else if (rel[i] == Relation::greater_equal)
        rel[i] = Relation::less_equal;
    }
  }

  // Columns: structural | slack or surplus per inequality row | artificial per
  // row lacking a slack basis column.
  std::vector<std::size_t> slack_col(m, SIZE_MAX);
  std::vector<std::size_t> art_col(m, SIZE_MAX);
  std::size_t cols = n;
  for (std::size_t i = 0; i < m; ++i)
    if (rel[i] != Relation::equal) slack_col[i] = cols++;
  const std::size_t first_art = cols;
  for (std::size_t i = 0; i < m; ++i)
    if (rel[i] != Relation::less_equal) art_col[i] = cols++;

  Tableau t(m, cols);
  std::vector<std::size_t> basis(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (const auto& [var, coef] : lp.rows[i].terms) {
      if (var >= n) throw LPNumericalFailure("row references unknown variable");
      t.at(i, var) += sign[i] * coef;
    }
    t.rhs(i) = sign[i] * lp.rows[i].rhs;
    if (slack_col[i] != SIZE_MAX) t.at(i, slack_col[i]) = (rel[i] == Relation::less_equal) ? 1.0 : -1.0;
    if (art_col[i] != SIZE_MAX) {
      t.at(i, art_col[i]) = 1.0;
      basis[i] = art_col[i];
    } else {
      basis[i] = slack_col[i];
    }
  }

  std::size_t pivots = 0;
  std::vector<char> allowed(cols, 1);

  if (first_art < cols) {
    // Phase one: minimize the sum of artificials.
    for (std::size_t c = 0; c <= cols; ++c) t.at(m, c) = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (art_col[i] == SIZE_MAX) continue;
      for (std::size_t c = 0; c <= cols; ++c) t.at(m, c) -= t.at(i, c);
    }
    for (std::size_t i = 0; i < m; ++i)
      if (art_col[i] != SIZE_MAX) t.cost(art_col[i]) = 0.0;
    const RunResult r = run_simplex(t, basis, allowed, tol.optimality, pivots);
    if (r == RunResult::pivot_limit) throw LPNumericalFailure("pivot limit reached in phase one");
    if (-t.rhs(m) > tol.feasibility * std::max(1.0, static_cast<double>(m)))
      throw LPNumericalFailure("infeasible program (phase-one residual " +
                               std::to_string(-t.rhs(m)) + ")");
    // Drive remaining zero-level artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
      if (basis[i] < first_art) continue;
      for (std::size_t c = 0; c < first_art; ++c) {
        if (std::abs(t.at(i, c)) > 1e-9) {
          t.pivot(i, c);
          basis[i] = c;
          ++pivots;
          break;
        }
      }
    }
    for (std::size_t c = first_art; c < cols; ++c) allowed[c] = 0;
  }

  // Phase two: minimize -objective.
  for (std::size_t c = 0; c <= cols; ++c) t.at(m, c) = 0.0;
  for (std::size_t j = 0; j < n; ++j) t.cost(j) = -lp.objective[j];
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t b = basis[i];
    const double cb = (b < n) ? -lp.objective[b] : 0.0;
    if (cb == 0.0) continue;
    for (std::size_t c = 0; c <= cols; ++c) t.at(m, c) -= cb * t.at(i, c);
  }
  const RunResult r = run_simplex(t, basis, allowed, tol.optimality, pivots);
  if (r == RunResult::unbounded) throw LPNumericalFailure("unbounded program");
  if (r == RunResult::pivot_limit) throw LPNumericalFailure("pivot limit reached in phase two");

  LpSolution sol;
  sol.pivots = pivots;
  sol.x.assign(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) sol.x[basis[i]] = std::max(0.0, t.rhs(i));

  // Row duals from the reduced costs of each row's identity column.
  sol.duals.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double y;
    if (rel[i] == Relation::less_equal)
      y = t.cost(slack_col[i]);
    else
      y = t.cost(art_col[i]);
    sol.duals[i] = sign[i] * y;
  }

  // Residual certification against the original data.
  LpResiduals& res = sol.residuals;
  double scale = 1.0;
  for (const auto& row : lp.rows) scale = std::max(scale, std::abs(row.rhs));
  for (double c : lp.objective) scale = std::max(scale, std::abs(c));

  std::vector<double> reduced(lp.objective.begin(), lp.objective.end());
  for (double& v : reduced) v = -v;
  double primal_obj = 0.0;
  double dual_obj = 0.0;
  for (std::size_t j = 0; j < n; ++j) primal_obj += lp.objective[j] * sol.x[j];
  for (std::size_t i = 0; i < m; ++i) {
    const auto& row = lp.rows[i];
    double ax = 0.0;
    for (const auto& [var, coef] : row.terms) {
      ax += coef * sol.x[var];
      reduced[var] += sol.duals[i] * coef;
    }
    const double slack = row.rhs - ax;
    double viol = 0.0;
    double dual_sign_viol = 0.0;
    switch (row.relation) {
      case Relation::less_equal:
        viol = std::max(0.0, -slack);
        dual_sign_viol = std::max(0.0, -sol.duals[i]);
        break;
      case Relation::greater_equal:
        viol = std::max(0.0, slack);
        dual_sign_viol = std::max(0.0, sol.duals[i]);
        break;
      case Relation::equal:
        viol = std::abs(slack);
        break;
    }
    res.primal = std::max(res.primal, viol);
    res.dual = std::max(res.dual, dual_sign_viol);
    res.slackness = std::max(res.slackness, std::abs(sol.duals[i] * slack));
    dual_obj += sol.duals[i] * row.rhs;
  }
  for (std::size_t j = 0; j < n; ++j) {
    res.dual = std::max(res.dual, std::max(0.0, -reduced[j]));
    res.slackness = std::max(res.slackness, std::abs(sol.x[j] * reduced[j]));
  }
  res.gap = std::abs(primal_obj - dual_obj);
  sol.objective = primal_obj;

  const double ptol = tol.feasibility * scale * 1e2;
  const double dtol = tol.optimality * scale * 1e2;
  if (res.primal > ptol || res.dual > dtol || res.slackness > dtol || res.gap > dtol) {
    std::ostringstream msg;
    msg << "simplex residual check failed: primal=" << res.primal << " dual=" << res.dual
        << " slackness=" << res.slackness << " gap=" << res.gap;
    throw LPNumericalFailure(msg.str());
  }
  return sol;
}

}  // namespace fmuxnet
