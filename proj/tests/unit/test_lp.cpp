#include <fmuxnet/errors.hpp>
#include <fmuxnet/lp.hpp>

#include <doctest.h>

#include <random>

using namespace fmuxnet;

TEST_CASE("textbook maximum") {
  // max 3x + 2y, x + y <= 4, x + 3y <= 6, x <= 3  ->  (3, 1), 11
  LinearProgram lp;
  auto x = lp.add_variable(3.0);
  auto y = lp.add_variable(2.0);
  lp.add_row({{x, 1}, {y, 1}}, Relation::less_equal, 4);
  lp.add_row({{x, 1}, {y, 3}}, Relation::less_equal, 6);
  lp.add_row({{x, 1}}, Relation::less_equal, 3);
  auto s = solve_lp(lp);
  CHECK(s.objective == doctest::Approx(11.0));
  CHECK(s.x[x] == doctest::Approx(3.0));
  CHECK(s.x[y] == doctest::Approx(1.0));
  CHECK(s.residuals.gap < 1e-9);
}

TEST_CASE("equality and lower-bound rows need phase one") {
  LinearProgram lp;
  auto x = lp.add_variable(1.0);
  auto y = lp.add_variable(-1.0);
  lp.add_row({{x, 1}, {y, 1}}, Relation::equal, 2);
  lp.add_row({{y, 1}}, Relation::greater_equal, 0.5);
  auto s = solve_lp(lp);
  CHECK(s.objective == doctest::Approx(1.0));
  CHECK(s.x[y] == doctest::Approx(0.5));
}

TEST_CASE("infeasible and unbounded") {
  LinearProgram bad;
  auto x = bad.add_variable(1.0);
  bad.add_row({{x, 1}}, Relation::less_equal, 1);
  bad.add_row({{x, 1}}, Relation::greater_equal, 2);
  CHECK_THROWS_AS(solve_lp(bad), LPNumericalFailure);

  LinearProgram open;
  auto a = open.add_variable(1.0);
  auto b = open.add_variable(0.0);
  open.add_row({{a, 1}, {b, -1}}, Relation::less_equal, 1);
  CHECK_THROWS_AS(solve_lp(open), LPNumericalFailure);
}

TEST_CASE("degenerate cycling example terminates") {
  // Beale's example; Dantzig's rule alone cycles here. Optimum 1.25.
  LinearProgram lp;
  auto x4 = lp.add_variable(0.75);
  auto x5 = lp.add_variable(-20);
  auto x6 = lp.add_variable(0.5);
  auto x7 = lp.add_variable(-6);
  lp.add_row({{x4, 0.25}, {x5, -8}, {x6, -1}, {x7, 9}}, Relation::less_equal, 0);
  lp.add_row({{x4, 0.5}, {x5, -12}, {x6, -0.5}, {x7, 3}}, Relation::less_equal, 0);
  lp.add_row({{x6, 1}}, Relation::less_equal, 1);
  auto s = solve_lp(lp);
  CHECK(s.objective == doctest::Approx(1.25));
}

TEST_CASE("random packing LPs carry a dual certificate") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 6, m = 1 + trial % 5;
    std::vector<std::vector<double>> a(m, std::vector<double>(n));
    std::vector<double> b(m), c(n);
    LinearProgram lp;
    for (std::size_t j = 0; j < n; ++j) lp.add_variable(c[j] = u(rng));
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<std::pair<std::size_t, double>> terms;
      for (std::size_t j = 0; j < n; ++j) {
        a[i][j] = u(rng) < 0.3 ? 0.0 : u(rng);
        terms.emplace_back(j, a[i][j]);
      }
      b[i] = 0.5 + u(rng);
      lp.add_row(terms, Relation::less_equal, b[i]);
    }
    // Keep the problem bounded.
    std::vector<std::pair<std::size_t, double>> all;
    for (std::size_t j = 0; j < n; ++j) all.emplace_back(j, 1.0);
    lp.add_row(all, Relation::less_equal, 3.0);
    a.emplace_back(n, 1.0);
    b.push_back(3.0);

    auto s = solve_lp(lp);
    // Weak duality: any y >= 0 with A^T y >= c bounds the primal, and the
    // returned duals must attain it.
    double by = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(s.duals[i] >= -1e-9);
      by += b[i] * s.duals[i];
    }
    for (std::size_t j = 0; j < n; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) col += a[i][j] * s.duals[i];
      CHECK(col >= c[j] - 1e-8);
    }
    double cx = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(s.x[j] >= -1e-12);
      cx += c[j] * s.x[j];
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < n; ++j) row += a[i][j] * s.x[j];
      CHECK(row <= b[i] + 1e-9);
    }
    CHECK(cx == doctest::Approx(by).epsilon(1e-9));
    CHECK(cx == doctest::Approx(s.objective).epsilon(1e-12));
  }
}
