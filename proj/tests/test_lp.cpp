#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tollopt/lp.hpp"

using namespace tollopt;
using Rel = LinearProgram::Relation;
using Sense = LinearProgram::Sense;
using Status = LpSolution::Status;

TEST_CASE("bounded single variable") {
  LinearProgram lp;
  const int x = lp.add_variable("x", 0.0, kInf);
  lp.set_objective_sense(Sense::maximize);
  lp.set_objective_coeff(x, 1.0);
  lp.add_constraint({{x, 1.0}}, Rel::less_equal, 1.0);
  const LpSolution sol = lp_solve(lp);
  REQUIRE(sol.status == Status::optimal);
  CHECK(sol.objective == doctest::Approx(1.0));
  CHECK(sol.x[x] == doctest::Approx(1.0));
}

TEST_CASE("infeasible sign conflict") {
  LinearProgram lp;
  const int x = lp.add_variable("x", 0.0, kInf);
  lp.add_constraint({{x, 1.0}}, Rel::less_equal, -1.0);
  CHECK(lp_solve(lp).status == Status::infeasible);
}

TEST_CASE("unbounded ray") {
  LinearProgram lp;
  const int x = lp.add_variable("x", 0.0, kInf);
  lp.set_objective_sense(Sense::maximize);
  lp.set_objective_coeff(x, 1.0);
  CHECK(lp_solve(lp).status == Status::unbounded);
}

TEST_CASE("equalities, free and fixed variables") {
  // min x + y  s.t.  x + y = 2, x - y >= -4, y free, z fixed at 3 in a row.
  LinearProgram lp;
  const int x = lp.add_variable("x", 0.0, kInf);
  const int y = lp.add_variable("y", -kInf, kInf);
  const int z = lp.add_variable("z", 3.0, 3.0);
  lp.set_objective_coeff(x, 1.0);
  lp.set_objective_coeff(y, 1.0);
  lp.add_constraint({{x, 1.0}, {y, 1.0}}, Rel::equal, 2.0);
  lp.add_constraint({{x, 1.0}, {y, -1.0}}, Rel::greater_equal, -4.0);
  lp.add_constraint({{z, 1.0}, {y, 1.0}}, Rel::less_equal, 6.0);
  const LpSolution sol = lp_solve(lp);
  REQUIRE(sol.status == Status::optimal);
  CHECK(sol.objective == doctest::Approx(2.0));
  CHECK(sol.x[z] == 3.0);
  CHECK(max_constraint_violation(lp, sol.x) <= 1e-7);
}

TEST_CASE("production-style LP with known optimum") {
  // max 5c + 8t  s.t. 2c+3t <= 120, 4c+2t <= 100, c+2t <= 80.
  // Vertices put the optimum at c=0, t=40, value 320.
  LinearProgram lp;
  const int c = lp.add_variable("c", 0.0, kInf);
  const int t = lp.add_variable("t", 0.0, kInf);
  lp.set_objective_sense(Sense::maximize);
  lp.set_objective_coeff(c, 5.0);
  lp.set_objective_coeff(t, 8.0);
  lp.add_constraint({{c, 2.0}, {t, 3.0}}, Rel::less_equal, 120.0);
  lp.add_constraint({{c, 4.0}, {t, 2.0}}, Rel::less_equal, 100.0);
  lp.add_constraint({{c, 1.0}, {t, 2.0}}, Rel::less_equal, 80.0);
  const LpSolution sol = lp_solve(lp);
  REQUIRE(sol.status == Status::optimal);
  CHECK(sol.objective == doctest::Approx(320.0));
  const auto oracle = oracles::vertex_enumeration(lp);
  REQUIRE(oracle.feasible);
  CHECK(oracle.objective == doctest::Approx(320.0));
}

TEST_CASE("random box LPs agree with the vertex oracle") {
  int optimal = 0, infeasible = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const LinearProgram lp = oracles::random_box_lp(seed);
    const auto oracle = oracles::vertex_enumeration(lp);
    const LpSolution sol = lp_solve(lp);
    if (oracle.feasible) {
      ++optimal;
      REQUIRE_MESSAGE(sol.status == Status::optimal, "seed ", seed);
      CHECK_MESSAGE(
          sol.objective ==
              doctest::Approx(oracle.objective)
                  .epsilon(1e-8 * std::max(1.0, std::abs(oracle.objective))),
          "seed ", seed);
      CHECK(max_constraint_violation(lp, sol.x) <= 1e-7);
    } else {
      ++infeasible;
      CHECK_MESSAGE(sol.status == Status::infeasible, "seed ", seed);
    }
  }
  // The generator must exercise both outcomes.
  CHECK(optimal > 10);
  CHECK(infeasible > 2);
}

TEST_CASE("row and column permutations keep the objective") {
  for (std::uint64_t seed : {3ULL, 17ULL, 29ULL}) {
    const LinearProgram lp = oracles::random_box_lp(seed);
    const LpSolution base = lp_solve(lp);
    if (base.status != Status::optimal) continue;

    // Rebuild with reversed variable and constraint order.
    LinearProgram perm;
    perm.set_objective_sense(lp.sense());
    const int n = lp.num_variables();
    std::vector<int> map(n);
    for (int j = 0; j < n; ++j) {
      map[n - 1 - j] = perm.add_variable(lp.variable_name(n - 1 - j),
                                         lp.lower(n - 1 - j),
                                         lp.upper(n - 1 - j));
    }
    for (int j = 0; j < n; ++j)
      perm.set_objective_coeff(map[j], lp.objective()[j]);
    for (int i = lp.num_constraints() - 1; i >= 0; --i) {
      auto terms = lp.constraint(i).terms;
      std::reverse(terms.begin(), terms.end());
      for (auto& [v, coeff] : terms) v = map[v];
      perm.add_constraint(std::move(terms), lp.constraint(i).relation,
                          lp.constraint(i).rhs);
    }
    const LpSolution again = lp_solve(perm);
    REQUIRE(again.status == Status::optimal);
    CHECK(again.objective ==
          doctest::Approx(base.objective)
              .epsilon(1e-8 * std::max(1.0, std::abs(base.objective))));
  }
}

TEST_CASE("degenerate LP still terminates") {
  // Many redundant rows through the same vertex.
  LinearProgram lp;
  const int x = lp.add_variable("x", 0.0, kInf);
  const int y = lp.add_variable("y", 0.0, kInf);
  lp.set_objective_sense(Sense::maximize);
  lp.set_objective_coeff(x, 1.0);
  lp.set_objective_coeff(y, 1.0);
  for (int i = 1; i <= 6; ++i)
    lp.add_constraint({{x, static_cast<double>(i)}, {y, static_cast<double>(i)}},
                      Rel::less_equal, 2.0 * i);
  const LpSolution sol = lp_solve(lp);
  REQUIRE(sol.status == Status::optimal);
  CHECK(sol.objective == doctest::Approx(2.0));
}

TEST_CASE("pivot cap raises a solver failure, not a status") {
  LinearProgram lp;
  const int x = lp.add_variable("x", 0.0, kInf);
  const int y = lp.add_variable("y", 0.0, kInf);
  lp.set_objective_sense(Sense::maximize);
  lp.set_objective_coeff(x, 1.0);
  lp.set_objective_coeff(y, 2.0);
  lp.add_constraint({{x, 1.0}, {y, 1.0}}, Rel::less_equal, 4.0);
  lp.add_constraint({{x, 1.0}, {y, 3.0}}, Rel::less_equal, 6.0);
  LpOptions opts;
  opts.max_pivots = 1;
  CHECK_THROWS_AS(lp_solve(lp, opts), LpError);
}

TEST_CASE("mps dump carries the full problem") {
  LinearProgram lp;
  const int x = lp.add_variable("x", 0.0, 4.0);
  const int y = lp.add_variable("y", -kInf, kInf);
  lp.set_objective_sense(Sense::maximize);
  lp.set_objective_coeff(x, 1.5);
  lp.set_objective_coeff(y, 1.0);
  lp.add_constraint({{x, 2.0}, {y, 1.0}}, Rel::less_equal, 10.0, "CAP");
  std::ostringstream os;
  write_mps(lp, os, "CHECK");
  const std::string text = os.str();
  CHECK(text.find("NAME          CHECK") != std::string::npos);
  CHECK(text.find("OBJSENSE") != std::string::npos);
  CHECK(text.find(" L  CAP") != std::string::npos);
  CHECK(text.find("COLUMNS") != std::string::npos);
  CHECK(text.find("RHS") != std::string::npos);
  CHECK(text.find(" FR ") != std::string::npos);
  CHECK(text.find(" UP ") != std::string::npos);
  CHECK(text.find("ENDATA") != std::string::npos);
}
