#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tollopt/errors.hpp"

namespace tollopt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Generic dense linear program: named bounded variables, a linear objective,
// and a list of (expression, relation, rhs) constraints. Built once by a
// dedicated constructor per use so row/column order is deterministic.
class LinearProgram {
 public:
  enum class Sense { minimize, maximize };
  enum class Relation { less_equal, equal, greater_equal };

  struct Constraint {
    std::vector<std::pair<int, double>> terms;  // (variable, coefficient)
    Relation relation = Relation::less_equal;
    double rhs = 0.0;
    std::string name;
  };

  int add_variable(std::string name, double lower = 0.0, double upper = kInf);
  void set_objective_sense(Sense sense) { sense_ = sense; }
  void set_objective_coeff(int var, double coeff);
  int add_constraint(std::vector<std::pair<int, double>> terms,
                     Relation relation, double rhs, std::string name = "");

  int num_variables() const { return static_cast<int>(lower_.size()); }
  int num_constraints() const { return static_cast<int>(rows_.size()); }
  Sense sense() const { return sense_; }
  const std::vector<double>& objective() const { return obj_; }
  double lower(int v) const { return lower_[v]; }
  double upper(int v) const { return upper_[v]; }
  const std::string& variable_name(int v) const { return names_[v]; }
  const Constraint& constraint(int i) const { return rows_[i]; }

 private:
  Sense sense_ = Sense::minimize;
  std::vector<std::string> names_;
  std::vector<double> lower_, upper_, obj_;
  std::vector<Constraint> rows_;
};

struct LpSolution {
  enum class Status { optimal, infeasible, unbounded };
  Status status = Status::infeasible;
  std::vector<double> x;   // by original variable index; empty unless optimal
  double objective = 0.0;  // in the LP's own sense
  long pivots = 0;
};

struct LpOptions {
  double feasibility_tol = 1e-7;  // re-check threshold on scaled rows
  double pivot_tol = 1e-9;
  long max_pivots = 0;  // 0: derived from the problem size
};

// Two-phase primal simplex on a dense tableau; Dantzig pricing with a
// permanent switch to Bland's rule after a degenerate stall. Throws LpError
// on numerical breakdown or pivot-limit hits (distinct from infeasible).
LpSolution lp_solve(const LinearProgram& lp, const LpOptions& opts = {});

// Largest scaled violation of constraints and bounds at x. Rows are scaled
// by max(1, |rhs|, max |coeff|).
double max_constraint_violation(const LinearProgram& lp,
                                std::span<const double> x);

double objective_value(const LinearProgram& lp, std::span<const double> x);

// Fixed-column MPS dump for cross-checking against external tools.
void write_mps(const LinearProgram& lp, std::ostream& os,
               const std::string& problem_name = "TOLLOPT");

}  // namespace tollopt
