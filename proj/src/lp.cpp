#include "tollopt/lp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "tollopt/kernels.hpp"

namespace tollopt {

int LinearProgram::add_variable(std::string name, double lower, double upper) {
  if (std::isnan(lower) || std::isnan(upper) || lower > upper)
    throw InputError("variable '" + name + "' has an empty bound interval");
  names_.push_back(std::move(name));
  lower_.push_back(lower);
  upper_.push_back(upper);
  obj_.push_back(0.0);
  return static_cast<int>(lower_.size()) - 1;
}

void LinearProgram::set_objective_coeff(int var, double coeff) {
  if (var < 0 || var >= num_variables())
    throw InputError("objective references an undeclared variable");
  if (!std::isfinite(coeff)) throw InputError("non-finite objective coefficient");
  obj_[var] = coeff;
}

int LinearProgram::add_constraint(std::vector<std::pair<int, double>> terms,
                                  Relation relation, double rhs,
                                  std::string name) {
  for (const auto& [v, c] : terms) {
    if (v < 0 || v >= num_variables())
      throw InputError("constraint references an undeclared variable");
    if (!std::isfinite(c)) throw InputError("non-finite constraint coefficient");
  }
  if (!std::isfinite(rhs)) throw InputError("non-finite constraint rhs");
  rows_.push_back({std::move(terms), relation, rhs, std::move(name)});
  return static_cast<int>(rows_.size()) - 1;
}

namespace {

using Relation = LinearProgram::Relation;
using Sense = LinearProgram::Sense;

// Column mapping from an original variable to the nonnegative standard form.
struct VarMap {
  enum class Kind { fixed, shifted, mirrored, split } kind = Kind::shifted;
  int col = -1;       // primary column (unused when fixed)
  int neg_col = -1;   // second column of a free split
  double offset = 0;  // fixed value, lower bound, or upper bound
};

struct StandardForm {
  // rows: coefficients over structural columns, rhs >= 0 after normalization
  std::vector<std::vector<double>> rows;
  std::vector<Relation> rels;
  std::vector<double> rhs;
  std::vector<double> cost;  // minimize; over structural columns
  std::vector<VarMap> vmap;
  int num_cols = 0;
};

StandardForm standardize(const LinearProgram& lp) {
  StandardForm sf;
  const int n = lp.num_variables();
  sf.vmap.resize(n);

  for (int j = 0; j < n; ++j) {
    const double lo = lp.lower(j), hi = lp.upper(j);
    VarMap& vm = sf.vmap[j];
    if (lo == hi) {
      vm.kind = VarMap::Kind::fixed;
      vm.offset = lo;
    } else if (std::isfinite(lo)) {
      vm.kind = VarMap::Kind::shifted;
      vm.offset = lo;
      vm.col = sf.num_cols++;
    } else if (std::isfinite(hi)) {
      vm.kind = VarMap::Kind::mirrored;  // x = hi - u
      vm.offset = hi;
      vm.col = sf.num_cols++;
    } else {
      vm.kind = VarMap::Kind::split;  // x = u - v
      vm.col = sf.num_cols++;
      vm.neg_col = sf.num_cols++;
    }
  }

  sf.cost.assign(sf.num_cols, 0.0);
  const double sign = lp.sense() == Sense::maximize ? -1.0 : 1.0;
  for (int j = 0; j < n; ++j) {
    const double c = sign * lp.objective()[j];
    if (c == 0.0) continue;
    const VarMap& vm = sf.vmap[j];
    switch (vm.kind) {
      case VarMap::Kind::fixed:
        break;  // constant term; objective recomputed from x afterwards
      case VarMap::Kind::shifted:
        sf.cost[vm.col] += c;
        break;
      case VarMap::Kind::mirrored:
        sf.cost[vm.col] -= c;
        break;
      case VarMap::Kind::split:
        sf.cost[vm.col] += c;
        sf.cost[vm.neg_col] -= c;
        break;
    }
  }

  auto append_row = [&](const std::vector<std::pair<int, double>>& terms,
                        Relation rel, double rhs) {
    std::vector<double> row(sf.num_cols, 0.0);
    for (const auto& [j, coeff] : terms) {
      const VarMap& vm = sf.vmap[j];
      switch (vm.kind) {
        case VarMap::Kind::fixed:
          rhs -= coeff * vm.offset;
          break;
        case VarMap::Kind::shifted:
          row[vm.col] += coeff;
          rhs -= coeff * vm.offset;
          break;
        case VarMap::Kind::mirrored:
          row[vm.col] -= coeff;
          rhs -= coeff * vm.offset;
          break;
        case VarMap::Kind::split:
          row[vm.col] += coeff;
          row[vm.neg_col] -= coeff;
          break;
      }
    }
    if (rhs < 0.0) {
      for (double& v : row) v = -v;
      rhs = -rhs;
      rel = rel == Relation::less_equal      ? Relation::greater_equal
            : rel == Relation::greater_equal ? Relation::less_equal
                                             : Relation::equal;
    }
    sf.rows.push_back(std::move(row));
    sf.rels.push_back(rel);
    sf.rhs.push_back(rhs);
  };

  for (int i = 0; i < lp.num_constraints(); ++i) {
    const auto& c = lp.constraint(i);
    append_row(c.terms, c.relation, c.rhs);
  }
  // Finite upper bounds of shifted variables become explicit rows.
  for (int j = 0; j < n; ++j) {
    const VarMap& vm = sf.vmap[j];
    if (vm.kind == VarMap::Kind::shifted && std::isfinite(lp.upper(j)))
      append_row({{j, 1.0}}, Relation::less_equal, lp.upper(j));
  }
  return sf;
}

class Tableau {
 public:
  Tableau(const StandardForm& sf, const LpOptions& opts)
      : sf_(sf), opts_(opts), m_(static_cast<int>(sf.rows.size())) {
    // Column layout: structural | slack/surplus | artificial | rhs.
    n_struct_ = sf.num_cols;
    int extra = 0;
    for (Relation r : sf.rels)
      extra += r == Relation::equal ? 0 : 1;
    n_slack_ = extra;
    n_art_ = 0;
    for (Relation r : sf.rels)
      if (r != Relation::less_equal) ++n_art_;
    n_ = n_struct_ + n_slack_ + n_art_;
    width_ = n_ + 1;

    t_.assign(static_cast<std::size_t>(m_) * width_, 0.0);
    basis_.assign(m_, -1);
    artificial_start_ = n_struct_ + n_slack_;

    int slack_at = n_struct_;
    int art_at = artificial_start_;
    for (int i = 0; i < m_; ++i) {
      double* row = this->row(i);
      std::copy(sf.rows[i].begin(), sf.rows[i].end(), row);
      row[n_] = sf.rhs[i];
      switch (sf.rels[i]) {
        case Relation::less_equal:
          row[slack_at] = 1.0;
          basis_[i] = slack_at++;
          break;
        case Relation::greater_equal:
          row[slack_at] = -1.0;
          ++slack_at;
          row[art_at] = 1.0;
          basis_[i] = art_at++;
          break;
        case Relation::equal:
          row[art_at] = 1.0;
          basis_[i] = art_at++;
          break;
      }
    }
    allowed_.assign(n_, true);
  }

  // Returns false when phase 1 ends with positive infeasibility.
  bool phase1() {
    std::vector<double> cost(n_, 0.0);
    for (int j = artificial_start_; j < n_; ++j) cost[j] = 1.0;
    build_objective_row(cost);
    run();
    if (-obj_[n_] > opts_.feasibility_tol) return false;
    purge_artificials();
    return true;
  }

  void phase2() {
    std::vector<double> cost(n_, 0.0);
    std::copy(sf_.cost.begin(), sf_.cost.end(), cost.begin());
    for (int j = artificial_start_; j < n_; ++j) allowed_[j] = false;
    build_objective_row(cost);
    run();
  }

  bool unbounded() const { return unbounded_; }
  long pivots() const { return pivots_; }

  std::vector<double> structural_solution() const {
    std::vector<double> x(n_struct_, 0.0);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= 0 && basis_[i] < n_struct_)
        x[basis_[i]] = row_const(i)[n_];
    return x;
  }

 private:
  double* row(int i) { return t_.data() + static_cast<std::size_t>(i) * width_; }
  const double* row_const(int i) const {
    return t_.data() + static_cast<std::size_t>(i) * width_;
  }

  void build_objective_row(const std::vector<double>& cost) {
    obj_.assign(width_, 0.0);
    std::copy(cost.begin(), cost.end(), obj_.begin());
    for (int i = 0; i < m_; ++i) {
      const double cb = cost[basis_[i]];
      if (cb != 0.0)
        kernels::active().axpy(-cb, row_const(i), obj_.data(), width_);
    }
  }

  void purge_artificials() {
    // Pivot artificials out of the basis where possible; a row that admits
    // no structural pivot is redundant and is blanked out.
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < artificial_start_) continue;
      double* r = row(i);
      int piv = -1;
      for (int j = 0; j < artificial_start_; ++j)
        if (std::abs(r[j]) > opts_.pivot_tol && allowed_[j]) {
          piv = j;
          break;
        }
      if (piv >= 0) {
        pivot(i, piv);
      } else {
        std::fill(r, r + width_, 0.0);
        // keep the artificial basic in the zero row; it stays at value 0
      }
    }
  }

  void run() {
    unbounded_ = false;
    bool bland = false;
    int stall = 0;
    double last_obj = -obj_[n_];
    const long cap = opts_.max_pivots > 0
                         ? opts_.max_pivots
                         : 10000 + 200L * (m_ + n_);
    const int stall_limit = 200 + 2 * (m_ + n_);
    for (;;) {
      const int enter = choose_entering(bland);
      if (enter < 0) return;  // optimal for this phase
      const int leave = choose_leaving(enter);
      if (leave < 0) {
        unbounded_ = true;
        return;
      }
      pivot(leave, enter);
      if (++pivots_ > cap)
        throw LpError("simplex pivot limit exceeded (" + std::to_string(cap) +
                      ")");
      const double cur = -obj_[n_];
      if (cur < last_obj - 1e-12) {
        stall = 0;
        last_obj = cur;
      } else if (!bland && ++stall > stall_limit) {
        bland = true;  // anti-cycling fallback
      }
    }
  }

  int choose_entering(bool bland) const {
    const double tol = opts_.pivot_tol;
    if (bland) {
      for (int j = 0; j < n_; ++j)
        if (allowed_[j] && obj_[j] < -tol) return j;
      return -1;
    }
    int best = -1;
    double best_v = -tol;
    for (int j = 0; j < n_; ++j)
      if (allowed_[j] && obj_[j] < best_v) {
        best_v = obj_[j];
        best = j;
      }
    return best;
  }

  int choose_leaving(int enter) const {
    int best = -1;
    double best_ratio = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double a = row_const(i)[enter];
      if (a <= opts_.pivot_tol) continue;
      const double ratio = row_const(i)[n_] / a;
      if (best < 0 || ratio < best_ratio - 1e-12 ||
          (ratio < best_ratio + 1e-12 && basis_[i] < basis_[best])) {
        best = i;
        best_ratio = ratio;
      }
    }
    return best;
  }

  void pivot(int prow, int pcol) {
    double* pr = row(prow);
    const double inv = 1.0 / pr[pcol];
    for (int j = 0; j < width_; ++j) pr[j] *= inv;
    pr[pcol] = 1.0;
    const auto& kb = kernels::active();
    for (int i = 0; i < m_; ++i) {
      if (i == prow) continue;
      double* r = row(i);
      const double f = r[pcol];
      if (f != 0.0) {
        kb.axpy(-f, pr, r, width_);
        r[pcol] = 0.0;
      }
    }
    const double fo = obj_[pcol];
    if (fo != 0.0) {
      kb.axpy(-fo, pr, obj_.data(), width_);
      obj_[pcol] = 0.0;
    }
    basis_[prow] = pcol;
  }

  const StandardForm& sf_;
  LpOptions opts_;
  int m_ = 0, n_struct_ = 0, n_slack_ = 0, n_art_ = 0, n_ = 0, width_ = 0;
  int artificial_start_ = 0;
  std::vector<double> t_, obj_;
  std::vector<int> basis_;
  std::vector<bool> allowed_;
  bool unbounded_ = false;
  long pivots_ = 0;
};

}  // namespace

LpSolution lp_solve(const LinearProgram& lp, const LpOptions& opts) {
  StandardForm sf = standardize(lp);
  Tableau tab(sf, opts);

  LpSolution sol;
  if (!tab.phase1()) {
    sol.status = LpSolution::Status::infeasible;
    sol.pivots = tab.pivots();
    return sol;
  }
  tab.phase2();
  sol.pivots = tab.pivots();
  if (tab.unbounded()) {
    sol.status = LpSolution::Status::unbounded;
    return sol;
  }

  const std::vector<double> u = tab.structural_solution();
  sol.x.assign(lp.num_variables(), 0.0);
  for (int j = 0; j < lp.num_variables(); ++j) {
    const VarMap& vm = sf.vmap[j];
    switch (vm.kind) {
      case VarMap::Kind::fixed:
        sol.x[j] = vm.offset;
        break;
      case VarMap::Kind::shifted:
        sol.x[j] = vm.offset + u[vm.col];
        break;
      case VarMap::Kind::mirrored:
        sol.x[j] = vm.offset - u[vm.col];
        break;
      case VarMap::Kind::split:
        sol.x[j] = u[vm.col] - u[vm.neg_col];
        break;
    }
  }
  const double viol = max_constraint_violation(lp, sol.x);
  if (viol > opts.feasibility_tol)
    throw LpError("optimal basis failed the feasibility re-check (violation " +
                  std::to_string(viol) + ")");
  sol.status = LpSolution::Status::optimal;
  sol.objective = objective_value(lp, sol.x);
  return sol;
}

double max_constraint_violation(const LinearProgram& lp,
                                std::span<const double> x) {
  double worst = 0.0;
  for (int i = 0; i < lp.num_constraints(); ++i) {
    const auto& c = lp.constraint(i);
    double lhs = 0.0, scale = std::max(1.0, std::abs(c.rhs));
    for (const auto& [j, coeff] : c.terms) {
      lhs += coeff * x[j];
      scale = std::max(scale, std::abs(coeff));
    }
    double v = 0.0;
    switch (c.relation) {
      case LinearProgram::Relation::less_equal: v = lhs - c.rhs; break;
      case LinearProgram::Relation::greater_equal: v = c.rhs - lhs; break;
      case LinearProgram::Relation::equal: v = std::abs(lhs - c.rhs); break;
    }
    worst = std::max(worst, v / scale);
  }
  for (int j = 0; j < lp.num_variables(); ++j) {
    const double scale = std::max(
        {1.0, std::abs(lp.lower(j)), std::abs(lp.upper(j))});
    if (std::isfinite(lp.lower(j)))
      worst = std::max(worst, (lp.lower(j) - x[j]) / scale);
    if (std::isfinite(lp.upper(j)))
      worst = std::max(worst, (x[j] - lp.upper(j)) / scale);
  }
  return worst;
}

double objective_value(const LinearProgram& lp, std::span<const double> x) {
  double v = 0.0;
  for (int j = 0; j < lp.num_variables(); ++j) v += lp.objective()[j] * x[j];
  return v;
}

void write_mps(const LinearProgram& lp, std::ostream& os,
               const std::string& problem_name) {
  auto field = [](const std::string& s) {
    std::string f = s.substr(0, 8);
    f.resize(10, ' ');
    return f;
  };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%-12.6g", v);
    return std::string(buf);
  };
  os << "NAME          " << problem_name << "\n";
  if (lp.sense() == Sense::maximize) os << "OBJSENSE\n    MAX\n";
  os << "ROWS\n N  OBJ\n";
  auto row_name = [&](int i) {
    const auto& n = lp.constraint(i).name;
    return n.empty() ? "R" + std::to_string(i) : n;
  };
  for (int i = 0; i < lp.num_constraints(); ++i) {
    const char rel = lp.constraint(i).relation == Relation::less_equal ? 'L'
                     : lp.constraint(i).relation == Relation::equal    ? 'E'
                                                                       : 'G';
    os << " " << rel << "  " << row_name(i) << "\n";
  }
  os << "COLUMNS\n";
  for (int j = 0; j < lp.num_variables(); ++j) {
    const std::string vn = lp.variable_name(j).empty()
                               ? "X" + std::to_string(j)
                               : lp.variable_name(j);
    if (lp.objective()[j] != 0.0)
      os << "    " << field(vn) << field("OBJ") << num(lp.objective()[j])
         << "\n";
    for (int i = 0; i < lp.num_constraints(); ++i)
      for (const auto& [v, coeff] : lp.constraint(i).terms)
        if (v == j && coeff != 0.0)
          os << "    " << field(vn) << field(row_name(i)) << num(coeff) << "\n";
  }
  os << "RHS\n";
  for (int i = 0; i < lp.num_constraints(); ++i)
    if (lp.constraint(i).rhs != 0.0)
      os << "    " << field("RHS") << field(row_name(i))
         << num(lp.constraint(i).rhs) << "\n";
  os << "BOUNDS\n";
  for (int j = 0; j < lp.num_variables(); ++j) {
    const std::string vn = lp.variable_name(j).empty()
                               ? "X" + std::to_string(j)
                               : lp.variable_name(j);
    const double lo = lp.lower(j), hi = lp.upper(j);
    if (lo == 0.0 && hi == kInf) continue;  // MPS default
    if (lo == -kInf && hi == kInf) {
      os << " FR " << field("BND") << field(vn) << "\n";
      continue;
    }
    if (lo == -kInf)
      os << " MI " << field("BND") << field(vn) << "\n";
    else if (lo != 0.0)
      os << " LO " << field("BND") << field(vn) << num(lo) << "\n";
    if (hi != kInf) os << " UP " << field("BND") << field(vn) << num(hi) << "\n";
  }
  os << "ENDATA\n";
}

}  // namespace tollopt
