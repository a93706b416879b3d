#pragma once

#include <span>
#include <vector>

#include "tollopt/network.hpp"

namespace tollopt {

struct SolverOptions {
  double tol = 1e-7;          // relative gap at which the solve stops
  long max_iterations = 100000;
  // Initial assignment per (type, od): all demand on one route.
  enum class Init { first_route, last_route, spread } init = Init::first_route;
  // When set, the potential (resp. objective) value of every iterate is
  // recorded; used by descent-monotonicity checks.
  bool record_objective = false;
};

struct EquilibriumResult {
  StrategyDistribution q;
  EdgeFlows flows;
  double potential = 0.0;
  double gap = 0.0;
  long iterations = 0;
  std::vector<double> objective_trace;
};

struct SocialOptimum {
  std::vector<double> w;       // unique aggregate optimal edge flows (b > 0)
  StrategyDistribution q_any;  // one inducing strategy distribution
  EdgeFlows flows;
  double total_travel_time = 0.0;  // S = sum_e w_e l_e(w_e), flow-hours
  double gap = 0.0;
  long iterations = 0;
  std::vector<double> objective_trace;
};

// Potential whose minimizers over feasible route flows are the equilibria:
// sum_e [a w + b w^5 / 5] + sum_{i,e} (p_e^i + g_e) / theta^i * f_e^i.
double potential_value(const Network& net, const StrategyDistribution& q,
                       const TollScheme& tolls, const VotProfile& vot);

// Relative equilibrium gap certificate of a feasible q:
//   [sum q_r c_r - sum_{i,k} D^{ik} min_r c_r] / sum q_r c_r,
// zero (and only then) when q is an exact equilibrium. Zero total cost is
// reported as gap 0.
double equilibrium_gap(const Network& net, const StrategyDistribution& q,
                       const TollScheme& tolls, const VotProfile& vot);

// Convex-combinations (Frank-Wolfe) solve of the potential minimization:
// all-or-nothing direction per (type, od) and exact line search on the
// degree-5 segment polynomial. Throws InfeasibleDemandError when demand is
// positive on a route-less OD pair and ConvergenceError past the cap.
EquilibriumResult solve_equilibrium(const Network& net, const DemandMatrix& D,
                                    const VotProfile& vot,
                                    const TollScheme& tolls,
                                    const SolverOptions& opts = {});

// Minimizes total travel time sum_e w l(w) over feasible flows; direction
// finding uses the marginal edge weight a + 5 b w^4. `edge_weights`, when
// nonempty, scales each edge's objective term (weighted variant).
SocialOptimum solve_social_optimum(const Network& net, const DemandMatrix& D,
                                   const SolverOptions& opts = {},
                                   std::span<const double> edge_weights = {});

struct RouteCost {
  double cost = 0.0;  // hours-equivalent
  int route = -1;     // lowest-index minimizer
};

// min_r l_r(w) + (1/theta^i) sum_{e in r} (p_e^i + g_e) over routes of od k.
RouteCost min_route_cost(const Network& net, std::span<const double> w,
                         const TollScheme& tolls, const VotProfile& vot,
                         int type, int od);

// Total travel time sum_e w_e l_e(w_e) of an aggregate flow vector.
double total_travel_time(const Network& net, std::span<const double> w);

}  // namespace tollopt
