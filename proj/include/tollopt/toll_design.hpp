#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tollopt/equilibrium.hpp"
#include "tollopt/lp.hpp"
#include "tollopt/network.hpp"

namespace tollopt {

// The four pricing scheme classes: uniform vs type-differentiated prices,
// with or without a toll support constraint.
enum class SchemeKind { hom, het, hom_sc, het_sc };

const char* scheme_name(SchemeKind kind);
SchemeKind scheme_from_name(const std::string& name);
bool scheme_is_heterogeneous(SchemeKind kind);
bool scheme_has_support(SchemeKind kind);

// Everything the two stages consume. `baseline_cost` holds the zero-toll
// costs c(0) at the optimal flows; entries with `baseline_included` unset
// (zero demand, or a degenerate zero baseline) are dropped from the
// equity/welfare terms.
struct DesignInputs {
  const Network* net = nullptr;
  const DemandMatrix* demand = nullptr;
  const VotProfile* vot = nullptr;
  double lambda = 20.0;
  std::vector<double> w_dagger;
  std::vector<double> baseline_cost;     // [type * K + od], hours-equivalent
  std::vector<char> baseline_included;   // [type * K + od]
  std::optional<EdgeFlows> f_dagger;     // per-type optimal flows (het stages)
  std::vector<char> support;             // tollable set; empty = every edge
};

// A built stage LP plus its variable map, exposed so tests can inspect
// constraint structure and re-check feasibility independently.
struct StageLp {
  LinearProgram lp;
  std::vector<int> price_vars;  // [e] for hom, [type * E + e] for het
  std::vector<int> z_vars;      // [type * K + od]
  int y_var = -1;               // second stage only
  int cut_row = -1;             // second stage only
  int route_rows_begin = 0;     // first route-cost row index
};

StageLp build_first_stage(const DesignInputs& in, SchemeKind kind);
StageLp build_second_stage(const DesignInputs& in, SchemeKind kind,
                           double t_star);

struct FirstStageResult {
  double t_star = 0.0;
  TollScheme tolls = TollScheme::zero(0);  // one optimal price vector
  std::vector<double> z;
  long lp_pivots = 0;
};

struct SecondStageResult {
  TollScheme tolls = TollScheme::zero(0);
  std::vector<double> z;
  double y = 0.0;
  double objective = 0.0;
  long lp_pivots = 0;
};

// Stage 1: the congestion-optimal toll characterization; its optimum T*
// pins the optimality cut of stage 2.
FirstStageResult solve_first_stage(const DesignInputs& in, SchemeKind kind);

// Stage 2: picks the equity-welfare optimal prices among the stage-1 optima
// (for the support-constrained classes, a heuristic relaxation around
// T*_sc; the induced flows may then differ from the optimum).
SecondStageResult solve_second_stage(const DesignInputs& in, SchemeKind kind,
                                     double t_star);

// Splits the optimal aggregate flows into per-type route flows minimizing
// the largest pairwise travel-time disparity between types; the induced
// per-type edge flows feed the heterogeneous stages. The flow-matching
// equalities are relaxed to +-1e-6 * max(1, w_e).
struct FlowDecomposition {
  StrategyDistribution q;
  EdgeFlows flows;
  double disparity = 0.0;
  long lp_pivots = 0;
};

FlowDecomposition solve_min_disparity_decomposition(
    const Network& net, const DemandMatrix& demand,
    std::span<const double> w_dagger);

struct DesignOutput {
  SchemeKind scheme = SchemeKind::hom;
  double lambda = 20.0;
  TollScheme tolls = TollScheme::zero(0);
  double t_star = 0.0;
  double second_objective = 0.0;
  double y = 0.0;
  std::vector<double> z;
  std::vector<double> w_dagger;
  double social_optimum_time = 0.0;       // S(w_dagger), flow-hours
  std::optional<EdgeFlows> f_dagger;
  double flow_disparity = 0.0;            // decomposition optimum (het)
  std::vector<double> baseline_cost;
  std::vector<char> baseline_included;
  std::vector<int> degenerate_baselines;  // (type * K + od) with c(0) = 0
};

// Full pipeline: optimal flows, baselines, per-type decomposition when the
// scheme is heterogeneous, then both stages. Stage failures are rethrown
// with a stage label. `support` overrides the edges' tollable flags for the
// support-constrained schemes; ignored otherwise.
DesignOutput design(SchemeKind kind, const Network& net,
                    const DemandMatrix& demand, const VotProfile& vot,
                    double lambda = 20.0, std::vector<char> support = {},
                    double equilibrium_tol = 1e-7);

// Baseline zero-toll costs at flows w; `included` marks entries with
// positive demand and a positive baseline.
void compute_baselines(const Network& net, const DemandMatrix& demand,
                       const VotProfile& vot, std::span<const double> w,
                       std::vector<double>& baseline,
                       std::vector<char>& included);

}  // namespace tollopt
