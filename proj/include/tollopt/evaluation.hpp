#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tollopt/network.hpp"
#include "tollopt/toll_design.hpp"

namespace tollopt {

// Maximum pairwise disparity across types of the demand-weighted relative
// cost change versus the zero-toll baseline. `included` masks (type, od)
// terms out of the sums (zero demand or degenerate baseline); types with no
// included demand are excluded from the max.
double equity_metric(std::span<const double> costs,
                     std::span<const double> baseline,
                     std::span<const char> included, const DemandMatrix& D);

// Demand-weighted average of the relative cost change; 1 under zero tolls.
double welfare_metric(std::span<const double> costs,
                      std::span<const double> baseline,
                      std::span<const char> included, const DemandMatrix& D);

// sum_e sum_i p_e^i f_e^i, dollars per period.
double revenue(const EdgeFlows& flows, const TollScheme& tolls);

// Fraction of each type's demand whose cost (minutes) meets or exceeds each
// threshold; types with zero demand are omitted.
struct ThresholdTable {
  std::vector<int> types;
  std::vector<double> thresholds_min;
  std::vector<std::vector<double>> fraction;  // [type row][threshold]
};

ThresholdTable threshold_table(std::span<const double> costs_min,
                               const DemandMatrix& D,
                               std::span<const double> thresholds_min);

// Price of anarchy: zero-toll equilibrium travel time over the optimum;
// defined as 1 on zero-demand instances.
double poa(const Network& net, const DemandMatrix& D, const VotProfile& vot,
           double tol = 1e-7);

// Metrics are computed in one of two contexts: design-time (costs at the
// optimal flows the tolls were built for) or realized (costs at the
// re-solved equilibrium under the tolls).
enum class MetricsContext { design_time, realized };

struct MetricsReport {
  MetricsContext context = MetricsContext::design_time;
  double avg_travel_time_min = 0.0;
  std::vector<double> per_type_avg_cost_min;
  double equity = 0.0;
  double welfare = 0.0;
  double planner_objective = 0.0;  // equity + lambda * welfare
  double lambda = 0.0;
  double revenue_dollars = 0.0;
  double total_travel_time_hours = 0.0;
  double price_of_anarchy = 1.0;
  double realized_gap = 0.0;  // realized context only
  ThresholdTable thresholds;
  std::vector<double> costs;     // per (type, od), hours-equivalent
  std::vector<double> baseline;  // zero-toll costs in the same context flows
  std::vector<char> included;
};

inline const std::vector<double> kDefaultThresholdsMin = {60, 90, 120, 150};

// `w_design` supplies the flows for the design-time context (typically the
// optimal flows); ignored in the realized context, which re-solves the
// equilibrium under `tolls`.
MetricsReport compute_metrics(
    const Network& net, const DemandMatrix& D, const VotProfile& vot,
    const TollScheme& tolls, double lambda, MetricsContext context,
    std::span<const double> w_design = {},
    std::span<const double> thresholds_min = kDefaultThresholdsMin,
    double tol = 1e-7);

// Realized-context metrics at externally supplied flows (e.g. re-ingested
// solver output) instead of a fresh equilibrium solve.
MetricsReport compute_metrics_at(
    const Network& net, const DemandMatrix& D, const VotProfile& vot,
    const TollScheme& tolls, double lambda, const EdgeFlows& flows,
    std::span<const double> thresholds_min = kDefaultThresholdsMin,
    double tol = 1e-7);

struct ParetoPoint {
  int sample = -1;
  SchemeKind scheme = SchemeKind::hom;
  std::vector<double> gamma;
  std::vector<double> w;  // optimum of the weighted time objective
  TollScheme tolls = TollScheme::zero(0);
  double avg_time_min = 0.0;
  double equity = 0.0;
  bool dominated = false;
  bool failed = false;
  std::string note;
};

// Appendix-style Pareto sweep: N per-edge weight vectors gamma drawn from
// the seeded counter generator (gamma of sample s, edge e uses counter
// s * |E| + e), each solved for its weighted-time optimal flows, priced with
// both the hom and het pipelines, and evaluated at design-time metrics. The
// dominance filter runs separately per scheme over the successful points.
std::vector<ParetoPoint> pareto_front(const Network& net,
                                      const DemandMatrix& D,
                                      const VotProfile& vot, double lambda,
                                      int samples, std::uint64_t seed,
                                      double tol = 1e-7);

// One sample with explicit weights; building block of pareto_front.
ParetoPoint pareto_sample(const Network& net, const DemandMatrix& D,
                          const VotProfile& vot, double lambda,
                          std::span<const double> gamma, SchemeKind scheme,
                          int sample_index, double tol = 1e-7);

// Exact O(N^2) filter: A dominates B iff A <= B in both coordinates and
// A < B in one; equal points are kept undominated. Failed points are
// ignored. Operates within each scheme group independently.
void flag_dominated(std::vector<ParetoPoint>& points);

}  // namespace tollopt
