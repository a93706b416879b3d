#include "tollopt/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "tollopt/equilibrium.hpp"
#include "tollopt/rng.hpp"

namespace tollopt {

namespace {

// Demand-weighted mean relative cost change of one type; false when the
// type has no included demand.
bool type_average_ratio(int i, std::span<const double> costs,
                        std::span<const double> baseline,
                        std::span<const char> included, const DemandMatrix& D,
                        double* out) {
  const int K = D.num_ods();
  double weight = 0.0, acc = 0.0;
  for (int k = 0; k < K; ++k) {
    const std::size_t ik = static_cast<std::size_t>(i) * K + k;
    if (!included[ik]) continue;
    const double d = D.at(i, k);
    if (d <= 0.0) continue;
    acc += d * (costs[ik] / baseline[ik]);
    weight += d;
  }
  if (weight <= 0.0) return false;
  *out = acc / weight;
  return true;
}

}  // namespace

double equity_metric(std::span<const double> costs,
                     std::span<const double> baseline,
                     std::span<const char> included, const DemandMatrix& D) {
  std::vector<double> ratios;
  for (int i = 0; i < D.num_types(); ++i) {
    double r;
    if (type_average_ratio(i, costs, baseline, included, D, &r))
      ratios.push_back(r);
  }
  double worst = 0.0;
  for (std::size_t a = 0; a < ratios.size(); ++a)
    for (std::size_t b = a + 1; b < ratios.size(); ++b)
      worst = std::max(worst, std::abs(ratios[a] - ratios[b]));
  return worst;
}

double welfare_metric(std::span<const double> costs,
                      std::span<const double> baseline,
                      std::span<const char> included, const DemandMatrix& D) {
  const int K = D.num_ods();
  double weight = 0.0, acc = 0.0;
  for (int i = 0; i < D.num_types(); ++i)
    for (int k = 0; k < K; ++k) {
      const std::size_t ik = static_cast<std::size_t>(i) * K + k;
      if (!included[ik]) continue;
      const double d = D.at(i, k);
      if (d <= 0.0) continue;
      acc += d * (costs[ik] / baseline[ik]);
      weight += d;
    }
  return weight > 0.0 ? acc / weight : 1.0;
}

double revenue(const EdgeFlows& flows, const TollScheme& tolls) {
  double total = 0.0;
  for (int i = 0; i < flows.num_types; ++i)
    for (int e = 0; e < flows.num_edges; ++e)
      total += tolls.price(e, i) * flows.type_flow(i, e);
  return total;
}

ThresholdTable threshold_table(std::span<const double> costs_min,
                               const DemandMatrix& D,
                               std::span<const double> thresholds_min) {
  ThresholdTable tab;
  tab.thresholds_min.assign(thresholds_min.begin(), thresholds_min.end());
  const int K = D.num_ods();
  for (int i = 0; i < D.num_types(); ++i) {
    const double total = D.type_total(i);
    if (total <= 0.0) continue;
    std::vector<double> row;
    row.reserve(thresholds_min.size());
    for (double tau : thresholds_min) {
      double hit = 0.0;
      for (int k = 0; k < K; ++k)
        if (costs_min[static_cast<std::size_t>(i) * K + k] >= tau)
          hit += D.at(i, k);
      row.push_back(hit / total);
    }
    tab.types.push_back(i);
    tab.fraction.push_back(std::move(row));
  }
  return tab;
}

double poa(const Network& net, const DemandMatrix& D, const VotProfile& vot,
           double tol) {
  SolverOptions opts;
  opts.tol = tol;
  const SocialOptimum opt = solve_social_optimum(net, D, opts);
  if (opt.total_travel_time <= 0.0) return 1.0;
  const EquilibriumResult eq =
      solve_equilibrium(net, D, vot, TollScheme::zero(net.num_edges()), opts);
  return total_travel_time(net, eq.flows.aggregate) / opt.total_travel_time;
}

namespace {

MetricsReport metrics_from_flows(const Network& net, const DemandMatrix& D,
                                 const VotProfile& vot, const TollScheme& tolls,
                                 double lambda, MetricsContext context,
                                 std::span<const double> w,
                                 const EdgeFlows* flows,
                                 std::span<const double> thresholds_min) {
  MetricsReport rep;
  rep.context = context;
  rep.lambda = lambda;

  const int K = net.num_od_pairs();
  const int I = vot.num_types();
  rep.costs.assign(static_cast<std::size_t>(I) * K, 0.0);
  rep.baseline.assign(static_cast<std::size_t>(I) * K, 0.0);
  rep.included.assign(static_cast<std::size_t>(I) * K, 0);
  const TollScheme zero = TollScheme::zero(net.num_edges());
  for (int i = 0; i < I; ++i)
    for (int k = 0; k < K; ++k) {
      const std::size_t ik = static_cast<std::size_t>(i) * K + k;
      if (net.routes(k).empty()) continue;
      rep.costs[ik] = min_route_cost(net, w, tolls, vot, i, k).cost;
      rep.baseline[ik] = min_route_cost(net, w, zero, vot, i, k).cost;
      rep.included[ik] = D.at(i, k) > 0.0 && rep.baseline[ik] > 0.0;
    }

  rep.total_travel_time_hours = total_travel_time(net, w);
  const double total_demand = D.total();
  rep.avg_travel_time_min =
      total_demand > 0.0 ? 60.0 * rep.total_travel_time_hours / total_demand
                         : 0.0;

  rep.per_type_avg_cost_min.assign(I, 0.0);
  for (int i = 0; i < I; ++i) {
    const double di = D.type_total(i);
    if (di <= 0.0) continue;
    double acc = 0.0;
    for (int k = 0; k < K; ++k)
      acc += D.at(i, k) * rep.costs[static_cast<std::size_t>(i) * K + k];
    rep.per_type_avg_cost_min[i] = 60.0 * acc / di;
  }

  rep.equity = equity_metric(rep.costs, rep.baseline, rep.included, D);
  rep.welfare = welfare_metric(rep.costs, rep.baseline, rep.included, D);
  rep.planner_objective = rep.equity + lambda * rep.welfare;
  // Revenue needs per-type flows; at design time only the aggregate is
  // pinned, so it is reported in the realized context.
  if (flows) rep.revenue_dollars = revenue(*flows, tolls);

  std::vector<double> costs_min(rep.costs.size());
  for (std::size_t ik = 0; ik < rep.costs.size(); ++ik)
    costs_min[ik] = 60.0 * rep.costs[ik];
  rep.thresholds = threshold_table(costs_min, D, thresholds_min);
  return rep;
}

}  // namespace

MetricsReport compute_metrics(const Network& net, const DemandMatrix& D,
                              const VotProfile& vot, const TollScheme& tolls,
                              double lambda, MetricsContext context,
                              std::span<const double> w_design,
                              std::span<const double> thresholds_min,
                              double tol) {
  if (context == MetricsContext::realized) {
    SolverOptions opts;
    opts.tol = tol;
    EquilibriumResult eq = solve_equilibrium(net, D, vot, tolls, opts);
    MetricsReport rep =
        metrics_from_flows(net, D, vot, tolls, lambda, context,
                           eq.flows.aggregate, &eq.flows, thresholds_min);
    rep.realized_gap = eq.gap;
    rep.price_of_anarchy = poa(net, D, vot, tol);
    return rep;
  }
  if (static_cast<int>(w_design.size()) != net.num_edges())
    throw InputError("design-time metrics need the design flow vector");
  MetricsReport rep = metrics_from_flows(net, D, vot, tolls, lambda, context,
                                         w_design, nullptr, thresholds_min);
  rep.price_of_anarchy = poa(net, D, vot, tol);
  return rep;
}

MetricsReport compute_metrics_at(const Network& net, const DemandMatrix& D,
                                 const VotProfile& vot, const TollScheme& tolls,
                                 double lambda, const EdgeFlows& flows,
                                 std::span<const double> thresholds_min,
                                 double tol) {
  MetricsReport rep =
      metrics_from_flows(net, D, vot, tolls, lambda, MetricsContext::realized,
                         flows.aggregate, &flows, thresholds_min);
  rep.price_of_anarchy = poa(net, D, vot, tol);
  return rep;
}

ParetoPoint pareto_sample(const Network& net, const DemandMatrix& D,
                          const VotProfile& vot, double lambda,
                          std::span<const double> gamma, SchemeKind scheme,
                          int sample_index, double tol) {
  ParetoPoint pt;
  pt.sample = sample_index;
  pt.scheme = scheme;
  pt.gamma.assign(gamma.begin(), gamma.end());

  SolverOptions opts;
  opts.tol = tol;
  const SocialOptimum weighted = solve_social_optimum(net, D, opts, gamma);
  pt.w = weighted.w;

  DesignInputs in;
  in.net = &net;
  in.demand = &D;
  in.vot = &vot;
  in.lambda = lambda;
  in.w_dagger = pt.w;
  compute_baselines(net, D, vot, in.w_dagger, in.baseline_cost,
                    in.baseline_included);
  if (scheme_is_heterogeneous(scheme))
    in.f_dagger = solve_min_disparity_decomposition(net, D, in.w_dagger).flows;

  const FirstStageResult first = solve_first_stage(in, scheme);
  const SecondStageResult second = solve_second_stage(in, scheme, first.t_star);
  pt.tolls = second.tolls;

  const double total_demand = D.total();
  pt.avg_time_min = total_demand > 0.0
                        ? 60.0 * total_travel_time(net, pt.w) / total_demand
                        : 0.0;

  const int K = net.num_od_pairs();
  const int I = vot.num_types();
  std::vector<double> costs(static_cast<std::size_t>(I) * K, 0.0);
  for (int i = 0; i < I; ++i)
    for (int k = 0; k < K; ++k) {
      if (net.routes(k).empty()) continue;
      costs[static_cast<std::size_t>(i) * K + k] =
          min_route_cost(net, pt.w, pt.tolls, vot, i, k).cost;
    }
  pt.equity = equity_metric(costs, in.baseline_cost, in.baseline_included, D);
  return pt;
}

std::vector<ParetoPoint> pareto_front(const Network& net,
                                      const DemandMatrix& D,
                                      const VotProfile& vot, double lambda,
                                      int samples, std::uint64_t seed,
                                      double tol) {
  if (samples < 1) throw InputError("pareto sweep needs at least one sample");
  const int E = net.num_edges();
  std::vector<ParetoPoint> points;
  points.reserve(2 * static_cast<std::size_t>(samples));
  for (int s = 0; s < samples; ++s) {
    std::vector<double> gamma(E);
    for (int e = 0; e < E; ++e)
      gamma[e] = counter_uniform(
          seed, static_cast<std::uint64_t>(s) * E + static_cast<std::uint64_t>(e));
    for (SchemeKind scheme : {SchemeKind::hom, SchemeKind::het}) {
      try {
        points.push_back(
            pareto_sample(net, D, vot, lambda, gamma, scheme, s, tol));
      } catch (const std::exception& ex) {
        ParetoPoint fail;
        fail.sample = s;
        fail.scheme = scheme;
        fail.gamma = gamma;
        fail.failed = true;
        fail.note = ex.what();
        points.push_back(std::move(fail));
      }
    }
  }
  flag_dominated(points);
  return points;
}

void flag_dominated(std::vector<ParetoPoint>& points) {
  for (ParetoPoint& p : points) p.dominated = false;
  for (std::size_t a = 0; a < points.size(); ++a) {
    if (points[a].failed) continue;
    for (std::size_t b = 0; b < points.size(); ++b) {
      if (a == b || points[b].failed ||
          points[a].scheme != points[b].scheme)
        continue;
      const bool le = points[b].avg_time_min <= points[a].avg_time_min &&
                      points[b].equity <= points[a].equity;
      const bool lt = points[b].avg_time_min < points[a].avg_time_min ||
                      points[b].equity < points[a].equity;
      if (le && lt) {
        points[a].dominated = true;
        break;
      }
    }
  }
}

}  // namespace tollopt
