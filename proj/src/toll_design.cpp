#include "tollopt/toll_design.hpp"

#include <algorithm>
#include <cmath>

namespace tollopt {

const char* scheme_name(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::hom: return "hom";
    case SchemeKind::het: return "het";
    case SchemeKind::hom_sc: return "hom-sc";
    case SchemeKind::het_sc: return "het-sc";
  }
  return "?";
}

SchemeKind scheme_from_name(const std::string& name) {
  if (name == "hom") return SchemeKind::hom;
  if (name == "het") return SchemeKind::het;
  if (name == "hom-sc") return SchemeKind::hom_sc;
  if (name == "het-sc") return SchemeKind::het_sc;
  throw InputError("unknown scheme '" + name +
                   "' (expected hom, het, hom-sc, het-sc)");
}

bool scheme_is_heterogeneous(SchemeKind kind) {
  return kind == SchemeKind::het || kind == SchemeKind::het_sc;
}

bool scheme_has_support(SchemeKind kind) {
  return kind == SchemeKind::hom_sc || kind == SchemeKind::het_sc;
}

namespace {

using Rel = LinearProgram::Relation;

struct RouteConstants {
  double latency = 0.0;   // l_r(w_dagger)
  double gas_total = 0.0; // sum of gas costs along the route
};

std::vector<std::vector<RouteConstants>> route_constants(
    const Network& net, std::span<const double> w) {
  std::vector<std::vector<RouteConstants>> rc(net.num_od_pairs());
  const auto gas = net.gas();
  for (int k = 0; k < net.num_od_pairs(); ++k) {
    rc[k].reserve(net.routes(k).size());
    for (const Route& r : net.routes(k)) {
      RouteConstants c;
      c.latency = route_latency(net, w, r);
      for (int e : r) c.gas_total += gas[e];
      rc[k].push_back(c);
    }
  }
  return rc;
}

void check_inputs(const DesignInputs& in, SchemeKind kind) {
  if (!in.net || !in.demand || !in.vot)
    throw InputError("design inputs are missing network, demand, or types");
  if (in.lambda < 0) throw InputError("lambda must be nonnegative");
  if (static_cast<int>(in.w_dagger.size()) != in.net->num_edges())
    throw InputError("design inputs lack the optimal edge flows");
  if (scheme_is_heterogeneous(kind) && !in.f_dagger)
    throw InputError(
        "heterogeneous stages need the per-type optimal edge flows");
  if (!in.support.empty() &&
      static_cast<int>(in.support.size()) != in.net->num_edges())
    throw InputError("support set size does not match the edge count");
}

// Price variables in deterministic order: edge-major for hom, type-major
// then edge for het. Support-constrained schemes pin excluded edges to 0.
std::vector<int> add_price_vars(LinearProgram& lp, const DesignInputs& in,
                                SchemeKind kind) {
  const Network& net = *in.net;
  const int E = net.num_edges();
  const int I = in.vot->num_types();
  const bool het = scheme_is_heterogeneous(kind);
  const bool constrained = scheme_has_support(kind);
  auto upper = [&](int e) {
    if (!constrained) return kInf;
    const bool in_support = in.support.empty() ? net.edges()[e].tollable
                                               : in.support[e] != 0;
    return in_support ? kInf : 0.0;
  };
  std::vector<int> price;
  if (!het) {
    price.reserve(E);
    for (int e = 0; e < E; ++e)
      price.push_back(lp.add_variable("p_" + net.edges()[e].id, 0.0, upper(e)));
  } else {
    price.reserve(static_cast<std::size_t>(I) * E);
    for (int i = 0; i < I; ++i)
      for (int e = 0; e < E; ++e)
        price.push_back(lp.add_variable(
            "p_" + net.edges()[e].id + "_" + in.vot->labels()[i], 0.0,
            upper(e)));
  }
  return price;
}

std::vector<int> add_z_vars(LinearProgram& lp, const DesignInputs& in) {
  const int K = in.net->num_od_pairs();
  const int I = in.vot->num_types();
  std::vector<int> z(static_cast<std::size_t>(I) * K, -1);
  for (int i = 0; i < I; ++i)
    for (int k = 0; k < K; ++k)
      z[static_cast<std::size_t>(i) * K + k] = lp.add_variable(
          "z_" + in.vot->labels()[i] + "_" + std::to_string(k), -kInf, kInf);
  return z;
}

// z^{ik} - sum_{e in r} p_e(^i) <= theta^i l_r(w) + sum_{e in r} g_e,
// one row per (type, od, route), in that order.
void add_route_rows(LinearProgram& lp, const DesignInputs& in, SchemeKind kind,
                    const StageLp& vars,
                    const std::vector<std::vector<RouteConstants>>& rc) {
  const Network& net = *in.net;
  const int E = net.num_edges();
  const int K = net.num_od_pairs();
  const int I = in.vot->num_types();
  const bool het = scheme_is_heterogeneous(kind);
  for (int i = 0; i < I; ++i)
    for (int k = 0; k < K; ++k) {
      const auto& routes = net.routes(k);
      for (std::size_t r = 0; r < routes.size(); ++r) {
        std::vector<std::pair<int, double>> terms;
        terms.reserve(routes[r].size() + 1);
        terms.emplace_back(vars.z_vars[static_cast<std::size_t>(i) * K + k],
                           1.0);
        for (int e : routes[r]) {
          const int pv = het ? vars.price_vars[static_cast<std::size_t>(i) * E + e]
                             : vars.price_vars[e];
          terms.emplace_back(pv, -1.0);
        }
        lp.add_constraint(std::move(terms), Rel::less_equal,
                          in.vot->theta(i) * rc[k][r].latency +
                              rc[k][r].gas_total,
                          "route_" + std::to_string(i) + "_" +
                              std::to_string(k) + "_" + std::to_string(r));
      }
    }
}

// sum_{i,k} D^{ik} z^{ik} minus the toll revenue at the optimal flows:
// sum_e p_e w_e for hom, sum_{i,e} p_e^i f_e^i for het.
std::vector<std::pair<int, double>> cut_terms(const DesignInputs& in,
                                              SchemeKind kind,
                                              const StageLp& vars) {
  const int E = in.net->num_edges();
  const int K = in.net->num_od_pairs();
  const int I = in.vot->num_types();
  std::vector<std::pair<int, double>> terms;
  for (int i = 0; i < I; ++i)
    for (int k = 0; k < K; ++k) {
      const double d = in.demand->at(i, k);
      if (d != 0.0)
        terms.emplace_back(vars.z_vars[static_cast<std::size_t>(i) * K + k], d);
    }
  if (!scheme_is_heterogeneous(kind)) {
    for (int e = 0; e < E; ++e)
      if (in.w_dagger[e] != 0.0)
        terms.emplace_back(vars.price_vars[e], -in.w_dagger[e]);
  } else {
    for (int i = 0; i < I; ++i)
      for (int e = 0; e < E; ++e) {
        const double f = in.f_dagger->type_flow(i, e);
        if (f != 0.0)
          terms.emplace_back(
              vars.price_vars[static_cast<std::size_t>(i) * E + e], -f);
      }
  }
  return terms;
}

TollScheme extract_tolls(const DesignInputs& in, SchemeKind kind,
                         const StageLp& vars, const LpSolution& sol) {
  const Network& net = *in.net;
  const int E = net.num_edges();
  const int I = in.vot->num_types();
  std::vector<char> support(E, 1);
  if (scheme_has_support(kind))
    for (int e = 0; e < E; ++e)
      support[e] = in.support.empty() ? (net.edges()[e].tollable ? 1 : 0)
                                      : in.support[e];
  auto val = [&](int var) { return std::max(0.0, sol.x[var]); };
  if (!scheme_is_heterogeneous(kind)) {
    std::vector<double> p(E);
    for (int e = 0; e < E; ++e) p[e] = support[e] ? val(vars.price_vars[e]) : 0.0;
    return TollScheme::homogeneous(std::move(p), std::move(support));
  }
  std::vector<double> p(static_cast<std::size_t>(I) * E);
  for (int i = 0; i < I; ++i)
    for (int e = 0; e < E; ++e)
      p[static_cast<std::size_t>(i) * E + e] =
          support[e] ? val(vars.price_vars[static_cast<std::size_t>(i) * E + e])
                     : 0.0;
  return TollScheme::heterogeneous(E, I, std::move(p), std::move(support));
}

std::vector<double> extract_z(const StageLp& vars, const LpSolution& sol) {
  std::vector<double> z(vars.z_vars.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = sol.x[vars.z_vars[i]];
  return z;
}

}  // namespace

StageLp build_first_stage(const DesignInputs& in, SchemeKind kind) {
  check_inputs(in, kind);
  const auto rc = route_constants(*in.net, in.w_dagger);
  StageLp st;
  st.lp.set_objective_sense(LinearProgram::Sense::maximize);
  st.price_vars = add_price_vars(st.lp, in, kind);
  st.z_vars = add_z_vars(st.lp, in);
  for (const auto& [var, coeff] : cut_terms(in, kind, st))
    st.lp.set_objective_coeff(var, coeff);
  st.route_rows_begin = st.lp.num_constraints();
  add_route_rows(st.lp, in, kind, st, rc);
  return st;
}

StageLp build_second_stage(const DesignInputs& in, SchemeKind kind,
                           double t_star) {
  check_inputs(in, kind);
  const Network& net = *in.net;
  const int K = net.num_od_pairs();
  const int I = in.vot->num_types();
  const auto rc = route_constants(net, in.w_dagger);

  StageLp st;
  st.lp.set_objective_sense(LinearProgram::Sense::minimize);
  st.price_vars = add_price_vars(st.lp, in, kind);
  st.z_vars = add_z_vars(st.lp, in);
  // Disparity rows range over ordered type pairs; the identical pair gives
  // y >= 0, folded into the variable bound.
  st.y_var = st.lp.add_variable("y", 0.0, kInf);

  // Demand-weighted relative-cost coefficient of z^{ik} in the equity and
  // welfare terms; zero when the baseline is excluded.
  auto alpha = [&](int i, int k) {
    const std::size_t ik = static_cast<std::size_t>(i) * K + k;
    if (!in.baseline_included[ik]) return 0.0;
    return in.demand->at(i, k) /
           (in.vot->theta(i) * in.baseline_cost[ik]);
  };

  const double total = in.demand->total();
  st.lp.set_objective_coeff(st.y_var, 1.0);
  if (total > 0.0)
    for (int i = 0; i < I; ++i)
      for (int k = 0; k < K; ++k) {
        const double c = in.lambda / total * alpha(i, k);
        if (c != 0.0)
          st.lp.set_objective_coeff(
              st.z_vars[static_cast<std::size_t>(i) * K + k], c);
      }

  // Pairwise disparity rows: y >= (type i average) - (type i' average).
  for (int i = 0; i < I; ++i) {
    if (in.demand->type_total(i) <= 0.0) continue;
    for (int i2 = 0; i2 < I; ++i2) {
      if (i2 == i || in.demand->type_total(i2) <= 0.0) continue;
      std::vector<std::pair<int, double>> terms;
      terms.emplace_back(st.y_var, 1.0);
      const double di = in.demand->type_total(i);
      const double di2 = in.demand->type_total(i2);
      for (int k = 0; k < K; ++k) {
        const double a = alpha(i, k);
        if (a != 0.0)
          terms.emplace_back(st.z_vars[static_cast<std::size_t>(i) * K + k],
                             -a / di);
      }
      for (int k = 0; k < K; ++k) {
        const double a = alpha(i2, k);
        if (a != 0.0)
          terms.emplace_back(st.z_vars[static_cast<std::size_t>(i2) * K + k],
                             a / di2);
      }
      st.lp.add_constraint(std::move(terms), Rel::greater_equal, 0.0,
                           "disparity_" + std::to_string(i) + "_" +
                               std::to_string(i2));
    }
  }

  st.cut_row = st.lp.add_constraint(cut_terms(in, kind, st),
                                    Rel::greater_equal, t_star, "opt_cut");
  st.route_rows_begin = st.lp.num_constraints();
  add_route_rows(st.lp, in, kind, st, rc);
  return st;
}

FirstStageResult solve_first_stage(const DesignInputs& in, SchemeKind kind) {
  StageLp st = build_first_stage(in, kind);
  LpSolution sol = lp_solve(st.lp);
  if (sol.status != LpSolution::Status::optimal)
    throw LpError(std::string("first-stage LP for ") + scheme_name(kind) +
                  " is not optimal (status " +
                  (sol.status == LpSolution::Status::infeasible ? "infeasible"
                                                                : "unbounded") +
                  ")");
  FirstStageResult res;
  res.t_star = sol.objective;
  res.tolls = extract_tolls(in, kind, st, sol);
  res.z = extract_z(st, sol);
  res.lp_pivots = sol.pivots;
  return res;
}

SecondStageResult solve_second_stage(const DesignInputs& in, SchemeKind kind,
                                     double t_star) {
  StageLp st = build_second_stage(in, kind, t_star);
  LpSolution sol = lp_solve(st.lp);
  if (sol.status != LpSolution::Status::optimal)
    throw LpError(std::string("second-stage LP for ") + scheme_name(kind) +
                  " is not optimal; the first-stage optimum is inconsistent");
  SecondStageResult res;
  res.tolls = extract_tolls(in, kind, st, sol);
  res.z = extract_z(st, sol);
  res.y = sol.x[st.y_var];
  res.objective = sol.objective;
  res.lp_pivots = sol.pivots;
  return res;
}

FlowDecomposition solve_min_disparity_decomposition(
    const Network& net, const DemandMatrix& demand,
    std::span<const double> w_dagger) {
  const int K = net.num_od_pairs();
  const int I = demand.num_types();
  const auto rc = route_constants(net, w_dagger);

  LinearProgram lp;
  lp.set_objective_sense(LinearProgram::Sense::minimize);
  const int x_var = lp.add_variable("x", 0.0, kInf);
  lp.set_objective_coeff(x_var, 1.0);

  std::vector<std::vector<std::vector<int>>> q_vars(I);
  for (int i = 0; i < I; ++i) {
    q_vars[i].resize(K);
    for (int k = 0; k < K; ++k) {
      q_vars[i][k].resize(net.routes(k).size());
      for (std::size_t r = 0; r < net.routes(k).size(); ++r)
        q_vars[i][k][r] = lp.add_variable(
            "q_" + std::to_string(i) + "_" + std::to_string(k) + "_" +
                std::to_string(r),
            0.0, kInf);
    }
  }

  // x >= sum_{k,r} (q^{ik}_r - q^{i'k}_r) l_r(w_dagger) for every type pair.
  for (int i = 0; i < I; ++i)
    for (int i2 = 0; i2 < I; ++i2) {
      if (i2 == i) continue;
      std::vector<std::pair<int, double>> terms;
      terms.emplace_back(x_var, 1.0);
      for (int k = 0; k < K; ++k)
        for (std::size_t r = 0; r < net.routes(k).size(); ++r) {
          const double l = rc[k][r].latency;
          if (l == 0.0) continue;
          terms.emplace_back(q_vars[i][k][r], -l);
          terms.emplace_back(q_vars[i2][k][r], l);
        }
      lp.add_constraint(std::move(terms), Rel::greater_equal, 0.0,
                        "pair_" + std::to_string(i) + "_" +
                            std::to_string(i2));
    }

  for (int i = 0; i < I; ++i)
    for (int k = 0; k < K; ++k) {
      if (net.routes(k).empty()) {
        if (demand.at(i, k) > 0.0)
          throw InfeasibleDemandError("positive demand on od pair #" +
                                      std::to_string(k) + " with no route");
        continue;
      }
      std::vector<std::pair<int, double>> terms;
      for (int v : q_vars[i][k]) terms.emplace_back(v, 1.0);
      lp.add_constraint(std::move(terms), Rel::equal, demand.at(i, k),
                        "demand_" + std::to_string(i) + "_" +
                            std::to_string(k));
    }

  // Flow matching, relaxed so a solver-accurate w_dagger stays feasible.
  for (int e = 0; e < net.num_edges(); ++e) {
    std::vector<std::pair<int, double>> terms;
    for (int i = 0; i < I; ++i)
      for (int k = 0; k < K; ++k)
        for (std::size_t r = 0; r < net.routes(k).size(); ++r)
          for (int e2 : net.routes(k)[r])
            if (e2 == e) terms.emplace_back(q_vars[i][k][r], 1.0);
    const double slack = 1e-6 * std::max(1.0, w_dagger[e]);
    auto terms2 = terms;
    lp.add_constraint(std::move(terms), Rel::less_equal, w_dagger[e] + slack,
                      "flow_ub_" + net.edges()[e].id);
    lp.add_constraint(std::move(terms2), Rel::greater_equal,
                      std::max(0.0, w_dagger[e] - slack),
                      "flow_lb_" + net.edges()[e].id);
  }

  LpSolution sol = lp_solve(lp);
  if (sol.status != LpSolution::Status::optimal)
    throw LpError(
        "per-type flow decomposition LP is infeasible; the optimal flow "
        "input looks stale");

  FlowDecomposition out;
  out.q = StrategyDistribution::zeros(net, I);
  for (int i = 0; i < I; ++i)
    for (int k = 0; k < K; ++k)
      for (std::size_t r = 0; r < net.routes(k).size(); ++r)
        out.q.q[i][k][r] = std::max(0.0, sol.x[q_vars[i][k][r]]);
  out.flows = edge_flows(net, out.q);
  out.disparity = sol.objective;
  out.lp_pivots = sol.pivots;
  return out;
}

void compute_baselines(const Network& net, const DemandMatrix& demand,
                       const VotProfile& vot, std::span<const double> w,
                       std::vector<double>& baseline,
                       std::vector<char>& included) {
  const int K = net.num_od_pairs();
  const int I = vot.num_types();
  const TollScheme zero = TollScheme::zero(net.num_edges());
  baseline.assign(static_cast<std::size_t>(I) * K, 0.0);
  included.assign(static_cast<std::size_t>(I) * K, 0);
  for (int i = 0; i < I; ++i)
    for (int k = 0; k < K; ++k) {
      const std::size_t ik = static_cast<std::size_t>(i) * K + k;
      if (net.routes(k).empty()) continue;
      baseline[ik] = min_route_cost(net, w, zero, vot, i, k).cost;
      included[ik] = demand.at(i, k) > 0.0 && baseline[ik] > 0.0;
    }
}

DesignOutput design(SchemeKind kind, const Network& net,
                    const DemandMatrix& demand, const VotProfile& vot,
                    double lambda, std::vector<char> support,
                    double equilibrium_tol) {
  auto staged = [&](const char* stage, auto&& fn) {
    try {
      return fn();
    } catch (const LpError& e) {
      throw LpError(std::string(stage) + ": " + e.what());
    } catch (const ConvergenceError& e) {
      throw ConvergenceError(std::string(stage) + ": " + e.what(), e.last_gap);
    }
  };

  DesignOutput out;
  out.scheme = kind;
  out.lambda = lambda;

  SolverOptions opts;
  opts.tol = equilibrium_tol;
  const SocialOptimum social = staged("optimal-flows", [&] {
    return solve_social_optimum(net, demand, opts);
  });
  out.w_dagger = social.w;
  out.social_optimum_time = social.total_travel_time;

  DesignInputs in;
  in.net = &net;
  in.demand = &demand;
  in.vot = &vot;
  in.lambda = lambda;
  in.w_dagger = out.w_dagger;
  in.support = std::move(support);
  compute_baselines(net, demand, vot, in.w_dagger, in.baseline_cost,
                    in.baseline_included);
  out.baseline_cost = in.baseline_cost;
  out.baseline_included = in.baseline_included;
  for (std::size_t ik = 0; ik < in.baseline_cost.size(); ++ik) {
    const int i = static_cast<int>(ik) / net.num_od_pairs();
    const int k = static_cast<int>(ik) % net.num_od_pairs();
    if (demand.at(i, k) > 0.0 && !in.baseline_included[ik])
      out.degenerate_baselines.push_back(static_cast<int>(ik));
  }

  if (scheme_is_heterogeneous(kind)) {
    FlowDecomposition dec = staged("flow-decomposition", [&] {
      return solve_min_disparity_decomposition(net, demand, in.w_dagger);
    });
    out.flow_disparity = dec.disparity;
    in.f_dagger = std::move(dec.flows);
  }

  FirstStageResult first = staged("first-stage", [&] {
    return solve_first_stage(in, kind);
  });
  out.t_star = first.t_star;

  SecondStageResult second = staged("second-stage", [&] {
    return solve_second_stage(in, kind, first.t_star);
  });
  out.tolls = std::move(second.tolls);
  out.z = std::move(second.z);
  out.y = second.y;
  out.second_objective = second.objective;
  out.f_dagger = std::move(in.f_dagger);
  return out;
}

}  // namespace tollopt
