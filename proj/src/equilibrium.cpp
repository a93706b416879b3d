#include "tollopt/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tollopt/kernels.hpp"

namespace tollopt {

namespace {

constexpr double kLineSearchTol = 1e-12;

struct Workspace {
  std::vector<double> money;    // [i * E + e], (p + g)/theta; empty in social mode
  std::vector<double> dw;       // aggregate direction
  std::vector<double> df;       // per-type direction (equilibrium mode)
  std::vector<double> weights;  // social mode objective weights (may be empty)
};

std::vector<double> money_table(const Network& net, const TollScheme& tolls,
                                const VotProfile& vot) {
  const int E = net.num_edges();
  const int I = vot.num_types();
  const auto gas = net.gas();
  std::vector<double> money(static_cast<std::size_t>(I) * E);
  for (int i = 0; i < I; ++i)
    for (int e = 0; e < E; ++e)
      money[static_cast<std::size_t>(i) * E + e] =
          (tolls.price(e, i) + gas[e]) / vot.theta(i);
  return money;
}

double objective_value(const Network& net, const EdgeFlows& f,
                       const Workspace& ws, bool social) {
  const auto& kb = kernels::active();
  const int E = net.num_edges();
  if (social)
    return kb.bpr_total_travel_time(
        ws.weights.empty() ? nullptr : ws.weights.data(),
        net.free_flow().data(), net.slope().data(), f.aggregate.data(), E);
  double v = kb.bpr_latency_integral(net.free_flow().data(), net.slope().data(),
                                     f.aggregate.data(), E);
  for (int i = 0; i < f.num_types; ++i)
    v += kb.dot(ws.money.data() + static_cast<std::size_t>(i) * E,
                f.per_type.data() + static_cast<std::size_t>(i) * E, E);
  return v;
}

// Direction-finding edge costs at the current aggregate flow: latencies in
// equilibrium mode (the money term is added per type), marginal weights
// a + 5 b w^4 (optionally scaled) in social mode.
void base_edge_costs(const Network& net, const std::vector<double>& w,
                     bool social, const Workspace& ws, std::vector<double>& out) {
  const auto& kb = kernels::active();
  const int E = net.num_edges();
  out.resize(E);
  if (social)
    kb.bpr_marginal(ws.weights.empty() ? nullptr : ws.weights.data(),
                    net.free_flow().data(), net.slope().data(), w.data(),
                    out.data(), E);
  else
    kb.bpr_latency(net.free_flow().data(), net.slope().data(), w.data(),
                   out.data(), E);
}

struct IterationStats {
  double current_cost = 0.0;
  double best_response_cost = 0.0;
  double gap = 0.0;
};

// One sweep over (type, od): route costs, gap terms, and the all-or-nothing
// direction (y - q) accumulated into dw / df.
IterationStats direction_sweep(const Network& net, const DemandMatrix& D,
                               const StrategyDistribution& q, bool social,
                               Workspace& ws, const std::vector<double>& lat,
                               bool build_direction) {
  const int E = net.num_edges();
  const int I = D.num_types();
  IterationStats st;
  if (build_direction) {
    ws.dw.assign(E, 0.0);
    if (!social) ws.df.assign(static_cast<std::size_t>(I) * E, 0.0);
  }
  std::vector<double> cost_edges(E);
  for (int i = 0; i < I; ++i) {
    if (social) {
      cost_edges = lat;  // no type-specific money term
    } else {
      const double* mi = ws.money.data() + static_cast<std::size_t>(i) * E;
      for (int e = 0; e < E; ++e) cost_edges[e] = lat[e] + mi[e];
    }
    double* dfi = (build_direction && !social)
                      ? ws.df.data() + static_cast<std::size_t>(i) * E
                      : nullptr;
    for (int k = 0; k < net.num_od_pairs(); ++k) {
      const double demand = D.at(i, k);
      if (demand <= 0.0) continue;
      const auto& routes = net.routes(k);
      double best = std::numeric_limits<double>::infinity();
      int best_r = -1;
      for (std::size_t r = 0; r < routes.size(); ++r) {
        double c = 0.0;
        for (int e : routes[r]) c += cost_edges[e];
        if (c < best) {
          best = c;
          best_r = static_cast<int>(r);
        }
        st.current_cost += q.q[i][k][r] * c;
      }
      st.best_response_cost += demand * best;
      if (build_direction) {
        for (std::size_t r = 0; r < routes.size(); ++r) {
          const double v = q.q[i][k][r];
          if (v == 0.0) continue;
          for (int e : routes[r]) {
            ws.dw[e] -= v;
            if (dfi) dfi[e] -= v;
          }
        }
        for (int e : routes[best_r]) {
          ws.dw[e] += demand;
          if (dfi) dfi[e] += demand;
        }
      }
    }
  }
  st.gap = st.current_cost > 0.0
               ? std::max(0.0, (st.current_cost - st.best_response_cost) /
                                   st.current_cost)
               : 0.0;
  return st;
}

// Exact line search: the objective restricted to q + t (y - q) is convex with
// derivative g(t) nondecreasing; bisect the sign change of g on [0, 1].
double exact_step(const Network& net, const std::vector<double>& w,
                  const Workspace& ws, bool social, double money_slope) {
  const auto& kb = kernels::active();
  const int E = net.num_edges();
  const double* mult = ws.weights.empty() ? nullptr : ws.weights.data();
  auto deriv = [&](double t) {
    const double flow_term =
        social ? kb.bpr_marginal_dir(mult, net.free_flow().data(),
                                     net.slope().data(), w.data(),
                                     ws.dw.data(), t, E)
               : kb.bpr_latency_dir(net.free_flow().data(), net.slope().data(),
                                    w.data(), ws.dw.data(), t, E);
    return flow_term + money_slope;
  };
  if (deriv(1.0) <= 0.0) return 1.0;
  if (deriv(0.0) >= 0.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (hi - lo > kLineSearchTol) {
    const double mid = 0.5 * (lo + hi);
    (deriv(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// Trades route assignments between two types of the same OD pair at fixed
// aggregate flows whenever the money terms make the trade profitable. The
// potential is linear along such exchange directions, so the per-type swap
// passes cannot generate them and stall in a cross-type cycle without this.
void exchange_types(const Network& net, const DemandMatrix& D,
                    const Workspace& ws, StrategyDistribution& q) {
  const int E = net.num_edges();
  const int I = D.num_types();
  if (I < 2) return;
  for (int k = 0; k < net.num_od_pairs(); ++k) {
    const auto& routes = net.routes(k);
    if (routes.size() < 2) continue;
    for (int i = 0; i < I; ++i) {
      const double* mi = ws.money.data() + static_cast<std::size_t>(i) * E;
      for (int j = 0; j < I; ++j) {
        if (j == i) continue;
        const double* mj = ws.money.data() + static_cast<std::size_t>(j) * E;
        for (std::size_t r = 0; r < routes.size(); ++r)
          for (std::size_t r2 = 0; r2 < routes.size(); ++r2) {
            if (r2 == r) continue;
            // type i moves r -> r2 while type j moves r2 -> r
            double slope = 0.0;
            for (int e : routes[r2]) slope += mi[e] - mj[e];
            for (int e : routes[r]) slope += mj[e] - mi[e];
            if (slope >= -1e-16) continue;
            const double t = std::min(q.q[i][k][r], q.q[j][k][r2]);
            if (t <= 0.0) continue;
            q.q[i][k][r] -= t;
            q.q[i][k][r2] += t;
            q.q[j][k][r2] -= t;
            q.q[j][k][r] += t;
          }
      }
    }
  }
}

// One Gauss-Seidel pass of pairwise route swaps: per (type, od), shift flow
// from the costliest used route to the cheapest route with an exact line
// search. The all-or-nothing step alone stalls with a sublinear gap tail;
// the swap pass restores geometric convergence. Updates q and w in place.
// `reverse` flips the block order; alternating directions damps standing
// waves between coupled pairs.
void equilibrate_pairs(const Network& net, const DemandMatrix& D, bool social,
                       const Workspace& ws, StrategyDistribution& q,
                       std::vector<double>& w, double tol, bool reverse) {
  const int E = net.num_edges();
  const int I = D.num_types();
  const auto a = net.free_flow();
  const auto b = net.slope();
  auto edge_cost = [&](int e, double we) {
    const double w2 = we * we;
    if (!social) return a[e] + b[e] * (w2 * w2);
    const double v = a[e] + 5.0 * b[e] * (w2 * w2);
    return ws.weights.empty() ? v : ws.weights[e] * v;
  };

  std::vector<int> gain, lose;  // scratch: edges unique to each route
  const int K = net.num_od_pairs();
  for (int bi = 0; bi < I; ++bi) {
    const int i = reverse ? I - 1 - bi : bi;
    const double* money =
        social ? nullptr : ws.money.data() + static_cast<std::size_t>(i) * E;
    for (int bk = 0; bk < K; ++bk) {
      const int k = reverse ? K - 1 - bk : bk;
      if (D.at(i, k) <= 0.0) continue;
      const auto& routes = net.routes(k);
      if (routes.size() < 2) continue;

      // Equalize this pair to a fraction of the target gap; a fixed pass
      // count leaves residuals that neighboring pairs re-excite, and the
      // sweep then cycles above the tolerance.
      const double pair_tol = std::max(1e-15, 0.01 * tol);
      const int passes = 50 + 16 * static_cast<int>(routes.size());
      for (int pass = 0; pass < passes; ++pass) {
        double best = std::numeric_limits<double>::infinity();
        double worst = -std::numeric_limits<double>::infinity();
        int r_best = -1, r_worst = -1;
        for (std::size_t r = 0; r < routes.size(); ++r) {
          double c = 0.0;
          for (int e : routes[r])
            c += edge_cost(e, w[e]) + (money ? money[e] : 0.0);
          if (c < best) {
            best = c;
            r_best = static_cast<int>(r);
          }
          if (q.q[i][k][r] > 0.0 && c > worst) {
            worst = c;
            r_worst = static_cast<int>(r);
          }
        }
        if (r_best < 0 || r_worst < 0 || r_best == r_worst) break;
        if (worst - best <= pair_tol * std::max(1.0, worst)) break;

        gain.clear();
        lose.clear();
        for (int e : routes[r_best]) {
          bool shared = false;
          for (int e2 : routes[r_worst]) shared |= e2 == e;
          if (!shared) gain.push_back(e);
        }
        for (int e : routes[r_worst]) {
          bool shared = false;
          for (int e2 : routes[r_best]) shared |= e2 == e;
          if (!shared) lose.push_back(e);
        }
        double money_slope = 0.0;
        if (money) {
          for (int e : gain) money_slope += money[e];
          for (int e : lose) money_slope -= money[e];
        }
        auto deriv = [&](double t) {
          double v = money_slope;
          for (int e : gain) v += edge_cost(e, w[e] + t);
          for (int e : lose) v -= edge_cost(e, w[e] - t);
          return v;
        };
        const double cap = q.q[i][k][r_worst];
        double t = cap;
        if (deriv(0.0) >= 0.0) break;
        if (deriv(cap) > 0.0) {
          double lo = 0.0, hi = cap;
          while (hi - lo > 1e-12 * std::max(1.0, cap)) {
            const double mid = 0.5 * (lo + hi);
            (deriv(mid) > 0.0 ? hi : lo) = mid;
          }
          t = 0.5 * (lo + hi);
        }
        q.q[i][k][r_worst] -= t;
        q.q[i][k][r_best] += t;
        for (int e : gain) w[e] += t;
        for (int e : lose) w[e] -= t;
      }
    }
  }
}

StrategyDistribution initial_assignment(const Network& net,
                                        const DemandMatrix& D,
                                        SolverOptions::Init init) {
  const int I = D.num_types();
  StrategyDistribution q = StrategyDistribution::zeros(net, I);
  for (int i = 0; i < I; ++i)
    for (int k = 0; k < net.num_od_pairs(); ++k) {
      const double demand = D.at(i, k);
      if (demand <= 0.0) continue;
      const auto& routes = net.routes(k);
      if (routes.empty())
        throw InfeasibleDemandError(
            "positive demand on od pair #" + std::to_string(k) +
            " which has no route");
      switch (init) {
        case SolverOptions::Init::first_route:
          q.q[i][k].front() = demand;
          break;
        case SolverOptions::Init::last_route:
          q.q[i][k].back() = demand;
          break;
        case SolverOptions::Init::spread: {
          const double share = demand / static_cast<double>(routes.size());
          std::fill(q.q[i][k].begin(), q.q[i][k].end(), share);
          break;
        }
      }
    }
  return q;
}

struct SolveOutput {
  StrategyDistribution q;
  EdgeFlows flows;
  double objective = 0.0;
  double gap = 0.0;
  long iterations = 0;
  std::vector<double> trace;
};

// Sweeps late in an iteration can strand flows on routes whose cost sits
// above the pair minimum by more than the tolerance. Move each such flow
// toward the cheapest route with an exact line search (so the potential
// never increases: the route is either emptied or cost-equalized). Returns
// true when any offending route moved.
bool purge_misaligned(const Network& net, const DemandMatrix& D, bool social,
                      const Workspace& ws, StrategyDistribution& q,
                      std::vector<double> w, double tol) {
  const int E = net.num_edges();
  const auto a = net.free_flow();
  const auto b = net.slope();
  auto edge_cost = [&](int e, double we) {
    const double w2 = we * we;
    if (!social) return a[e] + b[e] * (w2 * w2);
    const double v = a[e] + 5.0 * b[e] * (w2 * w2);
    return ws.weights.empty() ? v : ws.weights[e] * v;
  };
  bool moved = false;
  std::vector<int> gain, lose;
  for (int i = 0; i < D.num_types(); ++i) {
    const double* money =
        social ? nullptr : ws.money.data() + static_cast<std::size_t>(i) * E;
    for (int k = 0; k < net.num_od_pairs(); ++k) {
      if (D.at(i, k) <= 0.0) continue;
      const auto& routes = net.routes(k);
      if (routes.size() < 2) continue;
      for (std::size_t r = 0; r < routes.size(); ++r) {
        if (q.q[i][k][r] <= 0.0) continue;
        double best = std::numeric_limits<double>::infinity();
        int best_r = -1;
        for (std::size_t r2 = 0; r2 < routes.size(); ++r2) {
          double c = 0.0;
          for (int e : routes[r2])
            c += edge_cost(e, w[e]) + (money ? money[e] : 0.0);
          if (c < best) {
            best = c;
            best_r = static_cast<int>(r2);
          }
        }
        if (best_r == static_cast<int>(r)) continue;
        double cr = 0.0;
        for (int e : routes[r])
          cr += edge_cost(e, w[e]) + (money ? money[e] : 0.0);
        if (cr - best <= tol * std::max(1.0, best)) continue;

        gain.clear();
        lose.clear();
        for (int e : routes[best_r]) {
          bool shared = false;
          for (int e2 : routes[r]) shared |= e2 == e;
          if (!shared) gain.push_back(e);
        }
        for (int e : routes[r]) {
          bool shared = false;
          for (int e2 : routes[best_r]) shared |= e2 == e;
          if (!shared) lose.push_back(e);
        }
        double money_slope = 0.0;
        if (money) {
          for (int e : gain) money_slope += money[e];
          for (int e : lose) money_slope -= money[e];
        }
        auto deriv = [&](double t) {
          double v = money_slope;
          for (int e : gain) v += edge_cost(e, w[e] + t);
          for (int e : lose) v -= edge_cost(e, w[e] - t);
          return v;
        };
        const double cap = q.q[i][k][r];
        double t = cap;
        if (deriv(0.0) >= 0.0) continue;
        if (deriv(cap) > 0.0) {
          double lo = 0.0, hi = cap;
          while (hi - lo > 1e-12 * std::max(1.0, cap)) {
            const double mid = 0.5 * (lo + hi);
            (deriv(mid) > 0.0 ? hi : lo) = mid;
          }
          t = 0.5 * (lo + hi);
        }
        q.q[i][k][r] -= t;
        q.q[i][k][best_r] += t;
        for (int e : gain) w[e] += t;
        for (int e : lose) w[e] -= t;
        moved = true;
      }
    }
  }
  return moved;
}

SolveOutput run_solver(const Network& net, const DemandMatrix& D, bool social,
                       Workspace ws, const SolverOptions& opts) {
  if (opts.tol <= 0.0) throw InputError("solver tolerance must be > 0");
  const int I = D.num_types();

  SolveOutput out;
  out.q = initial_assignment(net, D, opts.init);
  std::vector<double> lat;

  // The all-or-nothing direction is a polytope vertex, so near the optimum
  // even the exact-line-search step perturbs already-equalized pairs by
  // O(step * demand) and the iteration cycles; it is only taken while the
  // gap is coarse, after which the swap passes contract on their own.
  constexpr double kAonGapFloor = 1e-4;
  int purge_rounds = 0;

  for (long iter = 0;; ++iter) {
    out.flows = edge_flows(net, out.q);
    if (opts.record_objective)
      out.trace.push_back(objective_value(net, out.flows, ws, social));
    base_edge_costs(net, out.flows.aggregate, social, ws, lat);
    const bool take_aon_step = iter == 0 || out.gap > kAonGapFloor;
    IterationStats st = direction_sweep(net, D, out.q, social, ws, lat,
                                        /*build=*/take_aon_step);
    out.gap = st.gap;
    out.iterations = iter;
    if (st.gap <= opts.tol) {
      // Converged by the certificate; clear any stranded off-minimum flows
      // and re-measure. At most a handful of rounds are ever needed.
      if (purge_rounds < 8 &&
          purge_misaligned(net, D, social, ws, out.q, out.flows.aggregate,
                           opts.tol)) {
        ++purge_rounds;
        continue;
      }
      break;
    }
    if (iter >= opts.max_iterations)
      throw ConvergenceError(
          "equilibrium solver did not reach tolerance " +
              std::to_string(opts.tol) + " within " +
              std::to_string(opts.max_iterations) + " iterations (gap " +
              std::to_string(st.gap) + ")",
          st.gap);

    std::vector<double> w = out.flows.aggregate;
    if (take_aon_step && st.gap > kAonGapFloor) {
      double money_slope = 0.0;
      if (!social) {
        const auto& kb = kernels::active();
        money_slope = kb.dot(ws.money.data(), ws.df.data(),
                             static_cast<std::size_t>(I) * net.num_edges());
      }
      const double t =
          exact_step(net, out.flows.aggregate, ws, social, money_slope);
      if (t > 0.0) {
        for (int i = 0; i < I; ++i)
          for (int k = 0; k < net.num_od_pairs(); ++k) {
            const double demand = D.at(i, k);
            if (demand <= 0.0) continue;
            const auto& routes = net.routes(k);
            // Recover this pair's all-or-nothing route from the edge costs
            // used in the sweep; cheaper to recompute than to store.
            double best = std::numeric_limits<double>::infinity();
            int best_r = -1;
            for (std::size_t r = 0; r < routes.size(); ++r) {
              double c = 0.0;
              if (social) {
                for (int e : routes[r]) c += lat[e];
              } else {
                const double* mi =
                    ws.money.data() +
                    static_cast<std::size_t>(i) * net.num_edges();
                for (int e : routes[r]) c += lat[e] + mi[e];
              }
              if (c < best) {
                best = c;
                best_r = static_cast<int>(r);
              }
            }
            for (double& v : out.q.q[i][k]) v *= (1.0 - t);
            out.q.q[i][k][best_r] += t * demand;
          }
        kernels::active().axpy(t, ws.dw.data(), w.data(), net.num_edges());
      }
    }
    equilibrate_pairs(net, D, social, ws, out.q, w, opts.tol,
                      /*reverse=*/false);
    if (!social) {
      exchange_types(net, D, ws, out.q);
      equilibrate_pairs(net, D, social, ws, out.q, w, opts.tol,
                        /*reverse=*/true);
    }
  }

  out.objective = objective_value(net, out.flows, ws, social);
  return out;
}

}  // namespace

double potential_value(const Network& net, const StrategyDistribution& q,
                       const TollScheme& tolls, const VotProfile& vot) {
  Workspace ws;
  ws.money = money_table(net, tolls, vot);
  const EdgeFlows f = edge_flows(net, q);
  return objective_value(net, f, ws, /*social=*/false);
}

double equilibrium_gap(const Network& net, const StrategyDistribution& q,
                       const TollScheme& tolls, const VotProfile& vot) {
  const int I = static_cast<int>(q.q.size());
  DemandMatrix D(I, net.num_od_pairs());
  for (int i = 0; i < I; ++i)
    for (int k = 0; k < net.num_od_pairs(); ++k) {
      double s = 0.0;
      for (double v : q.q[i][k]) s += v;
      D.set(i, k, s);
    }
  Workspace ws;
  ws.money = money_table(net, tolls, vot);
  const EdgeFlows f = edge_flows(net, q);
  std::vector<double> lat;
  base_edge_costs(net, f.aggregate, /*social=*/false, ws, lat);
  return direction_sweep(net, D, q, /*social=*/false, ws, lat,
                         /*build=*/false)
      .gap;
}

EquilibriumResult solve_equilibrium(const Network& net, const DemandMatrix& D,
                                    const VotProfile& vot,
                                    const TollScheme& tolls,
                                    const SolverOptions& opts) {
  if (D.num_ods() != net.num_od_pairs() || D.num_types() != vot.num_types())
    throw InputError("demand matrix shape does not match network/types");
  Workspace ws;
  ws.money = money_table(net, tolls, vot);
  SolveOutput out = run_solver(net, D, /*social=*/false, std::move(ws), opts);
  EquilibriumResult res;
  res.q = std::move(out.q);
  res.flows = std::move(out.flows);
  res.potential = out.objective;
  res.gap = out.gap;
  res.iterations = out.iterations;
  res.objective_trace = std::move(out.trace);
  return res;
}

SocialOptimum solve_social_optimum(const Network& net, const DemandMatrix& D,
                                   const SolverOptions& opts,
                                   std::span<const double> edge_weights) {
  if (D.num_ods() != net.num_od_pairs())
    throw InputError("demand matrix shape does not match the network");
  Workspace ws;
  if (!edge_weights.empty()) {
    if (static_cast<int>(edge_weights.size()) != net.num_edges())
      throw InputError("edge weight vector size mismatch");
    ws.weights.assign(edge_weights.begin(), edge_weights.end());
  }
  SolveOutput out = run_solver(net, D, /*social=*/true, std::move(ws), opts);
  SocialOptimum res;
  res.w = out.flows.aggregate;
  res.q_any = std::move(out.q);
  res.flows = std::move(out.flows);
  res.total_travel_time = total_travel_time(net, res.w);
  res.gap = out.gap;
  res.iterations = out.iterations;
  res.objective_trace = std::move(out.trace);
  return res;
}

RouteCost min_route_cost(const Network& net, std::span<const double> w,
                         const TollScheme& tolls, const VotProfile& vot,
                         int type, int od) {
  const auto& routes = net.routes(od);
  if (routes.empty())
    throw InputError("od pair #" + std::to_string(od) + " has no route");
  RouteCost best;
  best.cost = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < routes.size(); ++r) {
    const double c = route_cost(net, w, routes[r], type, vot, tolls);
    if (c < best.cost) {
      best.cost = c;
      best.route = static_cast<int>(r);
    }
  }
  return best;
}

double total_travel_time(const Network& net, std::span<const double> w) {
  return kernels::active().bpr_total_travel_time(
      nullptr, net.free_flow().data(), net.slope().data(), w.data(),
      net.num_edges());
}

}  // namespace tollopt
