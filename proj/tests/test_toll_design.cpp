#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tollopt/equilibrium.hpp"
#include "tollopt/toll_design.hpp"

using namespace tollopt;
using tollopt::testutil::two_route_network;

namespace {

const VotProfile kOneType({"t"}, {10.0});
const VotProfile kTwoTypes({"hi", "lo"}, {60.0, 10.0});

DesignInputs make_inputs(const Network& net, const DemandMatrix& D,
                         const VotProfile& vot, double lambda = 20.0,
                         std::vector<char> support = {}) {
  DesignInputs in;
  in.net = &net;
  in.demand = &D;
  in.vot = &vot;
  in.lambda = lambda;
  SolverOptions opts;
  opts.tol = 1e-9;
  in.w_dagger = solve_social_optimum(net, D, opts).w;
  in.support = std::move(support);
  compute_baselines(net, D, vot, in.w_dagger, in.baseline_cost,
                    in.baseline_included);
  return in;
}

void attach_decomposition(DesignInputs& in) {
  in.f_dagger =
      solve_min_disparity_decomposition(*in.net, *in.demand, in.w_dagger)
          .flows;
}

Network single_edge_network(double a, double b, double gas) {
  std::vector<Edge> edges;
  edges.push_back({"e", 0, 1, a, b, gas, true});
  return Network::build({"o", "d"}, std::move(edges), {{0, 1}});
}

// Largest route-row slack violation of "z = theta * min cost" tightness:
// for each (i,k) with demand, at least one route constraint must bind.
double worst_active_route_slack(const DesignInputs& in, SchemeKind kind,
                                const TollScheme& p,
                                const std::vector<double>& z) {
  const Network& net = *in.net;
  const int K = net.num_od_pairs();
  double worst = 0.0;
  for (int i = 0; i < in.vot->num_types(); ++i)
    for (int k = 0; k < K; ++k) {
      if (in.demand->at(i, k) <= 0.0) continue;
      const double c =
          min_route_cost(net, in.w_dagger, p, *in.vot, i, k).cost;
      worst = std::max(
          worst, std::abs(z[static_cast<std::size_t>(i) * K + k] -
                          in.vot->theta(i) * c));
    }
  (void)kind;
  return worst;
}

double cut_value(const DesignInputs& in, SchemeKind kind, const TollScheme& p,
                 const std::vector<double>& z) {
  const Network& net = *in.net;
  const int K = net.num_od_pairs();
  double v = 0.0;
  for (int i = 0; i < in.vot->num_types(); ++i)
    for (int k = 0; k < K; ++k)
      v += in.demand->at(i, k) * z[static_cast<std::size_t>(i) * K + k];
  if (!scheme_is_heterogeneous(kind)) {
    for (int e = 0; e < net.num_edges(); ++e)
      v -= p.price(e, 0) * in.w_dagger[e];
  } else {
    for (int i = 0; i < in.vot->num_types(); ++i)
      for (int e = 0; e < net.num_edges(); ++e)
        v -= p.price(e, i) * in.f_dagger->type_flow(i, e);
  }
  return v;
}

}  // namespace

TEST_CASE("first stage on a single-route network") {
  const Network net = single_edge_network(1.0, 0.5, 2.0);
  DemandMatrix D(2, 1);
  D.set(0, 0, 1.5);
  D.set(1, 0, 0.5);
  DesignInputs in = make_inputs(net, D, kTwoTypes);
  const double w = 2.0;
  const double latency = 1.0 + 0.5 * w * w * w * w;

  SUBCASE("hom value is demand-weighted full cost") {
    const FirstStageResult fs = solve_first_stage(in, SchemeKind::hom);
    const double expected = 1.5 * (60.0 * latency + 2.0) +
                            0.5 * (10.0 * latency + 2.0);
    CHECK(fs.t_star == doctest::Approx(expected).epsilon(1e-9));
  }
  SUBCASE("het value coincides on a single route") {
    attach_decomposition(in);
    const FirstStageResult fs = solve_first_stage(in, SchemeKind::het);
    const double expected = 1.5 * (60.0 * latency + 2.0) +
                            0.5 * (10.0 * latency + 2.0);
    CHECK(fs.t_star == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("zero demand collapses the first stage") {
  const Network net = two_route_network(1.0, 2.0, 1.0, 1.0);
  const DemandMatrix D(1, 1);
  DesignInputs in = make_inputs(net, D, kOneType);
  const FirstStageResult fs = solve_first_stage(in, SchemeKind::hom);
  CHECK(fs.t_star == doctest::Approx(0.0).epsilon(1e-12));
  for (int e = 0; e < net.num_edges(); ++e)
    CHECK(fs.tolls.price(e, 0) == 0.0);
}

TEST_CASE("first stage agrees with the vertex-enumeration oracle") {
  SUBCASE("hom, single type: 3-variable LP") {
    const Network net = two_route_network(1.0, 2.0, 1.0, 1.0, 0.5, 0.0);
    const DemandMatrix D = testutil::single_demand(net, 1, 0, 2.0);
    DesignInputs in = make_inputs(net, D, kOneType);
    const StageLp st = build_first_stage(in, SchemeKind::hom);
    REQUIRE(st.lp.num_variables() == 3);
    const auto oracle = oracles::vertex_enumeration(st.lp);
    REQUIRE(oracle.feasible);
    const FirstStageResult fs = solve_first_stage(in, SchemeKind::hom);
    CHECK(fs.t_star == doctest::Approx(oracle.objective).epsilon(1e-8));
  }
  SUBCASE("het, two types: 6-variable LP") {
    const Network net = two_route_network(1.0, 1.6, 0.8, 0.8, 0.0, 1.0);
    DemandMatrix D(2, 1);
    D.set(0, 0, 1.0);
    D.set(1, 0, 1.4);
    DesignInputs in = make_inputs(net, D, kTwoTypes);
    attach_decomposition(in);
    const StageLp st = build_first_stage(in, SchemeKind::het);
    REQUIRE(st.lp.num_variables() == 6);
    const auto oracle = oracles::vertex_enumeration(st.lp);
    REQUIRE(oracle.feasible);
    const FirstStageResult fs = solve_first_stage(in, SchemeKind::het);
    CHECK(fs.t_star == doctest::Approx(oracle.objective).epsilon(1e-8));
  }
}

TEST_CASE("per-type flow decomposition") {
  SUBCASE("one type has zero disparity") {
    const Network net = two_route_network(1.0, 2.0, 1.0, 1.0);
    const DemandMatrix D = testutil::single_demand(net, 1, 0, 2.0);
    DesignInputs in = make_inputs(net, D, kOneType);
    const FlowDecomposition dec =
        solve_min_disparity_decomposition(net, D, in.w_dagger);
    CHECK(dec.disparity == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("symmetric two types reach zero disparity") {
    // Identical routes make every feasible split disparity-free; the LP
    // must find 0 and reproduce the optimal aggregate flows.
    const Network net = two_route_network(1.0, 1.0, 1.0, 1.0);
    DemandMatrix D(2, 1);
    D.set(0, 0, 1.0);
    D.set(1, 0, 1.0);
    DesignInputs in = make_inputs(net, D, kTwoTypes);
    const FlowDecomposition dec =
        solve_min_disparity_decomposition(net, D, in.w_dagger);
    CHECK(dec.disparity == doctest::Approx(0.0).epsilon(1e-8));
    // flow rows are deliberately relaxed by 1e-6 * max(1, w)
    for (int e = 0; e < net.num_edges(); ++e)
      CHECK(std::abs(dec.flows.aggregate[e] - in.w_dagger[e]) <=
            1.01e-6 * std::max(1.0, in.w_dagger[e]));
  }
  SUBCASE("generic instance matches the LP oracle") {
    const Network net = two_route_network(1.0, 1.7, 0.9, 0.4);
    DemandMatrix D(2, 1);
    D.set(0, 0, 1.2);
    D.set(1, 0, 0.8);
    DesignInputs in = make_inputs(net, D, kTwoTypes);
    // Rebuild the same LP here and hand it to the oracle.
    const FlowDecomposition dec =
        solve_min_disparity_decomposition(net, D, in.w_dagger);
    // Oracle over the 5-variable LP (x + four route flows).
    LinearProgram lp;
    const int x = lp.add_variable("x", 0.0, kInf);
    lp.set_objective_coeff(x, 1.0);
    int q[2][2];
    for (int i = 0; i < 2; ++i)
      for (int r = 0; r < 2; ++r) q[i][r] = lp.add_variable("q", 0.0, kInf);
    const double l0 = route_latency(net, in.w_dagger, net.routes(0)[0]);
    const double l1 = route_latency(net, in.w_dagger, net.routes(0)[1]);
    for (int i = 0; i < 2; ++i) {
      const int j = 1 - i;
      lp.add_constraint({{x, 1.0},
                         {q[i][0], -l0},
                         {q[i][1], -l1},
                         {q[j][0], l0},
                         {q[j][1], l1}},
                        LinearProgram::Relation::greater_equal, 0.0);
    }
    lp.add_constraint({{q[0][0], 1.0}, {q[0][1], 1.0}},
                      LinearProgram::Relation::equal, 1.2);
    lp.add_constraint({{q[1][0], 1.0}, {q[1][1], 1.0}},
                      LinearProgram::Relation::equal, 0.8);
    for (int e = 0; e < 2; ++e) {
      const double slack = 1e-6 * std::max(1.0, in.w_dagger[e]);
      lp.add_constraint({{q[0][e], 1.0}, {q[1][e], 1.0}},
                        LinearProgram::Relation::less_equal,
                        in.w_dagger[e] + slack);
      lp.add_constraint({{q[0][e], 1.0}, {q[1][e], 1.0}},
                        LinearProgram::Relation::greater_equal,
                        std::max(0.0, in.w_dagger[e] - slack));
    }
    const auto oracle = oracles::vertex_enumeration(lp);
    REQUIRE(oracle.feasible);
    CHECK(dec.disparity == doctest::Approx(oracle.objective).epsilon(1e-8));
  }
}

TEST_CASE("second stage semantics") {
  SUBCASE("single route forces zero tolls") {
    const Network net = single_edge_network(1.0, 0.5, 0.0);
    const DemandMatrix D = testutil::single_demand(net, 1, 0, 2.0);
    DesignInputs in = make_inputs(net, D, kOneType);
    const FirstStageResult fs = solve_first_stage(in, SchemeKind::hom);
    const SecondStageResult ss =
        solve_second_stage(in, SchemeKind::hom, fs.t_star);
    CHECK(ss.tolls.price(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(ss.y == doctest::Approx(0.0));
  }
  SUBCASE("one type keeps y at zero") {
    const Network net = two_route_network(1.0, 2.0, 1.0, 1.0);
    const DemandMatrix D = testutil::single_demand(net, 1, 0, 2.0);
    DesignInputs in = make_inputs(net, D, kOneType);
    const FirstStageResult fs = solve_first_stage(in, SchemeKind::hom);
    const SecondStageResult ss =
        solve_second_stage(in, SchemeKind::hom, fs.t_star);
    CHECK(ss.y == doctest::Approx(0.0));
  }
  SUBCASE("cut binds and active routes are tight") {
    const Network net = two_route_network(1.0, 1.5, 0.7, 0.7, 0.3, 0.0);
    DemandMatrix D(2, 1);
    D.set(0, 0, 1.1);
    D.set(1, 0, 0.9);
    for (SchemeKind kind : {SchemeKind::hom, SchemeKind::het}) {
      DesignInputs in = make_inputs(net, D, kTwoTypes);
      if (scheme_is_heterogeneous(kind)) attach_decomposition(in);
      const FirstStageResult fs = solve_first_stage(in, kind);
      const SecondStageResult ss = solve_second_stage(in, kind, fs.t_star);
      CHECK(std::abs(cut_value(in, kind, ss.tolls, ss.z) - fs.t_star) <=
            1e-6 * std::max(1.0, std::abs(fs.t_star)));
      CHECK(worst_active_route_slack(in, kind, ss.tolls, ss.z) <= 1e-6);
    }
  }
}

TEST_CASE("designed tolls implement the optimal flows") {
  const Network net = two_route_network(1.0, 1.6, 0.8, 0.5, 0.4, 0.0);
  DemandMatrix D(2, 1);
  D.set(0, 0, 1.3);
  D.set(1, 0, 1.0);
  SolverOptions tight;
  tight.tol = 1e-9;
  for (SchemeKind kind : {SchemeKind::hom, SchemeKind::het}) {
    const DesignOutput out = design(kind, net, D, kTwoTypes, 20.0, {}, 1e-9);
    const EquilibriumResult eq =
        solve_equilibrium(net, D, kTwoTypes, out.tolls, tight);
    const double S = total_travel_time(net, eq.flows.aggregate);
    CHECK(S <= 1.001 * out.social_optimum_time);
    double max_w = 1.0;
    for (double v : out.w_dagger) max_w = std::max(max_w, v);
    for (int e = 0; e < net.num_edges(); ++e)
      CHECK(std::abs(eq.flows.aggregate[e] - out.w_dagger[e]) <=
            1e-3 * max_w);
  }
}

TEST_CASE("marginal-cost prices pass the first-best check") {
  const Network net = two_route_network(1.0, 1.8, 0.9, 0.6);
  const DemandMatrix D = testutil::single_demand(net, 1, 0, 2.0);
  const VotProfile unit({"t"}, {1.0});
  SolverOptions tight;
  tight.tol = 1e-9;
  const SocialOptimum so = solve_social_optimum(net, D, tight);
  std::vector<double> p(net.num_edges());
  for (int e = 0; e < net.num_edges(); ++e) {
    const double w = so.w[e];
    p[e] = 4.0 * net.slope()[e] * w * w * w * w;  // theta = 1
  }
  const EquilibriumResult eq = solve_equilibrium(
      net, D, unit, TollScheme::homogeneous(std::move(p)), tight);
  CHECK(total_travel_time(net, eq.flows.aggregate) <=
        1.001 * so.total_travel_time);
}

TEST_CASE("support-constrained schemes") {
  const Network net = two_route_network(1.0, 1.5, 0.7, 0.7, 0.2, 0.0);
  DemandMatrix D(2, 1);
  D.set(0, 0, 1.1);
  D.set(1, 0, 0.9);

  SUBCASE("full support reproduces the unconstrained scheme") {
    DesignInputs in = make_inputs(net, D, kTwoTypes, 20.0, {1, 1});
    const FirstStageResult hom = solve_first_stage(in, SchemeKind::hom);
    const FirstStageResult homsc = solve_first_stage(in, SchemeKind::hom_sc);
    CHECK(homsc.t_star == doctest::Approx(hom.t_star).epsilon(1e-7));
    const SecondStageResult s1 =
        solve_second_stage(in, SchemeKind::hom, hom.t_star);
    const SecondStageResult s2 =
        solve_second_stage(in, SchemeKind::hom_sc, homsc.t_star);
    CHECK(s2.objective == doctest::Approx(s1.objective).epsilon(1e-7));

    attach_decomposition(in);
    const FirstStageResult het = solve_first_stage(in, SchemeKind::het);
    const FirstStageResult hetsc = solve_first_stage(in, SchemeKind::het_sc);
    CHECK(hetsc.t_star == doctest::Approx(het.t_star).epsilon(1e-7));
  }

  SUBCASE("empty support pins every toll to zero") {
    DesignInputs in = make_inputs(net, D, kTwoTypes, 20.0, {0, 0});
    const FirstStageResult fs = solve_first_stage(in, SchemeKind::hom_sc);
    const SecondStageResult ss =
        solve_second_stage(in, SchemeKind::hom_sc, fs.t_star);
    for (int e = 0; e < net.num_edges(); ++e)
      CHECK(ss.tolls.price(e, 0) == 0.0);
    attach_decomposition(in);
    const FirstStageResult fh = solve_first_stage(in, SchemeKind::het_sc);
    const SecondStageResult sh =
        solve_second_stage(in, SchemeKind::het_sc, fh.t_star);
    for (int i = 0; i < 2; ++i)
      for (int e = 0; e < net.num_edges(); ++e)
        CHECK(sh.tolls.price(e, i) == 0.0);
  }

  SUBCASE("restricted support orders T* and keeps the lower bound") {
    DesignInputs in = make_inputs(net, D, kTwoTypes, 20.0, {1, 0});
    const FirstStageResult hom = solve_first_stage(in, SchemeKind::hom);
    const FirstStageResult homsc = solve_first_stage(in, SchemeKind::hom_sc);
    CHECK(homsc.t_star <=
          hom.t_star + 1e-8 * std::max(1.0, std::abs(hom.t_star)));
    const SecondStageResult ss =
        solve_second_stage(in, SchemeKind::hom_sc, homsc.t_star);
    CHECK(ss.tolls.price(1, 0) == 0.0);  // outside the support

    SolverOptions tight;
    tight.tol = 1e-9;
    const SocialOptimum so = solve_social_optimum(net, D, tight);
    const EquilibriumResult eq =
        solve_equilibrium(net, D, kTwoTypes, ss.tolls, tight);
    CHECK(total_travel_time(net, eq.flows.aggregate) >=
          so.total_travel_time * (1.0 - 1e-6));
  }

  SUBCASE("het-sc second stage is feasible at its own constraints") {
    DesignInputs in = make_inputs(net, D, kTwoTypes, 20.0, {1, 0});
    attach_decomposition(in);
    const FirstStageResult fs = solve_first_stage(in, SchemeKind::het_sc);
    const StageLp st = build_second_stage(in, SchemeKind::het_sc, fs.t_star);
    const LpSolution sol = lp_solve(st.lp);
    REQUIRE(sol.status == LpSolution::Status::optimal);
    CHECK(max_constraint_violation(st.lp, sol.x) <= 1e-7);
  }
}

TEST_CASE("full pipeline orchestration") {
  SUBCASE("hom on a single-route network returns zero tolls") {
    const Network net = single_edge_network(1.0, 0.5, 1.0);
    const DemandMatrix D = testutil::single_demand(net, 1, 0, 2.0);
    const DesignOutput out = design(SchemeKind::hom, net, D, kOneType);
    CHECK(out.tolls.price(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("het with one type matches hom's objective") {
    const Network net = two_route_network(1.0, 1.8, 0.9, 0.6, 0.3, 0.0);
    const DemandMatrix D = testutil::single_demand(net, 1, 0, 2.0);
    const DesignOutput hom = design(SchemeKind::hom, net, D, kOneType);
    const DesignOutput het = design(SchemeKind::het, net, D, kOneType);
    // T* coincides up to the decomposition's relaxed flow band (1e-6/edge);
    // the second-stage optimum cancels that shift exactly.
    CHECK(het.t_star == doctest::Approx(hom.t_star).epsilon(1e-6));
    CHECK(het.second_objective ==
          doctest::Approx(hom.second_objective).epsilon(1e-7));
  }
  SUBCASE("class ordering under tollable flags") {
    std::vector<Edge> edges;
    edges.push_back({"bridge", 0, 1, 1.0, 0.7, 0.2, true});
    edges.push_back({"back", 0, 1, 1.5, 0.7, 0.0, false});
    const Network net =
        Network::build({"o", "d"}, std::move(edges), {{0, 1}});
    DemandMatrix D(2, 1);
    D.set(0, 0, 1.1);
    D.set(1, 0, 0.9);
    const DesignOutput hom = design(SchemeKind::hom, net, D, kTwoTypes);
    const DesignOutput homsc = design(SchemeKind::hom_sc, net, D, kTwoTypes);
    CHECK(homsc.t_star <=
          hom.t_star + 1e-8 * std::max(1.0, std::abs(hom.t_star)));
    CHECK(homsc.tolls.price(1, 0) == 0.0);
    const DesignOutput het = design(SchemeKind::het, net, D, kTwoTypes);
    const DesignOutput hetsc = design(SchemeKind::het_sc, net, D, kTwoTypes);
    CHECK(hetsc.t_star <=
          het.t_star + 1e-8 * std::max(1.0, std::abs(het.t_star)));
  }
}

TEST_CASE("stage failures carry a stage label") {
  std::vector<Edge> edges;
  edges.push_back({"e", 0, 1, 1.0, 1.0, 0.0, true});
  const Network net =
      Network::build({"a", "b", "c"}, std::move(edges), {{1, 2}});
  DemandMatrix D(1, 1);
  D.set(0, 0, 1.0);
  CHECK_THROWS_AS(design(SchemeKind::hom, net, D, kOneType),
                  InfeasibleDemandError);
}
