#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tollopt/network.hpp"
#include "tollopt/rng.hpp"

namespace tollopt::testutil {

// Deterministic uniform stream independent of the standard library
// distributions, so frozen expected values stay valid everywhere.
class Uniform {
 public:
  explicit Uniform(std::uint64_t seed) : seed_(seed) {}
  double next() { return counter_uniform(seed_, counter_++); }
  double next(double lo, double hi) { return lo + (hi - lo) * next(); }
  int next_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next() * (hi - lo + 1));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Two parallel edges between one OD pair; the workhorse fixture.
inline Network two_route_network(double a1, double a2, double b1, double b2,
                                 double g1 = 0.0, double g2 = 0.0) {
  std::vector<Edge> edges;
  edges.push_back({"e1", 0, 1, a1, b1, g1, true});
  edges.push_back({"e2", 0, 1, a2, b2, g2, true});
  return Network::build({"o", "d"}, std::move(edges), {{0, 1}});
}

inline DemandMatrix single_demand(const Network& net, int types, int od,
                                  double amount) {
  DemandMatrix d(types, net.num_od_pairs());
  for (int i = 0; i < types; ++i) d.set(i, od, amount / types);
  return d;
}

struct RandomInstance {
  Network net = Network::build({"o", "d"}, {{"e", 0, 1, 1, 1, 0, true}},
                               {{0, 1}});
  VotProfile vot{{"t0"}, {10.0}};
  DemandMatrix demand{1, 1};
};

struct RandomInstanceOptions {
  int max_nodes = 5;
  int max_edges = 8;
  int max_types = 3;
  bool with_gas = true;
  int max_hops = 4;
};

// Small random routing-game instance: strictly increasing latencies
// (b > 0), every OD pair routable, every demand entry positive.
inline RandomInstance random_instance(std::uint64_t seed,
                                      RandomInstanceOptions opt = {}) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    Uniform u(seed * 1000003ULL + attempt);
    const int n = u.next_int(2, opt.max_nodes);
    const int m = u.next_int(2, opt.max_edges);
    std::vector<Edge> edges;
    for (int e = 0; e < m; ++e) {
      Edge edge;
      edge.id = "e" + std::to_string(e);
      edge.tail = u.next_int(0, n - 1);
      do {
        edge.head = u.next_int(0, n - 1);
      } while (edge.head == edge.tail);
      edge.free_flow_hours = u.next(0.1, 2.0);
      edge.congestion_slope = u.next(0.05, 1.0);
      edge.gas_cost = (opt.with_gas && u.next() < 0.5) ? u.next(0.0, 3.0) : 0.0;
      edge.tollable = true;
      edges.push_back(std::move(edge));
    }
    std::vector<std::string> nodes;
    for (int i = 0; i < n; ++i) nodes.push_back("n" + std::to_string(i));

    const int want_ods = u.next_int(1, 3);
    std::vector<OdPair> ods;
    for (int tries = 0; tries < 20 && static_cast<int>(ods.size()) < want_ods;
         ++tries) {
      OdPair od;
      od.origin = u.next_int(0, n - 1);
      do {
        od.destination = u.next_int(0, n - 1);
      } while (od.destination == od.origin);
      bool dup = false;
      for (const OdPair& existing : ods)
        dup |= existing.origin == od.origin &&
               existing.destination == od.destination;
      if (dup) continue;
      if (enumerate_routes(edges, n, od.origin, od.destination, opt.max_hops)
              .empty())
        continue;
      ods.push_back(od);
    }
    if (ods.empty()) continue;

    RandomInstance inst;
    inst.net = Network::build(std::move(nodes), std::move(edges),
                              std::move(ods), {}, opt.max_hops);

    const int types = u.next_int(1, opt.max_types);
    const double thetas[3] = {70.0, 30.0, 10.0};
    std::vector<std::string> labels;
    std::vector<double> theta;
    for (int i = 0; i < types; ++i) {
      labels.push_back("t" + std::to_string(i));
      theta.push_back(thetas[i] * u.next(0.8, 1.2));
    }
    inst.vot = VotProfile(std::move(labels), std::move(theta));

    inst.demand = DemandMatrix(types, inst.net.num_od_pairs());
    for (int i = 0; i < types; ++i)
      for (int k = 0; k < inst.net.num_od_pairs(); ++k)
        inst.demand.set(i, k, u.next(0.3, 3.0));
    return inst;
  }
}

}  // namespace tollopt::testutil
