#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tollopt/errors.hpp"

namespace tollopt {

// Directed edge with BPR latency l(w) = a + b w^4 (hours) and a fixed gas
// cost in dollars. `tollable` marks membership in the support set used by
// the support-constrained pricing schemes.
struct Edge {
  std::string id;
  int tail = -1;
  int head = -1;
  double free_flow_hours = 0.0;    // a
  double congestion_slope = 0.0;   // b, hours per flow^4
  double gas_cost = 0.0;           // dollars
  bool tollable = true;
};

struct OdPair {
  int origin = -1;
  int destination = -1;
};

// A route is an ordered sequence of edge indices forming a simple directed
// path from the OD origin to its destination.
using Route = std::vector<int>;

class Network {
 public:
  // Validates structure: declared endpoints, no self loops, nonnegative
  // parameters, and route well-formedness. When `routes` is empty they are
  // generated per OD pair by enumerate_routes with `max_hops`.
  static Network build(std::vector<std::string> nodes, std::vector<Edge> edges,
                       std::vector<OdPair> od_pairs,
                       std::vector<std::vector<Route>> routes = {},
                       int max_hops = kDefaultMaxHops);

  static constexpr int kDefaultMaxHops = 6;

  int num_nodes() const { return static_cast<int>(node_ids_.size()); }
  int num_edges() const { return static_cast<int>(edges_.size()); }
  int num_od_pairs() const { return static_cast<int>(od_pairs_.size()); }

  const std::vector<std::string>& node_ids() const { return node_ids_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<OdPair>& od_pairs() const { return od_pairs_; }
  const std::vector<Route>& routes(int od) const { return routes_.at(od); }
  const std::vector<std::vector<Route>>& all_routes() const { return routes_; }

  int node_index(const std::string& id) const;
  int edge_index(const std::string& id) const;
  // -1 when the pair is not declared.
  int od_index(int origin, int destination) const;

  // Per-edge parameter arrays, index-aligned with edges().
  std::span<const double> free_flow() const { return a_; }
  std::span<const double> slope() const { return b_; }
  std::span<const double> gas() const { return gas_; }
  // True when every edge has a strictly increasing latency (b > 0); flow
  // uniqueness guarantees only hold on such networks.
  bool strictly_congestible() const;

 private:
  Network() = default;

  std::vector<std::string> node_ids_;
  std::vector<Edge> edges_;
  std::vector<OdPair> od_pairs_;
  std::vector<std::vector<Route>> routes_;
  std::vector<double> a_, b_, gas_;
};

// Ordered traveler types with value-of-time theta in dollars per hour.
// theta must be strictly positive (it divides monetary costs).
class VotProfile {
 public:
  VotProfile(std::vector<std::string> labels, std::vector<double> theta);

  int num_types() const { return static_cast<int>(theta_.size()); }
  const std::vector<std::string>& labels() const { return labels_; }
  double theta(int i) const { return theta_.at(i); }
  std::span<const double> theta() const { return theta_; }
  int type_index(const std::string& label) const;

 private:
  std::vector<std::string> labels_;
  std::vector<double> theta_;
};

// Nonnegative demand per (type, od pair), dense over the declared sets.
class DemandMatrix {
 public:
  DemandMatrix(int num_types, int num_ods);

  double at(int type, int od) const { return d_[idx(type, od)]; }
  void set(int type, int od, double demand);

  int num_types() const { return num_types_; }
  int num_ods() const { return num_ods_; }
  double type_total(int type) const;
  double total() const;

 private:
  std::size_t idx(int type, int od) const {
    return static_cast<std::size_t>(type) * num_ods_ + od;
  }
  int num_types_ = 0;
  int num_ods_ = 0;
  std::vector<double> d_;
};

// Per-edge prices in dollars. A homogeneous scheme stores one price per
// edge; a heterogeneous one stores a price per (edge, type). Prices are
// zero outside the scheme's support set.
class TollScheme {
 public:
  enum class Kind { homogeneous, heterogeneous };

  static TollScheme zero(int num_edges);
  static TollScheme homogeneous(std::vector<double> prices,
                                std::vector<char> support = {});
  static TollScheme heterogeneous(int num_edges, int num_types,
                                  std::vector<double> prices_type_major,
                                  std::vector<char> support = {});

  Kind kind() const { return kind_; }
  int num_edges() const { return num_edges_; }
  int num_types() const { return num_types_; }  // 0 for homogeneous
  bool in_support(int e) const { return support_[e] != 0; }
  const std::vector<char>& support() const { return support_; }

  // Price seen by a type-i traveler on edge e. Homogeneous schemes ignore i.
  double price(int e, int type) const {
    return kind_ == Kind::homogeneous
               ? prices_[e]
               : prices_[static_cast<std::size_t>(type) * num_edges_ + e];
  }
  const std::vector<double>& raw_prices() const { return prices_; }

 private:
  TollScheme() = default;
  Kind kind_ = Kind::homogeneous;
  int num_edges_ = 0;
  int num_types_ = 0;
  std::vector<double> prices_;
  std::vector<char> support_;
};

// Route flows q[type][od][route index].
struct StrategyDistribution {
  std::vector<std::vector<std::vector<double>>> q;

  static StrategyDistribution zeros(const Network& net, int num_types);
  double flow(int type, int od, int route) const { return q[type][od][route]; }
};

// Per-type and aggregate edge flows; `aggregate` is always the stored
// type-sum, never rederived elsewhere.
struct EdgeFlows {
  int num_edges = 0;
  int num_types = 0;
  std::vector<double> per_type;   // [type * num_edges + e]
  std::vector<double> aggregate;  // [e]

  double type_flow(int type, int e) const {
    return per_type[static_cast<std::size_t>(type) * num_edges + e];
  }
};

// Throws InputError when any (type, od) flow sum differs from the demand by
// more than 1e-9 relative.
void check_feasible(const Network& net, const StrategyDistribution& q,
                    const DemandMatrix& demand);

EdgeFlows edge_flows(const Network& net, const StrategyDistribution& q);

double route_latency(const Network& net, std::span<const double> w,
                     const Route& route);

// Generalized cost in hours-equivalent: latency plus (tolls + gas) / theta.
double route_cost(const Network& net, std::span<const double> w,
                  const Route& route, int type, const VotProfile& vot,
                  const TollScheme& tolls);

// All simple directed paths from origin to destination with at most
// max_hops edges, ordered lexicographically by edge-id sequence. The result
// does not depend on the declaration order of the edge list.
std::vector<Route> enumerate_routes(const Network& net, int origin,
                                    int destination, int max_hops);
std::vector<Route> enumerate_routes(const std::vector<Edge>& edges,
                                    int num_nodes, int origin, int destination,
                                    int max_hops);

}  // namespace tollopt
