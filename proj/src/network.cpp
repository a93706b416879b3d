#include "tollopt/network.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "tollopt/kernels.hpp"

namespace tollopt {

namespace {

void validate_route(const std::vector<Edge>& edges, const Route& route,
                    const OdPair& od, int od_pos) {
  if (route.empty())
    throw InputError("empty route for od pair #" + std::to_string(od_pos));
  std::set<int> visited;
  int at = od.origin;
  visited.insert(at);
  for (int e : route) {
    if (e < 0 || e >= static_cast<int>(edges.size()))
      throw InputError("route references unknown edge index " +
                       std::to_string(e));
    if (edges[e].tail != at)
      throw InputError("route for od pair #" + std::to_string(od_pos) +
                       " is not a contiguous path at edge '" + edges[e].id +
                       "'");
    at = edges[e].head;
    if (!visited.insert(at).second)
      throw InputError("route for od pair #" + std::to_string(od_pos) +
                       " revisits a node (not a simple path)");
  }
  if (at != od.destination)
    throw InputError("route for od pair #" + std::to_string(od_pos) +
                     " does not end at the od destination");
}

}  // namespace

Network Network::build(std::vector<std::string> nodes, std::vector<Edge> edges,
                       std::vector<OdPair> od_pairs,
                       std::vector<std::vector<Route>> routes, int max_hops) {
  Network net;
  if (nodes.empty()) throw InputError("network has no nodes");
  {
    std::set<std::string> seen;
    for (const auto& n : nodes)
      if (!seen.insert(n).second)
        throw InputError("duplicate node id '" + n + "'");
  }
  const int n = static_cast<int>(nodes.size());
  std::set<std::string> edge_ids;
  for (const Edge& e : edges) {
    if (!edge_ids.insert(e.id).second)
      throw InputError("duplicate edge id '" + e.id + "'");
    if (e.tail < 0 || e.tail >= n || e.head < 0 || e.head >= n)
      throw InputError("edge '" + e.id + "' references an undeclared node");
    if (e.tail == e.head)
      throw InputError("edge '" + e.id + "' is a self loop");
    if (e.free_flow_hours < 0 || e.congestion_slope < 0 || e.gas_cost < 0)
      throw InputError("edge '" + e.id + "' has a negative parameter");
    if (!std::isfinite(e.free_flow_hours) || !std::isfinite(e.congestion_slope) ||
        !std::isfinite(e.gas_cost))
      throw InputError("edge '" + e.id + "' has a non-finite parameter");
  }
  for (std::size_t k = 0; k < od_pairs.size(); ++k) {
    const OdPair& od = od_pairs[k];
    if (od.origin < 0 || od.origin >= n || od.destination < 0 ||
        od.destination >= n)
      throw InputError("od pair #" + std::to_string(k) +
                       " references an undeclared node");
    if (od.origin == od.destination)
      throw InputError("od pair #" + std::to_string(k) +
                       " has identical origin and destination");
  }

  if (routes.empty()) {
    routes.reserve(od_pairs.size());
    for (const OdPair& od : od_pairs)
      routes.push_back(enumerate_routes(edges, n, od.origin, od.destination,
                                        max_hops));
  }
  if (routes.size() != od_pairs.size())
    throw InputError("route table size does not match the od pair list");
  for (std::size_t k = 0; k < od_pairs.size(); ++k)
    for (const Route& r : routes[k])
      validate_route(edges, r, od_pairs[k], static_cast<int>(k));

  net.node_ids_ = std::move(nodes);
  net.edges_ = std::move(edges);
  net.od_pairs_ = std::move(od_pairs);
  net.routes_ = std::move(routes);
  net.a_.reserve(net.edges_.size());
  net.b_.reserve(net.edges_.size());
  net.gas_.reserve(net.edges_.size());
  for (const Edge& e : net.edges_) {
    net.a_.push_back(e.free_flow_hours);
    net.b_.push_back(e.congestion_slope);
    net.gas_.push_back(e.gas_cost);
  }
  return net;
}

int Network::node_index(const std::string& id) const {
  for (int i = 0; i < num_nodes(); ++i)
    if (node_ids_[i] == id) return i;
  throw InputError("unknown node '" + id + "'");
}

int Network::edge_index(const std::string& id) const {
  for (int i = 0; i < num_edges(); ++i)
    if (edges_[i].id == id) return i;
  throw InputError("unknown edge '" + id + "'");
}

int Network::od_index(int origin, int destination) const {
  for (int k = 0; k < num_od_pairs(); ++k)
    if (od_pairs_[k].origin == origin &&
        od_pairs_[k].destination == destination)
      return k;
  return -1;
}

bool Network::strictly_congestible() const {
  return std::all_of(b_.begin(), b_.end(), [](double b) { return b > 0.0; });
}

VotProfile::VotProfile(std::vector<std::string> labels,
                       std::vector<double> theta)
    : labels_(std::move(labels)), theta_(std::move(theta)) {
  if (labels_.size() != theta_.size() || theta_.empty())
    throw InputError("value-of-time profile needs one positive value per type");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < theta_.size(); ++i) {
    if (!(theta_[i] > 0.0) || !std::isfinite(theta_[i]))
      throw InputError("value of time for type '" + labels_[i] +
                       "' must be > 0");
    if (!seen.insert(labels_[i]).second)
      throw InputError("duplicate type label '" + labels_[i] + "'");
  }
}

int VotProfile::type_index(const std::string& label) const {
  for (int i = 0; i < num_types(); ++i)
    if (labels_[i] == label) return i;
  throw InputError("unknown traveler type '" + label + "'");
}

DemandMatrix::DemandMatrix(int num_types, int num_ods)
    : num_types_(num_types), num_ods_(num_ods),
      d_(static_cast<std::size_t>(num_types) * num_ods, 0.0) {
  if (num_types <= 0 || num_ods < 0)
    throw InputError("demand matrix needs at least one type");
}

void DemandMatrix::set(int type, int od, double demand) {
  if (type < 0 || type >= num_types_ || od < 0 || od >= num_ods_)
    throw InputError("demand entry references an undeclared type or od pair");
  if (demand < 0 || !std::isfinite(demand))
    throw InputError("demand must be finite and nonnegative");
  d_[idx(type, od)] = demand;
}

double DemandMatrix::type_total(int type) const {
  double s = 0.0;
  for (int k = 0; k < num_ods_; ++k) s += at(type, k);
  return s;
}

double DemandMatrix::total() const {
  double s = 0.0;
  for (int i = 0; i < num_types_; ++i) s += type_total(i);
  return s;
}

TollScheme TollScheme::zero(int num_edges) {
  return homogeneous(std::vector<double>(num_edges, 0.0));
}

TollScheme TollScheme::homogeneous(std::vector<double> prices,
                                   std::vector<char> support) {
  TollScheme p;
  p.kind_ = Kind::homogeneous;
  p.num_edges_ = static_cast<int>(prices.size());
  p.num_types_ = 0;
  if (support.empty()) support.assign(prices.size(), 1);
  if (support.size() != prices.size())
    throw InputError("toll support size does not match the edge count");
  for (std::size_t e = 0; e < prices.size(); ++e) {
    if (prices[e] < 0 || !std::isfinite(prices[e]))
      throw InputError("toll prices must be finite and nonnegative");
    if (!support[e] && prices[e] != 0.0)
      throw InputError("nonzero toll outside the support set");
  }
  p.prices_ = std::move(prices);
  p.support_ = std::move(support);
  return p;
}

TollScheme TollScheme::heterogeneous(int num_edges, int num_types,
                                     std::vector<double> prices_type_major,
                                     std::vector<char> support) {
  TollScheme p;
  p.kind_ = Kind::heterogeneous;
  p.num_edges_ = num_edges;
  p.num_types_ = num_types;
  if (prices_type_major.size() !=
      static_cast<std::size_t>(num_edges) * num_types)
    throw InputError("heterogeneous toll table has the wrong shape");
  if (support.empty()) support.assign(num_edges, 1);
  if (support.size() != static_cast<std::size_t>(num_edges))
    throw InputError("toll support size does not match the edge count");
  for (int i = 0; i < num_types; ++i)
    for (int e = 0; e < num_edges; ++e) {
      const double v =
          prices_type_major[static_cast<std::size_t>(i) * num_edges + e];
      if (v < 0 || !std::isfinite(v))
        throw InputError("toll prices must be finite and nonnegative");
      if (!support[e] && v != 0.0)
        throw InputError("nonzero toll outside the support set");
    }
  p.prices_ = std::move(prices_type_major);
  p.support_ = std::move(support);
  return p;
}

StrategyDistribution StrategyDistribution::zeros(const Network& net,
                                                 int num_types) {
  StrategyDistribution q;
  q.q.resize(num_types);
  for (int i = 0; i < num_types; ++i) {
    q.q[i].resize(net.num_od_pairs());
    for (int k = 0; k < net.num_od_pairs(); ++k)
      q.q[i][k].assign(net.routes(k).size(), 0.0);
  }
  return q;
}

void check_feasible(const Network& net, const StrategyDistribution& q,
                    const DemandMatrix& demand) {
  if (static_cast<int>(q.q.size()) != demand.num_types())
    throw InputError("strategy distribution type count mismatch");
  for (int i = 0; i < demand.num_types(); ++i) {
    if (static_cast<int>(q.q[i].size()) != net.num_od_pairs())
      throw InputError("strategy distribution od count mismatch");
    for (int k = 0; k < net.num_od_pairs(); ++k) {
      if (q.q[i][k].size() != net.routes(k).size())
        throw InputError("strategy distribution route count mismatch");
      double sum = 0.0;
      for (double v : q.q[i][k]) {
        if (v < 0) throw InputError("negative route flow");
        sum += v;
      }
      const double d = demand.at(i, k);
      if (std::abs(sum - d) > 1e-9 * std::max(1.0, d))
        throw InputError("route flows do not satisfy the demand of type " +
                         std::to_string(i) + ", od pair " + std::to_string(k));
    }
  }
}

EdgeFlows edge_flows(const Network& net, const StrategyDistribution& q) {
  EdgeFlows f;
  f.num_edges = net.num_edges();
  f.num_types = static_cast<int>(q.q.size());
  f.per_type.assign(static_cast<std::size_t>(f.num_types) * f.num_edges, 0.0);
  f.aggregate.assign(f.num_edges, 0.0);
  for (int i = 0; i < f.num_types; ++i) {
    if (static_cast<int>(q.q[i].size()) != net.num_od_pairs())
      throw InputError("strategy distribution od count mismatch");
    double* fi = f.per_type.data() + static_cast<std::size_t>(i) * f.num_edges;
    for (int k = 0; k < net.num_od_pairs(); ++k) {
      const auto& routes = net.routes(k);
      if (q.q[i][k].size() != routes.size())
        throw InputError("strategy distribution route count mismatch");
      for (std::size_t r = 0; r < routes.size(); ++r) {
        const double v = q.q[i][k][r];
        if (v == 0.0) continue;
        for (int e : routes[r]) fi[e] += v;
      }
    }
  }
  for (int i = 0; i < f.num_types; ++i) {
    const double* fi =
        f.per_type.data() + static_cast<std::size_t>(i) * f.num_edges;
    for (int e = 0; e < f.num_edges; ++e) f.aggregate[e] += fi[e];
  }
  return f;
}

double route_latency(const Network& net, std::span<const double> w,
                     const Route& route) {
  const auto a = net.free_flow();
  const auto b = net.slope();
  double s = 0.0;
  for (int e : route) {
    const double we = w[e];
    const double w2 = we * we;
    s += a[e] + b[e] * (w2 * w2);
  }
  return s;
}

double route_cost(const Network& net, std::span<const double> w,
                  const Route& route, int type, const VotProfile& vot,
                  const TollScheme& tolls) {
  double money = 0.0;
  const auto gas = net.gas();
  for (int e : route) money += tolls.price(e, type) + gas[e];
  return route_latency(net, w, route) + money / vot.theta(type);
}

std::vector<Route> enumerate_routes(const Network& net, int origin,
                                    int destination, int max_hops) {
  return enumerate_routes(net.edges(), net.num_nodes(), origin, destination,
                          max_hops);
}

std::vector<Route> enumerate_routes(const std::vector<Edge>& edges,
                                    int num_nodes, int origin, int destination,
                                    int max_hops) {
  if (max_hops < 1) throw InputError("max_hops must be >= 1");
  if (origin < 0 || origin >= num_nodes || destination < 0 ||
      destination >= num_nodes)
    throw InputError("route enumeration endpoints are not declared nodes");

  // Out-edges sorted by edge id so the DFS order, and hence the route order,
  // is independent of the edge declaration order.
  std::vector<std::vector<int>> out(num_nodes);
  for (int e = 0; e < static_cast<int>(edges.size()); ++e)
    out[edges[e].tail].push_back(e);
  for (auto& lst : out)
    std::sort(lst.begin(), lst.end(),
              [&](int x, int y) { return edges[x].id < edges[y].id; });

  std::vector<Route> result;
  std::vector<int> stack;
  std::vector<char> visited(num_nodes, 0);
  visited[origin] = 1;

  auto dfs = [&](auto&& self, int at) -> void {
    if (at == destination) {
      result.push_back(stack);
      return;
    }
    if (static_cast<int>(stack.size()) >= max_hops) return;
    for (int e : out[at]) {
      const int next = edges[e].head;
      if (visited[next]) continue;
      visited[next] = 1;
      stack.push_back(e);
      self(self, next);
      stack.pop_back();
      visited[next] = 0;
    }
  };
  dfs(dfs, origin);

  std::sort(result.begin(), result.end(), [&](const Route& x, const Route& y) {
    return std::lexicographical_compare(
        x.begin(), x.end(), y.begin(), y.end(),
        [&](int ex, int ey) { return edges[ex].id < edges[ey].id; });
  });
  return result;
}

}  // namespace tollopt
