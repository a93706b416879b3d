#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tollopt/calibration.hpp"
#include "tollopt/evaluation.hpp"
#include "tollopt/network.hpp"
#include "tollopt/toll_design.hpp"

namespace tollopt::io {

inline constexpr const char* kToolVersion = "0.1.0";

// Network JSON: nodes, edges (id, tail, head, a, b, gas, tollable),
// od_pairs, optional explicit routes, optional vot_types, optional max_hops.
struct NetworkFile {
  Network network;
  std::optional<VotProfile> vot;
};

NetworkFile load_network(const std::string& path);

// Demand CSV columns: type,origin,destination,demand[,day]. Rows without a
// day populate `base`; rows with one populate `daily`.
struct DemandData {
  std::optional<DemandMatrix> base;
  std::map<int, DemandMatrix> daily;
};

DemandData load_demand(const std::string& path, const Network& net,
                       const VotProfile& vot);

// Returns the single demand table of a file (base, or the sole day);
// throws when the file carries several days.
DemandMatrix single_demand(const DemandData& data);

// Toll input: either a design JSON (by .json extension) or a CSV with
// columns edge,type,price where type '*' applies to every type.
TollScheme load_tolls(const std::string& path, const Network& net,
                      const VotProfile& vot);

// Support file: one edge id per line; '#' starts a comment.
std::vector<char> load_support(const std::string& path, const Network& net);

// Sensor CSV: edge,sensor,day,hour,speed_mph,flow_vph,dist_next_miles.
std::vector<SensorRecord> load_sensor_csv(const std::string& path);

// Mobility tables: counts (origin_cell,dest_cell,count), residents
// (cell,residents), driving population (node,type,driving_pop).
MobilityTable load_mobility(const std::string& counts_path,
                            const std::string& residents_path,
                            const std::string& population_path,
                            int rush_hour_count);

// Cell-to-node map CSV: cell,node.
std::map<std::string, std::string> load_cell_map(const std::string& path);

// Observed daily edge flows CSV: edge,day,flow.
std::map<int, std::vector<double>> load_observed_flows(const std::string& path,
                                                       const Network& net);

// Per-type edge flows CSV: edge,type,flow (written by the equilibrium
// command and accepted back by evaluate).
std::string edge_flows_csv(const Network& net, const VotProfile& vot,
                           const EdgeFlows& flows);
EdgeFlows load_edge_flows(const std::string& path, const Network& net,
                          const VotProfile& vot);

std::string route_flows_csv(const Network& net, const VotProfile& vot,
                            const StrategyDistribution& q);

// Design output JSON, embedding tool version and config hash.
std::string design_json(const DesignOutput& out, const Network& net,
                        const VotProfile& vot, const std::string& config_hash);
DesignOutput load_design_json(const std::string& path, const Network& net,
                              const VotProfile& vot);

std::string metrics_json(const MetricsReport& report, const Network& net,
                         const VotProfile& vot, const std::string& config_hash);

// Pareto CSV: scheme,sample,avg_time_min,equity,dominated (+failure note).
std::string pareto_csv(const std::vector<ParetoPoint>& points);

std::string demand_csv(const Network& net,
                       const std::vector<std::string>& labels,
                       const DemandMatrix& base,
                       const std::map<int, DemandMatrix>& daily);

// FNV-1a fingerprint of a canonical key=value listing; embedded in outputs
// so reruns are verifiable.
std::string config_fingerprint(
    const std::vector<std::pair<std::string, std::string>>& entries);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace tollopt::io
