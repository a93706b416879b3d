#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tollopt/network.hpp"

namespace tollopt {

// One sensor reading: each row describes the segment from this sensor to the
// next one on the edge; the last sensor of an edge carries dist_next = 0 and
// only marks the segment end.
struct SensorRecord {
  std::string edge;
  int sensor = 0;
  int day = 0;
  int hour = 0;
  double speed_mph = 0.0;
  double flow_vph = 0.0;
  double dist_next_miles = 0.0;
};

struct DayStat {
  double time_hours = 0.0;
  double flow = 0.0;
};

// Per-edge, per-day travel time and flow aggregated over the rush hours.
using EdgeDayStats = std::map<std::string, std::map<int, DayStat>>;

struct DataQualityReport {
  long complete_tuples = 0;
  long dropped_tuples = 0;  // incomplete sensor sets or rejected readings
  std::map<std::string, long> dropped_by_edge;
  std::vector<std::string> notes;
};

inline const std::vector<int> kDefaultRushHours = {6, 7, 8, 9, 10, 11};

// Appendix-style aggregation: hourly edge time is the sum of segment
// distances over segment speeds; hourly flow is the distance-weighted sensor
// average; the daily time is the flow-weighted hourly mean (unweighted when
// the day's flow is zero) and the daily flow the plain hourly mean. A
// (edge, hour, day) tuple missing any of the edge's sensors, or containing a
// nonpositive speed or segment length, is dropped and counted.
EdgeDayStats edge_daily_stats(const std::vector<SensorRecord>& records,
                              const std::vector<int>& hours = kDefaultRushHours,
                              DataQualityReport* report = nullptr);

// Free-flow travel time per edge: mean of the night-hour (3am) travel times
// over available days. Throws naming the edge when it has no night data.
std::map<std::string, double> fit_free_flow(
    const std::vector<SensorRecord>& records, int night_hour = 3,
    DataQualityReport* report = nullptr);

// One-parameter least squares of time = a + b flow^4 with the intercept
// fixed at a_hat: b = max(0, sum (t - a) f^4 / sum f^8).
std::map<std::string, double> fit_bpr_slope(
    const EdgeDayStats& stats, const std::map<std::string, double>& a_hat,
    DataQualityReport* report = nullptr);

// Raw mobility and census tables feeding the demand pipeline.
struct MobilityTable {
  // Average daily device count per (origin cell, destination cell).
  std::vector<std::pair<std::pair<std::string, std::string>, double>> counts;
  std::map<std::string, double> residents;  // per cell
  // Driving population per (node, type label), order-preserving.
  std::vector<std::pair<std::pair<std::string, std::string>, double>>
      driving_population;
  int rush_hour_count = 6;  // |H|
};

struct DemandCalibration {
  std::vector<std::string> type_labels;  // first-appearance order
  DemandMatrix base;                     // D^{ik}, flow per rush hour
  std::map<int, DemandMatrix> daily;     // D^{ik}_t
  // Intermediates, exposed for audit.
  std::map<std::pair<std::string, std::string>, double> corrected_counts;
  std::vector<double> od_relative_demand;  // per od index
  double raw_total = 0.0;
  double corrected_total = 0.0;
  std::map<int, double> day_scale;
};

// Three-step pipeline: sampling-bias correction of the device counts,
// type-split against the driving population, then per-day scaling against
// the network-wide observed flows (skipped when daily_flow_totals is empty).
DemandCalibration calibrate_demand(
    const Network& net, const MobilityTable& mobility,
    const std::map<std::string, std::string>& cell_to_node,
    const std::map<int, double>& daily_flow_totals = {});

// Candidate value-of-time vectors, one entry per type in declared order.
struct VotGrid {
  std::vector<std::vector<double>> candidates;

  // Cartesian grid {lo, lo+step, ..., hi}^num_types filtered to candidates
  // nonincreasing in type order (declare types from high to low value of
  // time), sorted lexicographically.
  static VotGrid uniform(int num_types, double lo = 0.0, double hi = 100.0,
                         double step = 5.0);
};

struct VotEstimate {
  std::vector<double> theta;  // selected values after zero flooring
  std::vector<double> raw;    // selected raw grid candidate
  double squared_error = 0.0;
  std::vector<std::pair<std::vector<double>, double>> candidate_errors;
  std::vector<std::vector<double>> invalid_candidates;
  std::vector<std::string> notes;
};

// Inverse-optimization grid search: pick the candidate whose per-day
// equilibrium flows under the current tolls best match the observed daily
// flows (total squared error); ties go to the lexicographically smallest
// candidate. Grid zeros are floored to 1 $/hour (recorded in notes).
// Candidates whose equilibrium fails to solve are excluded and reported.
VotEstimate estimate_vot(
    const Network& net, const std::vector<std::string>& type_labels,
    const std::map<int, DemandMatrix>& daily_demand,
    const std::map<int, std::vector<double>>& observed_daily_flows,
    const TollScheme& current_tolls, const VotGrid& grid,
    double equilibrium_tol = 1e-7);

}  // namespace tollopt
