#include "tollopt/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "tollopt/equilibrium.hpp"

namespace tollopt {

namespace {

struct HourlyPoint {
  double time_hours = 0.0;
  double flow = 0.0;
};

// (edge, day) -> hour -> aggregated reading, restricted to `hours`.
using HourlyTable = std::map<std::pair<std::string, int>, std::map<int, HourlyPoint>>;

HourlyTable hourly_aggregate(const std::vector<SensorRecord>& records,
                             const std::vector<int>& hours,
                             DataQualityReport* report) {
  const std::set<int> wanted(hours.begin(), hours.end());

  std::map<std::string, std::set<int>> edge_sensors;
  for (const SensorRecord& r : records) edge_sensors[r.edge].insert(r.sensor);
  for (const auto& [edge, sensors] : edge_sensors)
    if (sensors.size() < 2)
      throw InputError("edge '" + edge +
                       "' has fewer than 2 sensors; travel time undefined");

  std::map<std::tuple<std::string, int, int>, std::map<int, SensorRecord>>
      tuples;  // (edge, day, hour) -> sensor -> record
  for (const SensorRecord& r : records) {
    if (!wanted.count(r.hour)) continue;
    auto& slot = tuples[{r.edge, r.day, r.hour}];
    if (!slot.emplace(r.sensor, r).second)
      throw InputError("duplicate sensor reading for edge '" + r.edge + "'");
  }

  HourlyTable out;
  for (const auto& [key, sensors] : tuples) {
    const auto& [edge, day, hour] = key;
    const std::set<int>& expected = edge_sensors.at(edge);
    bool ok = sensors.size() == expected.size();
    double time = 0.0, wflow = 0.0, wsum = 0.0;
    if (ok) {
      // All sensors but the last (by index) describe a segment.
      auto it = sensors.begin();
      for (std::size_t s = 0; ok && s + 1 < sensors.size(); ++s, ++it) {
        const SensorRecord& r = it->second;
        if (r.speed_mph <= 0.0 || r.dist_next_miles <= 0.0 || r.flow_vph < 0.0) {
          ok = false;
          break;
        }
        time += r.dist_next_miles / r.speed_mph;
        wflow += r.dist_next_miles * r.flow_vph;
        wsum += r.dist_next_miles;
      }
    }
    if (!ok) {
      if (report) {
        ++report->dropped_tuples;
        ++report->dropped_by_edge[edge];
      }
      continue;
    }
    if (report) ++report->complete_tuples;
    out[{edge, day}][hour] = {time, wflow / wsum};
  }
  return out;
}

}  // namespace

EdgeDayStats edge_daily_stats(const std::vector<SensorRecord>& records,
                              const std::vector<int>& hours,
                              DataQualityReport* report) {
  if (hours.empty()) throw InputError("rush hour set is empty");
  const HourlyTable hourly = hourly_aggregate(records, hours, report);

  EdgeDayStats out;
  for (const auto& [key, per_hour] : hourly) {
    const auto& [edge, day] = key;
    double flow_sum = 0.0, weighted_time = 0.0, plain_time = 0.0;
    for (const auto& [hour, pt] : per_hour) {
      flow_sum += pt.flow;
      weighted_time += pt.flow * pt.time_hours;
      plain_time += pt.time_hours;
    }
    DayStat st;
    st.flow = flow_sum / static_cast<double>(per_hour.size());
    if (flow_sum > 0.0) {
      st.time_hours = weighted_time / flow_sum;
    } else {
      st.time_hours = plain_time / static_cast<double>(per_hour.size());
      if (report)
        report->notes.push_back("edge '" + edge + "' day " +
                                std::to_string(day) +
                                ": zero flow, unweighted hourly time mean");
    }
    out[edge][day] = st;
  }
  return out;
}

std::map<std::string, double> fit_free_flow(
    const std::vector<SensorRecord>& records, int night_hour,
    DataQualityReport* report) {
  const HourlyTable night = hourly_aggregate(records, {night_hour}, report);

  std::map<std::string, std::pair<double, int>> acc;  // edge -> (sum, days)
  for (const auto& [key, per_hour] : night) {
    auto it = per_hour.find(night_hour);
    if (it == per_hour.end()) continue;
    auto& [sum, count] = acc[key.first];
    sum += it->second.time_hours;
    ++count;
  }

  std::set<std::string> edges;
  for (const SensorRecord& r : records) edges.insert(r.edge);

  std::map<std::string, double> a_hat;
  for (const std::string& edge : edges) {
    auto it = acc.find(edge);
    if (it == acc.end() || it->second.second == 0)
      throw InputError("edge '" + edge + "' has no " +
                       std::to_string(night_hour) +
                       "am observation; free-flow time cannot be estimated");
    a_hat[edge] = it->second.first / it->second.second;
  }
  return a_hat;
}

std::map<std::string, double> fit_bpr_slope(
    const EdgeDayStats& stats, const std::map<std::string, double>& a_hat,
    DataQualityReport* report) {
  std::map<std::string, double> b_hat;
  for (const auto& [edge, days] : stats) {
    auto it = a_hat.find(edge);
    if (it == a_hat.end())
      throw InputError("no free-flow estimate for edge '" + edge + "'");
    const double a = it->second;
    double num = 0.0, den = 0.0;
    for (const auto& [day, st] : days) {
      const double f2 = st.flow * st.flow;
      const double f4 = f2 * f2;
      num += (st.time_hours - a) * f4;
      den += f4 * f4;
    }
    double b = 0.0;
    if (den > 0.0) {
      b = std::max(0.0, num / den);
    } else if (report) {
      report->notes.push_back("edge '" + edge +
                              "': all observed flows are zero, slope set to 0");
    }
    b_hat[edge] = b;
  }
  return b_hat;
}

DemandCalibration calibrate_demand(
    const Network& net, const MobilityTable& mobility,
    const std::map<std::string, std::string>& cell_to_node,
    const std::map<int, double>& daily_flow_totals) {
  if (mobility.rush_hour_count <= 0)
    throw InputError("rush hour count must be positive");

  // Step 1: sampling-bias correction of the raw device counts.
  double resident_total = 0.0;
  for (const auto& [cell, r] : mobility.residents) {
    if (r < 0) throw InputError("negative resident count for cell " + cell);
    resident_total += r;
  }
  if (resident_total <= 0.0)
    throw InputError("resident table has zero total population");

  double raw_total = 0.0;
  std::map<std::string, double> row_sum;
  for (const auto& [od, n] : mobility.counts) {
    if (n < 0) throw InputError("negative device count");
    raw_total += n;
    row_sum[od.first] += n;
  }

  DemandCalibration cal{
      {}, DemandMatrix(1, net.num_od_pairs()), {}, {}, {}, 0.0, 0.0, {}};
  cal.raw_total = raw_total;
  for (const auto& [od, n] : mobility.counts) {
    const auto res = mobility.residents.find(od.first);
    if (res == mobility.residents.end())
      throw InputError("cell '" + od.first + "' has no resident count");
    const double rs = row_sum[od.first];
    // Cells with an empty outgoing row are excluded from the correction.
    const double corrected =
        rs > 0.0 ? n * (res->second / resident_total) * (raw_total / rs) : 0.0;
    cal.corrected_counts[od] += corrected;
    cal.corrected_total += corrected;
  }

  // Step 2: aggregate to od pairs and split by type against the driving
  // population of the origin node.
  auto node_of = [&](const std::string& cell) -> int {
    const auto it = cell_to_node.find(cell);
    if (it == cell_to_node.end())
      throw InputError("cell '" + cell + "' is not mapped to a node");
    return net.node_index(it->second);
  };

  cal.od_relative_demand.assign(net.num_od_pairs(), 0.0);
  for (const auto& [od, n] : cal.corrected_counts) {
    const int k = net.od_index(node_of(od.first), node_of(od.second));
    if (k >= 0) cal.od_relative_demand[k] += n;
  }

  std::vector<double> origin_total(net.num_nodes(), 0.0);
  for (int k = 0; k < net.num_od_pairs(); ++k)
    origin_total[net.od_pairs()[k].origin] += cal.od_relative_demand[k];

  for (const auto& [key, pop] : mobility.driving_population) {
    if (pop < 0) throw InputError("negative driving population");
    if (std::find(cal.type_labels.begin(), cal.type_labels.end(), key.second) ==
        cal.type_labels.end())
      cal.type_labels.push_back(key.second);
  }
  if (cal.type_labels.empty())
    throw InputError("driving population table is empty");

  const int I = static_cast<int>(cal.type_labels.size());
  std::vector<double> pop(static_cast<std::size_t>(I) * net.num_nodes(), 0.0);
  for (const auto& [key, p] : mobility.driving_population) {
    const int node = net.node_index(key.first);
    const auto lbl = std::find(cal.type_labels.begin(), cal.type_labels.end(),
                               key.second);
    const int i = static_cast<int>(lbl - cal.type_labels.begin());
    pop[static_cast<std::size_t>(i) * net.num_nodes() + node] += p;
  }

  cal.base = DemandMatrix(I, net.num_od_pairs());
  for (int k = 0; k < net.num_od_pairs(); ++k) {
    const int o = net.od_pairs()[k].origin;
    for (int i = 0; i < I; ++i) {
      const double a = pop[static_cast<std::size_t>(i) * net.num_nodes() + o];
      if (a == 0.0) continue;
      if (origin_total[o] <= 0.0)
        throw InputError("origin node '" + net.node_ids()[o] +
                         "' has driving population but zero relative demand; "
                         "shares are undefined");
      const double share = cal.od_relative_demand[k] / origin_total[o];
      cal.base.set(i, k, share * a / mobility.rush_hour_count);
    }
  }

  // Step 3: scale by each day's total observed flow.
  if (!daily_flow_totals.empty()) {
    double mean = 0.0;
    for (const auto& [day, total] : daily_flow_totals) mean += total;
    mean /= static_cast<double>(daily_flow_totals.size());
    if (mean <= 0.0)
      throw InputError("daily flow totals have a nonpositive mean");
    for (const auto& [day, total] : daily_flow_totals) {
      const double scale = total / mean;
      cal.day_scale[day] = scale;
      DemandMatrix d(I, net.num_od_pairs());
      for (int i = 0; i < I; ++i)
        for (int k = 0; k < net.num_od_pairs(); ++k)
          d.set(i, k, scale * cal.base.at(i, k));
      cal.daily.emplace(day, std::move(d));
    }
  }
  return cal;
}

VotGrid VotGrid::uniform(int num_types, double lo, double hi, double step) {
  if (num_types <= 0 || step <= 0 || hi < lo)
    throw InputError("malformed value-of-time grid");
  std::vector<double> levels;
  for (double v = lo; v <= hi + 1e-9; v += step) levels.push_back(v);

  VotGrid grid;
  std::vector<double> cur(num_types);
  auto rec = [&](auto&& self, int pos, double cap) -> void {
    if (pos == num_types) {
      grid.candidates.push_back(cur);
      return;
    }
    for (double v : levels) {
      if (v > cap + 1e-12) break;
      cur[pos] = v;
      self(self, pos + 1, v);
    }
  };
  rec(rec, 0, hi);
  std::sort(grid.candidates.begin(), grid.candidates.end());
  return grid;
}

VotEstimate estimate_vot(
    const Network& net, const std::vector<std::string>& type_labels,
    const std::map<int, DemandMatrix>& daily_demand,
    const std::map<int, std::vector<double>>& observed_daily_flows,
    const TollScheme& current_tolls, const VotGrid& grid,
    double equilibrium_tol) {
  if (grid.candidates.empty()) throw InputError("value-of-time grid is empty");
  if (daily_demand.empty()) throw InputError("no daily demand data");
  for (const auto& [day, d] : daily_demand)
    if (!observed_daily_flows.count(day))
      throw InputError("day " + std::to_string(day) +
                       " has demand but no observed flows");

  std::vector<std::vector<double>> candidates = grid.candidates;
  std::sort(candidates.begin(), candidates.end());

  VotEstimate est;
  est.squared_error = std::numeric_limits<double>::infinity();

  SolverOptions opts;
  opts.tol = equilibrium_tol;

  std::vector<char> floor_noted(type_labels.size(), 0);
  for (const auto& raw : candidates) {
    if (static_cast<int>(raw.size()) != static_cast<int>(type_labels.size()))
      throw InputError("grid candidate arity does not match the type count");
    std::vector<double> theta = raw;
    for (std::size_t i = 0; i < theta.size(); ++i)
      if (theta[i] <= 0.0) {
        theta[i] = 1.0;
        if (!floor_noted[i]) {
          floor_noted[i] = 1;
          est.notes.push_back("grid value 0 for type '" + type_labels[i] +
                              "' evaluated as 1 $/hour");
        }
      }
    double err = 0.0;
    bool valid = true;
    try {
      const VotProfile vot(type_labels, theta);
      for (const auto& [day, demand] : daily_demand) {
        const EquilibriumResult eq =
            solve_equilibrium(net, demand, vot, current_tolls, opts);
        const std::vector<double>& observed = observed_daily_flows.at(day);
        if (static_cast<int>(observed.size()) != net.num_edges())
          throw InputError("observed flow vector size mismatch on day " +
                           std::to_string(day));
        for (int e = 0; e < net.num_edges(); ++e) {
          const double diff = observed[e] - eq.flows.aggregate[e];
          err += diff * diff;
        }
      }
    } catch (const ConvergenceError&) {
      valid = false;
    } catch (const InfeasibleDemandError&) {
      valid = false;
    }
    if (!valid) {
      est.invalid_candidates.push_back(raw);
      continue;
    }
    est.candidate_errors.emplace_back(raw, err);
    if (err < est.squared_error) {
      est.squared_error = err;
      est.raw = raw;
      est.theta = theta;
    }
  }
  if (est.raw.empty())
    throw ConvergenceError("every grid candidate failed to solve", 0.0);
  return est;
}

}  // namespace tollopt
