// Command-line front end: one subcommand per pipeline stage so every
// intermediate artifact lands on disk and can be inspected or re-ingested.
//
// Exit codes: 0 success, 2 input error, 3 solver non-convergence,
// 4 LP failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tollopt/calibration.hpp"
#include "tollopt/equilibrium.hpp"
#include "tollopt/evaluation.hpp"
#include "tollopt/io.hpp"
#include "tollopt/toll_design.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tollopt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitLpFailure = 4;

struct Common {
  std::string network_path;
  std::string out_dir = ".";
  double tol = 1e-7;
  long max_iters = 100000;
};

// Config hash over the resolved options plus the content of every input
// file, so identical outputs imply identical inputs.
class Fingerprint {
 public:
  explicit Fingerprint(std::string command) {
    add("command", std::move(command));
    add("version", io::kToolVersion);
  }
  void add(const std::string& key, std::string value) {
    entries_.emplace_back(key, std::move(value));
  }
  void add(const std::string& key, double value) {
    std::ostringstream ss;
    ss.precision(17);
    ss << value;
    add(key, ss.str());
  }
  void add_file(const std::string& key, const std::string& path) {
    add(key, io::config_fingerprint({{"content", io::read_file(path)}}));
  }
  std::string hex() const { return io::config_fingerprint(entries_); }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

VotProfile require_vot(const io::NetworkFile& nf) {
  if (!nf.vot)
    throw InputError(
        "the network file does not declare vot_types; traveler types are "
        "required for this command");
  return *nf.vot;
}

void write_out(const Common& c, const std::string& name,
               const std::string& content) {
  fs::create_directories(c.out_dir);
  io::write_file((fs::path(c.out_dir) / name).string(), content);
  std::cout << "wrote " << (fs::path(c.out_dir) / name).string() << "\n";
}

int cmd_equilibrium(const Common& c, const std::string& demand_path,
                    const std::string& tolls_path) {
  Fingerprint fp("equilibrium");
  fp.add_file("network", c.network_path);
  fp.add_file("demand", demand_path);
  if (!tolls_path.empty()) fp.add_file("tolls", tolls_path);
  fp.add("tol", c.tol);

  const io::NetworkFile nf = io::load_network(c.network_path);
  const VotProfile vot = require_vot(nf);
  const Network& net = nf.network;
  const DemandMatrix demand =
      io::single_demand(io::load_demand(demand_path, net, vot));
  const TollScheme tolls = tolls_path.empty()
                               ? TollScheme::zero(net.num_edges())
                               : io::load_tolls(tolls_path, net, vot);

  SolverOptions opts;
  opts.tol = c.tol;
  opts.max_iterations = c.max_iters;
  const EquilibriumResult eq = solve_equilibrium(net, demand, vot, tolls, opts);

  write_out(c, "flows.csv", io::edge_flows_csv(net, vot, eq.flows));
  write_out(c, "route_flows.csv", io::route_flows_csv(net, vot, eq.q));

  json j;
  j["tool"] = "tollopt";
  j["version"] = io::kToolVersion;
  j["config_hash"] = fp.hex();
  j["gap"] = eq.gap;
  j["iterations"] = eq.iterations;
  j["potential"] = eq.potential;
  j["total_travel_time_hours"] = total_travel_time(net, eq.flows.aggregate);
  json per_type = json::object();
  for (int i = 0; i < vot.num_types(); ++i) {
    double acc = 0.0;
    const double di = demand.type_total(i);
    for (int k = 0; k < net.num_od_pairs(); ++k) {
      if (demand.at(i, k) <= 0.0) continue;
      acc += demand.at(i, k) *
             min_route_cost(net, eq.flows.aggregate, tolls, vot, i, k).cost;
    }
    per_type[vot.labels()[i]] = di > 0.0 ? 60.0 * acc / di : 0.0;
  }
  j["per_type_avg_cost_min"] = std::move(per_type);
  write_out(c, "equilibrium.json", j.dump(2) + "\n");
  return kExitOk;
}

int cmd_design(const Common& c, const std::string& demand_path,
               const std::string& scheme_str, double lambda,
               const std::string& support_path) {
  Fingerprint fp("design");
  fp.add_file("network", c.network_path);
  fp.add_file("demand", demand_path);
  fp.add("scheme", scheme_str);
  fp.add("lambda", lambda);
  if (!support_path.empty()) fp.add_file("support", support_path);
  fp.add("tol", c.tol);

  const io::NetworkFile nf = io::load_network(c.network_path);
  const VotProfile vot = require_vot(nf);
  const Network& net = nf.network;
  const DemandMatrix demand =
      io::single_demand(io::load_demand(demand_path, net, vot));
  const SchemeKind kind = scheme_from_name(scheme_str);
  std::vector<char> support;
  if (!support_path.empty()) {
    if (!scheme_has_support(kind))
      throw InputError("--support applies to the hom-sc and het-sc schemes");
    support = io::load_support(support_path, net);
  }

  const DesignOutput out =
      design(kind, net, demand, vot, lambda, support, c.tol);
  write_out(c, "design.json", io::design_json(out, net, vot, fp.hex()));

  std::ostringstream table;
  table << "scheme:            " << scheme_name(out.scheme) << "\n"
        << "lambda:            " << out.lambda << "\n"
        << "first-stage T*:    " << out.t_star << "\n"
        << "second-stage obj:  " << out.second_objective << "\n"
        << "disparity y:       " << out.y << "\n"
        << "optimal time (h):  " << out.social_optimum_time << "\n"
        << "tolls ($):\n";
  for (int e = 0; e < net.num_edges(); ++e) {
    table << "  " << net.edges()[e].id << ":";
    if (out.tolls.kind() == TollScheme::Kind::homogeneous) {
      table << " " << out.tolls.price(e, 0);
    } else {
      for (int i = 0; i < vot.num_types(); ++i)
        table << " " << vot.labels()[i] << "=" << out.tolls.price(e, i);
    }
    table << "\n";
  }
  write_out(c, "design_summary.txt", table.str());
  return kExitOk;
}

int cmd_calibrate(const Common& c, const std::string& sensors_path,
                  const std::string& counts_path,
                  const std::string& residents_path,
                  const std::string& population_path,
                  const std::string& cellmap_path,
                  const std::string& rush_hours) {
  Fingerprint fp("calibrate");
  fp.add_file("network", c.network_path);
  fp.add_file("sensors", sensors_path);
  fp.add_file("mobility", counts_path);
  fp.add_file("residents", residents_path);
  fp.add_file("population", population_path);
  fp.add_file("cellmap", cellmap_path);
  fp.add("rush_hours", rush_hours);

  const io::NetworkFile nf = io::load_network(c.network_path);
  const Network& net = nf.network;

  std::vector<int> hours;
  {
    std::stringstream ss(rush_hours);
    std::string tok;
    while (std::getline(ss, tok, ','))
      hours.push_back(std::stoi(tok));
  }

  const auto records = io::load_sensor_csv(sensors_path);
  DataQualityReport report;
  const EdgeDayStats stats = edge_daily_stats(records, hours, &report);
  const auto a_hat = fit_free_flow(records, 3, &report);
  const auto b_hat = fit_bpr_slope(stats, a_hat, &report);

  std::ostringstream bpr;
  bpr << "# config_hash=" << fp.hex() << " version=" << io::kToolVersion
      << "\n";
  bpr << "edge,a,b\n";
  bpr.precision(17);
  for (const auto& [edge, a] : a_hat)
    bpr << edge << ',' << a << ',' << b_hat.at(edge) << '\n';
  write_out(c, "bpr_fit.csv", bpr.str());

  // Network-wide daily flow totals for the per-day demand scaling.
  std::map<int, double> daily_totals;
  for (const auto& [edge, days] : stats)
    for (const auto& [day, st] : days) daily_totals[day] += st.flow;

  const MobilityTable mobility =
      io::load_mobility(counts_path, residents_path, population_path,
                        static_cast<int>(hours.size()));
  const auto cell_map = io::load_cell_map(cellmap_path);
  const DemandCalibration cal =
      calibrate_demand(net, mobility, cell_map, daily_totals);

  write_out(c, "demand.csv",
            "# config_hash=" + fp.hex() + " version=" + io::kToolVersion +
                "\n" +
                io::demand_csv(net, cal.type_labels, cal.base, cal.daily));

  json j;
  j["tool"] = "tollopt";
  j["version"] = io::kToolVersion;
  j["config_hash"] = fp.hex();
  j["complete_tuples"] = report.complete_tuples;
  j["dropped_tuples"] = report.dropped_tuples;
  j["dropped_by_edge"] = report.dropped_by_edge;
  j["notes"] = report.notes;
  j["raw_device_total"] = cal.raw_total;
  j["corrected_device_total"] = cal.corrected_total;
  json scales = json::object();
  for (const auto& [day, s] : cal.day_scale)
    scales[std::to_string(day)] = s;
  j["day_scale"] = std::move(scales);
  write_out(c, "calibration_report.json", j.dump(2) + "\n");
  return kExitOk;
}

int cmd_estimate_vot(const Common& c, const std::string& demand_path,
                     const std::string& tolls_path,
                     const std::string& flows_path, double grid_min,
                     double grid_max, double grid_step) {
  Fingerprint fp("estimate-vot");
  fp.add_file("network", c.network_path);
  fp.add_file("demand", demand_path);
  fp.add_file("flows", flows_path);
  if (!tolls_path.empty()) fp.add_file("tolls", tolls_path);
  fp.add("grid_min", grid_min);
  fp.add("grid_max", grid_max);
  fp.add("grid_step", grid_step);
  fp.add("tol", c.tol);

  const io::NetworkFile nf = io::load_network(c.network_path);
  const VotProfile vot = require_vot(nf);
  const Network& net = nf.network;
  const io::DemandData demand = io::load_demand(demand_path, net, vot);
  if (demand.daily.empty())
    throw InputError("estimate-vot needs a demand file with a day column");
  const TollScheme tolls = tolls_path.empty()
                               ? TollScheme::zero(net.num_edges())
                               : io::load_tolls(tolls_path, net, vot);
  const auto observed = io::load_observed_flows(flows_path, net);

  const VotGrid grid =
      VotGrid::uniform(vot.num_types(), grid_min, grid_max, grid_step);
  const VotEstimate est = estimate_vot(net, vot.labels(), demand.daily,
                                       observed, tolls, grid, c.tol);

  json j;
  j["tool"] = "tollopt";
  j["version"] = io::kToolVersion;
  j["config_hash"] = fp.hex();
  json theta = json::object();
  for (int i = 0; i < vot.num_types(); ++i)
    theta[vot.labels()[i]] = est.theta[i];
  j["theta"] = std::move(theta);
  j["squared_error"] = est.squared_error;
  j["grid_size"] = grid.candidates.size();
  j["evaluated"] = est.candidate_errors.size();
  j["invalid"] = est.invalid_candidates.size();
  j["notes"] = est.notes;
  write_out(c, "vot.json", j.dump(2) + "\n");
  return kExitOk;
}

int cmd_evaluate(const Common& c, const std::string& demand_path,
                 const std::string& tolls_path, const std::string& flows_path,
                 const std::string& context_str, double lambda) {
  Fingerprint fp("evaluate");
  fp.add_file("network", c.network_path);
  fp.add_file("demand", demand_path);
  if (!tolls_path.empty()) fp.add_file("tolls", tolls_path);
  if (!flows_path.empty()) fp.add_file("flows", flows_path);
  fp.add("context", context_str);
  fp.add("lambda", lambda);
  fp.add("tol", c.tol);

  const io::NetworkFile nf = io::load_network(c.network_path);
  const VotProfile vot = require_vot(nf);
  const Network& net = nf.network;
  const DemandMatrix demand =
      io::single_demand(io::load_demand(demand_path, net, vot));
  const TollScheme tolls = tolls_path.empty()
                               ? TollScheme::zero(net.num_edges())
                               : io::load_tolls(tolls_path, net, vot);

  MetricsReport report;
  if (context_str == "design") {
    // Design-time metrics need the design flows: from the design JSON.
    if (tolls_path.size() <= 5 ||
        tolls_path.substr(tolls_path.size() - 5) != ".json")
      throw InputError(
          "design-time context needs a design .json tolls file carrying "
          "w_dagger");
    const DesignOutput d = io::load_design_json(tolls_path, net, vot);
    if (static_cast<int>(d.w_dagger.size()) != net.num_edges())
      throw InputError("design file lacks w_dagger");
    report = compute_metrics(net, demand, vot, tolls, lambda,
                             MetricsContext::design_time, d.w_dagger,
                             kDefaultThresholdsMin, c.tol);
  } else if (context_str == "realized") {
    if (!flows_path.empty()) {
      const EdgeFlows flows = io::load_edge_flows(flows_path, net, vot);
      report = compute_metrics_at(net, demand, vot, tolls, lambda, flows);
    } else {
      report = compute_metrics(net, demand, vot, tolls, lambda,
                               MetricsContext::realized, {},
                               kDefaultThresholdsMin, c.tol);
    }
  } else {
    throw InputError("--context must be 'design' or 'realized'");
  }
  write_out(c, "metrics.json", io::metrics_json(report, net, vot, fp.hex()));

  std::ostringstream thr;
  thr << "# config_hash=" << fp.hex() << " version=" << io::kToolVersion
      << "\n";
  thr << "type,threshold_min,fraction\n";
  thr.precision(17);
  for (std::size_t row = 0; row < report.thresholds.types.size(); ++row)
    for (std::size_t t = 0; t < report.thresholds.thresholds_min.size(); ++t)
      thr << vot.labels()[report.thresholds.types[row]] << ','
          << report.thresholds.thresholds_min[t] << ','
          << report.thresholds.fraction[row][t] << '\n';
  write_out(c, "metrics_thresholds.csv", thr.str());

  std::ostringstream costs;
  costs << "# config_hash=" << fp.hex() << " version=" << io::kToolVersion
        << "\n";
  costs << "type,origin,destination,cost_min,baseline_min\n";
  costs.precision(17);
  for (int i = 0; i < vot.num_types(); ++i)
    for (int k = 0; k < net.num_od_pairs(); ++k) {
      const OdPair& od = net.od_pairs()[k];
      const std::size_t ik =
          static_cast<std::size_t>(i) * net.num_od_pairs() + k;
      costs << vot.labels()[i] << ',' << net.node_ids()[od.origin] << ','
            << net.node_ids()[od.destination] << ','
            << 60.0 * report.costs[ik] << ',' << 60.0 * report.baseline[ik]
            << '\n';
    }
  write_out(c, "metrics_costs.csv", costs.str());
  return kExitOk;
}

int cmd_pareto(const Common& c, const std::string& demand_path, double lambda,
               int samples, std::uint64_t seed) {
  Fingerprint fp("pareto");
  fp.add_file("network", c.network_path);
  fp.add_file("demand", demand_path);
  fp.add("lambda", lambda);
  fp.add("samples", static_cast<double>(samples));
  fp.add("seed", static_cast<double>(seed));
  fp.add("tol", c.tol);

  const io::NetworkFile nf = io::load_network(c.network_path);
  const VotProfile vot = require_vot(nf);
  const Network& net = nf.network;
  const DemandMatrix demand =
      io::single_demand(io::load_demand(demand_path, net, vot));

  const std::vector<ParetoPoint> points =
      pareto_front(net, demand, vot, lambda, samples, seed, c.tol);

  write_out(c, "pareto.csv",
            "# config_hash=" + fp.hex() + " version=" + io::kToolVersion +
                "\n" + io::pareto_csv(points));
  for (SchemeKind kind : {SchemeKind::hom, SchemeKind::het}) {
    std::ostringstream os;
    os << "sample,avg_time_min,equity,dominated\n";
    os.precision(17);
    for (const ParetoPoint& p : points) {
      if (p.scheme != kind || p.failed) continue;
      os << p.sample << ',' << p.avg_time_min << ',' << p.equity << ','
         << (p.dominated ? 1 : 0) << '\n';
    }
    write_out(c,
              std::string("pareto_") + scheme_name(kind) + ".csv", os.str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"traffic equilibrium and congestion pricing toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string demand_path, tolls_path, flows_path, support_path;
  std::string scheme_str = "hom", context_str = "realized";
  std::string sensors_path, counts_path, residents_path, population_path,
      cellmap_path;
  std::string rush_hours = "6,7,8,9,10,11";
  double lambda = 20.0;
  double grid_min = 0.0, grid_max = 100.0, grid_step = 5.0;
  int samples = 100;
  std::uint64_t seed = 1;

  auto add_common = [&](CLI::App* cmd, bool with_demand = true) {
    cmd->add_option("--network", common.network_path, "network JSON file")
        ->required();
    if (with_demand)
      cmd->add_option("--demand", demand_path, "demand CSV file")->required();
    cmd->add_option("--tol", common.tol, "solver relative-gap tolerance");
    cmd->add_option("--out", common.out_dir, "output directory");
  };

  CLI::App* eq = app.add_subcommand(
      "equilibrium", "solve the routing equilibrium under given tolls");
  add_common(eq);
  eq->add_option("--tolls", tolls_path, "toll CSV or design JSON");
  eq->add_option("--max-iters", common.max_iters, "solver iteration cap");

  CLI::App* de = app.add_subcommand(
      "design", "compute a congestion pricing scheme");
  add_common(de);
  de->add_option("--scheme", scheme_str, "hom | het | hom-sc | het-sc");
  de->add_option("--lambda", lambda, "equity-welfare trade-off weight");
  de->add_option("--support", support_path,
                 "edge-id list file overriding the tollable flags");

  CLI::App* ca = app.add_subcommand(
      "calibrate", "fit latency parameters and demands from raw tables");
  add_common(ca, /*with_demand=*/false);
  ca->add_option("--sensors", sensors_path, "sensor CSV")->required();
  ca->add_option("--mobility", counts_path, "device count CSV")->required();
  ca->add_option("--residents", residents_path, "resident count CSV")
      ->required();
  ca->add_option("--population", population_path, "driving population CSV")
      ->required();
  ca->add_option("--cellmap", cellmap_path, "cell-to-node CSV")->required();
  ca->add_option("--rush-hours", rush_hours, "comma-separated hour list");

  CLI::App* ev = app.add_subcommand(
      "estimate-vot", "grid-search the value-of-time parameters");
  add_common(ev);
  ev->add_option("--tolls", tolls_path, "current toll CSV or design JSON");
  ev->add_option("--flows", flows_path, "observed daily flows CSV")
      ->required();
  ev->add_option("--grid-min", grid_min, "grid lower bound, $/hour");
  ev->add_option("--grid-max", grid_max, "grid upper bound, $/hour");
  ev->add_option("--grid-step", grid_step, "grid granularity, $/hour");

  CLI::App* me = app.add_subcommand(
      "evaluate", "efficiency/equity/revenue metrics for a toll scheme");
  add_common(me);
  me->add_option("--tolls", tolls_path, "toll CSV or design JSON");
  me->add_option("--flows", flows_path,
                 "edge flows CSV (skip the equilibrium re-solve)");
  me->add_option("--context", context_str, "design | realized");
  me->add_option("--lambda", lambda, "equity-welfare trade-off weight");

  CLI::App* pa = app.add_subcommand(
      "pareto", "sample the efficiency-equity trade-off frontier");
  add_common(pa);
  pa->add_option("--lambda", lambda, "equity-welfare trade-off weight");
  pa->add_option("--samples", samples, "number of weight samples");
  pa->add_option("--seed", seed, "random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (eq->parsed()) return cmd_equilibrium(common, demand_path, tolls_path);
    if (de->parsed())
      return cmd_design(common, demand_path, scheme_str, lambda, support_path);
    if (ca->parsed())
      return cmd_calibrate(common, sensors_path, counts_path, residents_path,
                           population_path, cellmap_path, rush_hours);
    if (ev->parsed())
      return cmd_estimate_vot(common, demand_path, tolls_path, flows_path,
                              grid_min, grid_max, grid_step);
    if (me->parsed())
      return cmd_evaluate(common, demand_path, tolls_path, flows_path,
                          context_str, lambda);
    if (pa->parsed())
      return cmd_pareto(common, demand_path, lambda, samples, seed);
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const LpError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitLpFailure;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
