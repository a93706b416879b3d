#include "tollopt/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tollopt::io {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (std::string& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }
  return out;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name, bool required = true) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      if (required)
        throw InputError("missing required CSV column '" + name + "'");
      return -1;
    }
    return static_cast<int>(it - header.begin());
  }
};

Csv load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  Csv csv;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto fields = split_csv_line(line);
    if (first) {
      csv.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != csv.header.size())
        throw InputError("ragged CSV row in '" + path + "'");
      csv.rows.push_back(std::move(fields));
    }
  }
  if (first) throw InputError("'" + path + "' is empty");
  return csv;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("cannot parse " + what + " value '" + s + "'");
  }
}

int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InputError("cannot parse " + what + " value '" + s + "'");
  }
}

json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in '" + path + "': " + e.what());
  }
  return j;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
}

NetworkFile load_network(const std::string& path) {
  const json j = parse_json_file(path);
  try {
    std::vector<std::string> nodes = j.at("nodes").get<std::vector<std::string>>();
    std::map<std::string, int> node_idx;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      node_idx[nodes[i]] = static_cast<int>(i);
    auto node_of = [&](const std::string& id) {
      const auto it = node_idx.find(id);
      if (it == node_idx.end()) throw InputError("unknown node '" + id + "'");
      return it->second;
    };

    std::vector<Edge> edges;
    std::map<std::string, int> edge_idx;
    for (const json& je : j.at("edges")) {
      Edge e;
      e.id = je.at("id").get<std::string>();
      e.tail = node_of(je.at("tail").get<std::string>());
      e.head = node_of(je.at("head").get<std::string>());
      e.free_flow_hours = je.at("a").get<double>();
      e.congestion_slope = je.at("b").get<double>();
      e.gas_cost = je.value("gas", 0.0);
      e.tollable = je.value("tollable", true);
      edge_idx[e.id] = static_cast<int>(edges.size());
      edges.push_back(std::move(e));
    }

    std::vector<OdPair> ods;
    for (const json& jo : j.at("od_pairs"))
      ods.push_back({node_of(jo.at("origin").get<std::string>()),
                     node_of(jo.at("destination").get<std::string>())});

    std::vector<std::vector<Route>> routes;
    if (j.contains("routes")) {
      routes.resize(ods.size());
      std::vector<char> seen(ods.size(), 0);
      for (const json& jr : j.at("routes")) {
        const int o = node_of(jr.at("origin").get<std::string>());
        const int d = node_of(jr.at("destination").get<std::string>());
        int k = -1;
        for (std::size_t i = 0; i < ods.size(); ++i)
          if (ods[i].origin == o && ods[i].destination == d)
            k = static_cast<int>(i);
        if (k < 0)
          throw InputError("routes listed for an undeclared od pair");
        seen[k] = 1;
        for (const json& jroute : jr.at("routes")) {
          Route r;
          for (const json& jid : jroute) {
            const auto it = edge_idx.find(jid.get<std::string>());
            if (it == edge_idx.end())
              throw InputError("route references unknown edge '" +
                               jid.get<std::string>() + "'");
            r.push_back(it->second);
          }
          routes[k].push_back(std::move(r));
        }
      }
      for (std::size_t k = 0; k < ods.size(); ++k)
        if (!seen[k])
          throw InputError(
              "network file lists routes for some od pairs but not all");
    }

    const int max_hops = j.value("max_hops", Network::kDefaultMaxHops);
    NetworkFile out{Network::build(std::move(nodes), std::move(edges),
                                   std::move(ods), std::move(routes), max_hops),
                    std::nullopt};

    if (j.contains("vot_types")) {
      std::vector<std::string> labels;
      std::vector<double> theta;
      for (const json& jt : j.at("vot_types")) {
        labels.push_back(jt.at("label").get<std::string>());
        theta.push_back(jt.at("vot_dollars_per_hour").get<double>());
      }
      out.vot = VotProfile(std::move(labels), std::move(theta));
    }
    return out;
  } catch (const json::exception& e) {
    throw InputError("malformed network file '" + path + "': " + e.what());
  }
}

DemandData load_demand(const std::string& path, const Network& net,
                       const VotProfile& vot) {
  const Csv csv = load_csv(path);
  const int c_type = csv.column("type");
  const int c_orig = csv.column("origin");
  const int c_dest = csv.column("destination");
  const int c_dem = csv.column("demand");
  const int c_day = csv.column("day", /*required=*/false);

  DemandData data;
  auto table = [&](std::optional<int> day) -> DemandMatrix& {
    if (!day) {
      if (!data.base)
        data.base.emplace(vot.num_types(), net.num_od_pairs());
      return *data.base;
    }
    return data.daily
        .try_emplace(*day, vot.num_types(), net.num_od_pairs())
        .first->second;
  };

  for (const auto& row : csv.rows) {
    const int type = vot.type_index(row[c_type]);
    const int o = net.node_index(row[c_orig]);
    const int d = net.node_index(row[c_dest]);
    const int k = net.od_index(o, d);
    if (k < 0)
      throw InputError("demand row references undeclared od pair " +
                       row[c_orig] + " -> " + row[c_dest]);
    const double demand = parse_double(row[c_dem], "demand");
    std::optional<int> day;
    if (c_day >= 0 && !row[c_day].empty())
      day = parse_int(row[c_day], "day");
    DemandMatrix& m = table(day);
    m.set(type, k, m.at(type, k) + demand);
  }
  return data;
}

DemandMatrix single_demand(const DemandData& data) {
  if (data.base && data.daily.empty()) return *data.base;
  if (!data.base && data.daily.size() == 1) return data.daily.begin()->second;
  throw InputError(
      "expected a single demand table; give a file without a day column or "
      "with exactly one day");
}

TollScheme load_tolls(const std::string& path, const Network& net,
                      const VotProfile& vot) {
  if (path.size() > 5 && path.substr(path.size() - 5) == ".json") {
    const DesignOutput out = load_design_json(path, net, vot);
    return out.tolls;
  }
  const Csv csv = load_csv(path);
  const int c_edge = csv.column("edge");
  const int c_type = csv.column("type");
  const int c_price = csv.column("price");

  bool heterogeneous = false;
  for (const auto& row : csv.rows)
    if (row[c_type] != "*") heterogeneous = true;

  const int E = net.num_edges();
  const int I = vot.num_types();
  if (!heterogeneous) {
    std::vector<double> p(E, 0.0);
    for (const auto& row : csv.rows)
      p[net.edge_index(row[c_edge])] += parse_double(row[c_price], "price");
    return TollScheme::homogeneous(std::move(p));
  }
  std::vector<double> p(static_cast<std::size_t>(I) * E, 0.0);
  for (const auto& row : csv.rows) {
    const int e = net.edge_index(row[c_edge]);
    const double price = parse_double(row[c_price], "price");
    if (row[c_type] == "*") {
      for (int i = 0; i < I; ++i)
        p[static_cast<std::size_t>(i) * E + e] += price;
    } else {
      p[static_cast<std::size_t>(vot.type_index(row[c_type])) * E + e] += price;
    }
  }
  return TollScheme::heterogeneous(E, I, std::move(p));
}

std::vector<char> load_support(const std::string& path, const Network& net) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::vector<char> support(net.num_edges(), 0);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    support[net.edge_index(line.substr(b, e - b + 1))] = 1;
  }
  return support;
}

std::vector<SensorRecord> load_sensor_csv(const std::string& path) {
  const Csv csv = load_csv(path);
  const int c_edge = csv.column("edge");
  const int c_sensor = csv.column("sensor");
  const int c_day = csv.column("day");
  const int c_hour = csv.column("hour");
  const int c_speed = csv.column("speed_mph");
  const int c_flow = csv.column("flow_vph");
  const int c_dist = csv.column("dist_next_miles");
  std::vector<SensorRecord> out;
  out.reserve(csv.rows.size());
  for (const auto& row : csv.rows) {
    SensorRecord r;
    r.edge = row[c_edge];
    r.sensor = parse_int(row[c_sensor], "sensor");
    r.day = parse_int(row[c_day], "day");
    r.hour = parse_int(row[c_hour], "hour");
    r.speed_mph = parse_double(row[c_speed], "speed_mph");
    r.flow_vph = parse_double(row[c_flow], "flow_vph");
    r.dist_next_miles = parse_double(row[c_dist], "dist_next_miles");
    out.push_back(std::move(r));
  }
  return out;
}

MobilityTable load_mobility(const std::string& counts_path,
                            const std::string& residents_path,
                            const std::string& population_path,
                            int rush_hour_count) {
  MobilityTable mob;
  mob.rush_hour_count = rush_hour_count;
  {
    const Csv csv = load_csv(counts_path);
    const int c_o = csv.column("origin_cell");
    const int c_d = csv.column("dest_cell");
    const int c_n = csv.column("count");
    for (const auto& row : csv.rows)
      mob.counts.push_back(
          {{row[c_o], row[c_d]}, parse_double(row[c_n], "count")});
  }
  {
    const Csv csv = load_csv(residents_path);
    const int c_c = csv.column("cell");
    const int c_r = csv.column("residents");
    for (const auto& row : csv.rows)
      mob.residents[row[c_c]] = parse_double(row[c_r], "residents");
  }
  {
    const Csv csv = load_csv(population_path);
    const int c_n = csv.column("node");
    const int c_t = csv.column("type");
    const int c_p = csv.column("driving_pop");
    for (const auto& row : csv.rows)
      mob.driving_population.push_back(
          {{row[c_n], row[c_t]}, parse_double(row[c_p], "driving_pop")});
  }
  return mob;
}

std::map<std::string, std::string> load_cell_map(const std::string& path) {
  const Csv csv = load_csv(path);
  const int c_c = csv.column("cell");
  const int c_n = csv.column("node");
  std::map<std::string, std::string> out;
  for (const auto& row : csv.rows) out[row[c_c]] = row[c_n];
  return out;
}

std::map<int, std::vector<double>> load_observed_flows(const std::string& path,
                                                       const Network& net) {
  const Csv csv = load_csv(path);
  const int c_e = csv.column("edge");
  const int c_d = csv.column("day");
  const int c_f = csv.column("flow");
  std::map<int, std::vector<double>> out;
  for (const auto& row : csv.rows) {
    const int day = parse_int(row[c_d], "day");
    auto [it, fresh] =
        out.try_emplace(day, std::vector<double>(net.num_edges(), 0.0));
    it->second[net.edge_index(row[c_e])] += parse_double(row[c_f], "flow");
  }
  return out;
}

std::string edge_flows_csv(const Network& net, const VotProfile& vot,
                           const EdgeFlows& flows) {
  std::ostringstream os;
  os << "edge,type,flow\n";
  for (int e = 0; e < net.num_edges(); ++e) {
    for (int i = 0; i < vot.num_types(); ++i)
      os << net.edges()[e].id << ',' << vot.labels()[i] << ','
         << fmt(flows.type_flow(i, e)) << '\n';
    os << net.edges()[e].id << ",*," << fmt(flows.aggregate[e]) << '\n';
  }
  return os.str();
}

EdgeFlows load_edge_flows(const std::string& path, const Network& net,
                          const VotProfile& vot) {
  const Csv csv = load_csv(path);
  const int c_e = csv.column("edge");
  const int c_t = csv.column("type");
  const int c_f = csv.column("flow");
  EdgeFlows f;
  f.num_edges = net.num_edges();
  f.num_types = vot.num_types();
  f.per_type.assign(static_cast<std::size_t>(f.num_types) * f.num_edges, 0.0);
  f.aggregate.assign(f.num_edges, 0.0);
  for (const auto& row : csv.rows) {
    if (row[c_t] == "*") continue;  // aggregate rows are rederived
    const int e = net.edge_index(row[c_e]);
    const int i = vot.type_index(row[c_t]);
    f.per_type[static_cast<std::size_t>(i) * f.num_edges + e] +=
        parse_double(row[c_f], "flow");
  }
  for (int i = 0; i < f.num_types; ++i)
    for (int e = 0; e < f.num_edges; ++e)
      f.aggregate[e] += f.per_type[static_cast<std::size_t>(i) * f.num_edges + e];
  return f;
}

std::string route_flows_csv(const Network& net, const VotProfile& vot,
                            const StrategyDistribution& q) {
  std::ostringstream os;
  os << "type,origin,destination,route,edges,flow\n";
  for (std::size_t i = 0; i < q.q.size(); ++i)
    for (int k = 0; k < net.num_od_pairs(); ++k) {
      const OdPair& od = net.od_pairs()[k];
      for (std::size_t r = 0; r < net.routes(k).size(); ++r) {
        os << vot.labels()[i] << ',' << net.node_ids()[od.origin] << ','
           << net.node_ids()[od.destination] << ',' << r << ',';
        const Route& route = net.routes(k)[r];
        for (std::size_t j = 0; j < route.size(); ++j) {
          if (j) os << '|';
          os << net.edges()[route[j]].id;
        }
        os << ',' << fmt(q.q[i][k][r]) << '\n';
      }
    }
  return os.str();
}

namespace {

json toll_json(const TollScheme& tolls, const Network& net,
               const VotProfile& vot) {
  json jt;
  if (tolls.kind() == TollScheme::Kind::homogeneous) {
    jt["kind"] = "homogeneous";
    json prices = json::object();
    for (int e = 0; e < net.num_edges(); ++e)
      prices[net.edges()[e].id] = tolls.price(e, 0);
    jt["prices"] = std::move(prices);
  } else {
    jt["kind"] = "heterogeneous";
    json per_type = json::object();
    for (int i = 0; i < vot.num_types(); ++i) {
      json prices = json::object();
      for (int e = 0; e < net.num_edges(); ++e)
        prices[net.edges()[e].id] = tolls.price(e, i);
      per_type[vot.labels()[i]] = std::move(prices);
    }
    jt["prices"] = std::move(per_type);
  }
  json support = json::array();
  for (int e = 0; e < net.num_edges(); ++e)
    if (tolls.in_support(e)) support.push_back(net.edges()[e].id);
  jt["support"] = std::move(support);
  return jt;
}

json ik_table_json(const std::vector<double>& values, const Network& net,
                   const VotProfile& vot) {
  json arr = json::array();
  const int K = net.num_od_pairs();
  for (int i = 0; i < vot.num_types(); ++i)
    for (int k = 0; k < K; ++k) {
      const OdPair& od = net.od_pairs()[k];
      arr.push_back({{"type", vot.labels()[i]},
                     {"origin", net.node_ids()[od.origin]},
                     {"destination", net.node_ids()[od.destination]},
                     {"value", values[static_cast<std::size_t>(i) * K + k]}});
    }
  return arr;
}

}  // namespace

std::string design_json(const DesignOutput& out, const Network& net,
                        const VotProfile& vot, const std::string& config_hash) {
  json j;
  j["tool"] = "tollopt";
  j["version"] = kToolVersion;
  j["config_hash"] = config_hash;
  j["scheme"] = scheme_name(out.scheme);
  j["lambda"] = out.lambda;
  j["t_star"] = out.t_star;
  j["second_stage_objective"] = out.second_objective;
  j["y"] = out.y;
  j["social_optimum_time_hours"] = out.social_optimum_time;
  j["tolls"] = toll_json(out.tolls, net, vot);
  json w = json::object();
  for (int e = 0; e < net.num_edges(); ++e)
    w[net.edges()[e].id] = out.w_dagger[e];
  j["w_dagger"] = std::move(w);
  if (out.f_dagger) {
    json f = json::object();
    for (int i = 0; i < vot.num_types(); ++i) {
      json fe = json::object();
      for (int e = 0; e < net.num_edges(); ++e)
        fe[net.edges()[e].id] = out.f_dagger->type_flow(i, e);
      f[vot.labels()[i]] = std::move(fe);
    }
    j["f_dagger"] = std::move(f);
    j["flow_disparity"] = out.flow_disparity;
  }
  j["z"] = ik_table_json(out.z, net, vot);
  j["baseline_cost_hours"] = ik_table_json(out.baseline_cost, net, vot);
  if (!out.degenerate_baselines.empty())
    j["degenerate_baselines"] = out.degenerate_baselines;
  return j.dump(2) + "\n";
}

DesignOutput load_design_json(const std::string& path, const Network& net,
                              const VotProfile& vot) {
  const json j = parse_json_file(path);
  try {
    DesignOutput out;
    out.scheme = scheme_from_name(j.at("scheme").get<std::string>());
    out.lambda = j.value("lambda", 20.0);
    out.t_star = j.value("t_star", 0.0);
    out.second_objective = j.value("second_stage_objective", 0.0);
    out.y = j.value("y", 0.0);
    out.social_optimum_time = j.value("social_optimum_time_hours", 0.0);

    const json& jt = j.at("tolls");
    const int E = net.num_edges();
    const int I = vot.num_types();
    std::vector<char> support(E, 0);
    if (jt.contains("support")) {
      for (const json& id : jt.at("support"))
        support[net.edge_index(id.get<std::string>())] = 1;
    } else {
      support.assign(E, 1);
    }
    if (jt.at("kind").get<std::string>() == "homogeneous") {
      std::vector<double> p(E, 0.0);
      for (const auto& [id, price] : jt.at("prices").items())
        p[net.edge_index(id)] = price.get<double>();
      out.tolls = TollScheme::homogeneous(std::move(p), std::move(support));
    } else {
      std::vector<double> p(static_cast<std::size_t>(I) * E, 0.0);
      for (const auto& [label, prices] : jt.at("prices").items()) {
        const int i = vot.type_index(label);
        for (const auto& [id, price] : prices.items())
          p[static_cast<std::size_t>(i) * E + net.edge_index(id)] =
              price.get<double>();
      }
      out.tolls =
          TollScheme::heterogeneous(E, I, std::move(p), std::move(support));
    }
    if (j.contains("w_dagger")) {
      out.w_dagger.assign(E, 0.0);
      for (const auto& [id, v] : j.at("w_dagger").items())
        out.w_dagger[net.edge_index(id)] = v.get<double>();
    }
    return out;
  } catch (const json::exception& e) {
    throw InputError("malformed design file '" + path + "': " + e.what());
  }
}

std::string metrics_json(const MetricsReport& report, const Network& net,
                         const VotProfile& vot,
                         const std::string& config_hash) {
  json j;
  j["tool"] = "tollopt";
  j["version"] = kToolVersion;
  j["config_hash"] = config_hash;
  j["context"] =
      report.context == MetricsContext::design_time ? "design-time" : "realized";
  j["avg_travel_time_min"] = report.avg_travel_time_min;
  json per_type = json::object();
  for (int i = 0; i < vot.num_types(); ++i)
    per_type[vot.labels()[i]] = report.per_type_avg_cost_min[i];
  j["per_type_avg_cost_min"] = std::move(per_type);
  j["equity"] = report.equity;
  j["welfare"] = report.welfare;
  j["lambda"] = report.lambda;
  j["planner_objective"] = report.planner_objective;
  j["revenue_dollars"] = report.revenue_dollars;
  j["total_travel_time_hours"] = report.total_travel_time_hours;
  j["price_of_anarchy"] = report.price_of_anarchy;
  j["costs_min"] = ik_table_json(
      [&] {
        std::vector<double> m(report.costs.size());
        for (std::size_t ik = 0; ik < m.size(); ++ik)
          m[ik] = 60.0 * report.costs[ik];
        return m;
      }(),
      net, vot);
  json thresholds = json::array();
  for (std::size_t row = 0; row < report.thresholds.types.size(); ++row) {
    json jr;
    jr["type"] = vot.labels()[report.thresholds.types[row]];
    json fr = json::object();
    for (std::size_t t = 0; t < report.thresholds.thresholds_min.size(); ++t)
      fr[fmt(report.thresholds.thresholds_min[t])] =
          report.thresholds.fraction[row][t];
    jr["fraction_at_least"] = std::move(fr);
    thresholds.push_back(std::move(jr));
  }
  j["threshold_table"] = std::move(thresholds);
  return j.dump(2) + "\n";
}

std::string pareto_csv(const std::vector<ParetoPoint>& points) {
  std::ostringstream os;
  os << "scheme,sample,avg_time_min,equity,dominated,failed\n";
  for (const ParetoPoint& p : points)
    os << scheme_name(p.scheme) << ',' << p.sample << ','
       << fmt(p.avg_time_min) << ',' << fmt(p.equity) << ','
       << (p.dominated ? 1 : 0) << ',' << (p.failed ? 1 : 0) << '\n';
  return os.str();
}

std::string demand_csv(const Network& net,
                       const std::vector<std::string>& labels,
                       const DemandMatrix& base,
                       const std::map<int, DemandMatrix>& daily) {
  std::ostringstream os;
  const bool with_day = !daily.empty();
  os << "type,origin,destination,demand" << (with_day ? ",day" : "") << '\n';
  auto emit = [&](const DemandMatrix& m, std::optional<int> day) {
    for (int i = 0; i < m.num_types(); ++i)
      for (int k = 0; k < net.num_od_pairs(); ++k) {
        if (m.at(i, k) == 0.0) continue;
        const OdPair& od = net.od_pairs()[k];
        os << labels[i] << ',' << net.node_ids()[od.origin] << ','
           << net.node_ids()[od.destination] << ',' << fmt(m.at(i, k));
        if (with_day) os << ',' << (day ? std::to_string(*day) : "");
        os << '\n';
      }
  };
  if (with_day)
    for (const auto& [day, m] : daily) emit(m, day);
  else
    emit(base, std::nullopt);
  return os.str();
}

std::string config_fingerprint(
    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [k, v] : entries) {
    mix(k);
    mix("=");
    mix(v);
    mix(";");
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tollopt::io
