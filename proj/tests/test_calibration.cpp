#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "tollopt/calibration.hpp"
#include "tollopt/equilibrium.hpp"

using namespace tollopt;

namespace {

// One segment (two sensors) on `edge`: travel time t hours over 60 miles,
// uniform reading for the given hour/day.
void add_reading(std::vector<SensorRecord>& rec, const std::string& edge,
                 int day, int hour, double time_hours, double flow) {
  rec.push_back({edge, 0, day, hour, 60.0 / time_hours, flow, 60.0});
  rec.push_back({edge, 1, day, hour, 1.0, 0.0, 0.0});  // segment end marker
}

}  // namespace

TEST_CASE("hourly and daily sensor aggregation") {
  SUBCASE("uniform hours give the plain travel time") {
    std::vector<SensorRecord> rec;
    for (int h : kDefaultRushHours) add_reading(rec, "e", 1, h, 1.0, 500.0);
    const EdgeDayStats stats = edge_daily_stats(rec);
    CHECK(stats.at("e").at(1).time_hours == doctest::Approx(1.0));
    CHECK(stats.at("e").at(1).flow == doctest::Approx(500.0));
  }
  SUBCASE("flow-weighted daily time") {
    std::vector<SensorRecord> rec;
    add_reading(rec, "e", 1, 6, 1.0, 100.0);
    add_reading(rec, "e", 1, 7, 2.0, 300.0);
    const EdgeDayStats stats = edge_daily_stats(rec, {6, 7});
    CHECK(stats.at("e").at(1).time_hours == doctest::Approx(1.75));
    CHECK(stats.at("e").at(1).flow == doctest::Approx(200.0));
  }
  SUBCASE("zero flow falls back to the unweighted mean") {
    std::vector<SensorRecord> rec;
    add_reading(rec, "e", 1, 6, 1.0, 0.0);
    add_reading(rec, "e", 1, 7, 2.0, 0.0);
    DataQualityReport report;
    const EdgeDayStats stats = edge_daily_stats(rec, {6, 7}, &report);
    CHECK(stats.at("e").at(1).time_hours == doctest::Approx(1.5));
    CHECK(report.notes.size() == 1);
  }
  SUBCASE("incomplete and rejected tuples are dropped and counted") {
    std::vector<SensorRecord> rec;
    add_reading(rec, "e", 1, 6, 1.0, 100.0);
    // hour 7 misses sensor 1
    rec.push_back({"e", 0, 1, 7, 60.0, 100.0, 60.0});
    // hour 8 has a zero speed
    rec.push_back({"e", 0, 1, 8, 0.0, 100.0, 60.0});
    rec.push_back({"e", 1, 1, 8, 1.0, 0.0, 0.0});
    DataQualityReport report;
    const EdgeDayStats stats = edge_daily_stats(rec, {6, 7, 8}, &report);
    CHECK(report.complete_tuples == 1);
    CHECK(report.dropped_tuples == 2);
    CHECK(report.dropped_by_edge.at("e") == 2);
    CHECK(stats.at("e").at(1).time_hours == doctest::Approx(1.0));
  }
  SUBCASE("an edge with a single sensor is an error") {
    std::vector<SensorRecord> rec;
    rec.push_back({"solo", 0, 1, 6, 60.0, 100.0, 60.0});
    CHECK_THROWS_WITH_AS(edge_daily_stats(rec),
                         doctest::Contains("solo"), InputError);
  }
}

TEST_CASE("free-flow estimation from night hours") {
  SUBCASE("mean over days") {
    std::vector<SensorRecord> rec;
    add_reading(rec, "e", 1, 3, 0.4, 10.0);
    add_reading(rec, "e", 2, 3, 0.6, 10.0);
    CHECK(fit_free_flow(rec).at("e") == doctest::Approx(0.5));
  }
  SUBCASE("single day") {
    std::vector<SensorRecord> rec;
    add_reading(rec, "e", 7, 3, 0.5, 10.0);
    CHECK(fit_free_flow(rec).at("e") == doctest::Approx(0.5));
  }
  SUBCASE("edge without night data is named in the error") {
    std::vector<SensorRecord> rec;
    add_reading(rec, "good", 1, 3, 0.5, 10.0);
    add_reading(rec, "bad", 1, 6, 0.5, 10.0);
    CHECK_THROWS_WITH_AS(fit_free_flow(rec), doctest::Contains("bad"),
                         InputError);
  }
}

TEST_CASE("BPR slope least squares") {
  SUBCASE("noiseless data recovers the generating slope exactly") {
    EdgeDayStats stats;
    stats["e"][1] = {2.0 + 3.0 * 1.0, 1.0};   // t = 2 + 3 w^4, w = 1
    stats["e"][2] = {2.0 + 3.0 * 16.0, 2.0};  // w = 2
    const auto b = fit_bpr_slope(stats, {{"e", 2.0}});
    CHECK(b.at("e") == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("flat observations give zero slope") {
    EdgeDayStats stats;
    stats["e"][1] = {2.0, 1.0};
    stats["e"][2] = {2.0, 2.0};
    CHECK(fit_bpr_slope(stats, {{"e", 2.0}}).at("e") == 0.0);
  }
  SUBCASE("negative residuals clamp at zero") {
    EdgeDayStats stats;
    stats["e"][1] = {1.5, 1.0};  // below the intercept
    CHECK(fit_bpr_slope(stats, {{"e", 2.0}}).at("e") == 0.0);
  }
  SUBCASE("zero flows everywhere warn and return zero") {
    EdgeDayStats stats;
    stats["e"][1] = {2.5, 0.0};
    DataQualityReport report;
    CHECK(fit_bpr_slope(stats, {{"e", 2.0}}, &report).at("e") == 0.0);
    CHECK(report.notes.size() == 1);
  }
  SUBCASE("estimate is the exact least-squares minimizer") {
    testutil::Uniform u(5);
    for (int trial = 0; trial < 5; ++trial) {
      EdgeDayStats stats;
      const double a = u.next(0.5, 2.0);
      for (int day = 0; day < 8; ++day)
        stats["e"][day] = {a + u.next(0.0, 3.0), u.next(0.1, 2.0)};
      const double b = fit_bpr_slope(stats, {{"e", a}}).at("e");
      auto loss = [&](double bb) {
        double s = 0.0;
        for (const auto& [day, st] : stats.at("e")) {
          const double f2 = st.flow * st.flow;
          const double r = st.time_hours - a - bb * f2 * f2;
          s += r * r;
        }
        return s;
      };
      CHECK(loss(b) <= loss(b + 1e-3) + 1e-15);
      CHECK(loss(b) <= loss(std::max(0.0, b - 1e-3)) + 1e-15);
    }
  }
}

namespace {

Network demand_net() {
  std::vector<Edge> edges;
  edges.push_back({"ab", 0, 1, 1.0, 0.1, 0.0, true});
  edges.push_back({"ac", 0, 2, 1.0, 0.1, 0.0, true});
  edges.push_back({"bc", 1, 2, 1.0, 0.1, 0.0, true});
  return Network::build({"a", "b", "c"}, std::move(edges),
                        {{0, 1}, {0, 2}});
}

}  // namespace

TEST_CASE("demand pipeline") {
  const Network net = demand_net();
  const std::map<std::string, std::string> cellmap = {
      {"c1", "a"}, {"c2", "b"}, {"c3", "c"}};

  SUBCASE("uniform sampling leaves counts unchanged") {
    MobilityTable mob;
    mob.counts = {{{"c1", "c2"}, 10.0},
                  {{"c1", "c3"}, 10.0},
                  {{"c2", "c1"}, 10.0},
                  {{"c2", "c3"}, 10.0}};
    mob.residents = {{"c1", 100.0}, {"c2", 100.0}};
    mob.driving_population = {{{"a", "low"}, 60.0}};
    mob.rush_hour_count = 6;
    const DemandCalibration cal = calibrate_demand(net, mob, cellmap);
    for (const auto& [od, v] : cal.corrected_counts)
      CHECK(v == doctest::Approx(10.0));
    CHECK(cal.corrected_total == doctest::Approx(cal.raw_total));
    // Origin a splits its population by od share (here 1/2 and 1/2).
    CHECK(cal.base.at(0, net.od_index(0, 1)) == doctest::Approx(30.0 / 6.0));
    CHECK(cal.base.at(0, net.od_index(0, 2)) == doctest::Approx(30.0 / 6.0));
  }

  SUBCASE("single od per origin takes the whole population") {
    MobilityTable mob;
    mob.counts = {{{"c1", "c2"}, 4.0}};
    mob.residents = {{"c1", 50.0}};
    mob.driving_population = {{{"a", "low"}, 42.0}, {{"a", "high"}, 7.0}};
    mob.rush_hour_count = 6;
    const DemandCalibration cal = calibrate_demand(net, mob, cellmap);
    CHECK(cal.base.at(0, net.od_index(0, 1)) == doctest::Approx(42.0 / 6.0));
    CHECK(cal.base.at(1, net.od_index(0, 1)) == doctest::Approx(7.0 / 6.0));
    CHECK(cal.base.at(0, net.od_index(0, 2)) == 0.0);
  }

  SUBCASE("grand total is preserved when every row has positive sum") {
    testutil::Uniform u(21);
    MobilityTable mob;
    const std::vector<std::string> cells = {"c1", "c2", "c3"};
    for (const auto& from : cells) {
      mob.residents[from] = u.next(10.0, 100.0);
      for (const auto& to : cells)
        mob.counts.push_back({{from, to}, u.next(1.0, 9.0)});
    }
    mob.driving_population = {{{"a", "low"}, 10.0}};
    mob.rush_hour_count = 6;
    const DemandCalibration cal = calibrate_demand(net, mob, cellmap);
    CHECK(cal.corrected_total ==
          doctest::Approx(cal.raw_total).epsilon(1e-9));
  }

  SUBCASE("daily scaling is proportional and unit at the mean") {
    MobilityTable mob;
    mob.counts = {{{"c1", "c2"}, 4.0}};
    mob.residents = {{"c1", 50.0}};
    mob.driving_population = {{{"a", "low"}, 12.0}};
    mob.rush_hour_count = 6;
    const std::map<int, double> totals = {{1, 100.0}, {2, 300.0}};
    const DemandCalibration cal =
        calibrate_demand(net, mob, cellmap, totals);
    const int k = net.od_index(0, 1);
    CHECK(cal.day_scale.at(1) == doctest::Approx(0.5));
    CHECK(cal.day_scale.at(2) == doctest::Approx(1.5));
    CHECK(cal.daily.at(1).at(0, k) ==
          doctest::Approx(0.5 * cal.base.at(0, k)));
    CHECK(cal.daily.at(2).at(0, k) ==
          doctest::Approx(1.5 * cal.base.at(0, k)));
  }

  SUBCASE("population without relative demand is an error") {
    MobilityTable mob;
    mob.counts = {{{"c2", "c3"}, 4.0}};  // nothing leaves node a
    mob.residents = {{"c2", 50.0}};
    mob.driving_population = {{{"a", "low"}, 10.0}};
    mob.rush_hour_count = 6;
    CHECK_THROWS_AS(calibrate_demand(net, mob, cellmap), InputError);
  }
}

TEST_CASE("value-of-time grid") {
  const VotGrid g = VotGrid::uniform(2, 0.0, 10.0, 5.0);
  // levels {0,5,10}, nonincreasing pairs
  CHECK(g.candidates.size() == 6);
  for (const auto& c : g.candidates) CHECK(c[0] >= c[1]);
  // sorted lexicographically
  for (std::size_t i = 1; i < g.candidates.size(); ++i)
    CHECK(g.candidates[i - 1] < g.candidates[i]);
}

TEST_CASE("value-of-time estimation") {
  const Network net = testutil::two_route_network(0.5, 0.7, 0.3, 0.3);
  const std::vector<std::string> labels = {"hi", "lo"};
  const TollScheme tolls = TollScheme::homogeneous({3.0, 0.0});

  std::map<int, DemandMatrix> daily;
  for (int day : {1, 2}) {
    DemandMatrix d(2, 1);
    d.set(0, 0, day == 1 ? 1.0 : 1.2);
    d.set(1, 0, day == 1 ? 0.8 : 1.0);
    daily.emplace(day, std::move(d));
  }

  // Forward-simulate the observations at the true parameters.
  const std::vector<double> truth = {40.0, 10.0};
  std::map<int, std::vector<double>> observed;
  SolverOptions opts;
  opts.tol = 1e-9;
  for (const auto& [day, d] : daily)
    observed[day] =
        solve_equilibrium(net, d, VotProfile(labels, truth), tolls, opts)
            .flows.aggregate;

  SUBCASE("grid of size one returns its only candidate") {
    VotGrid g;
    g.candidates = {{25.0, 5.0}};
    const VotEstimate est =
        estimate_vot(net, labels, daily, observed, tolls, g);
    CHECK(est.raw == std::vector<double>{25.0, 5.0});
  }
  SUBCASE("self-consistency recovery and order invariance") {
    VotGrid g;
    for (double hi : {20.0, 30.0, 40.0, 50.0})
      for (double lo : {5.0, 10.0, 15.0})
        g.candidates.push_back({hi, lo});
    const VotEstimate est =
        estimate_vot(net, labels, daily, observed, tolls, g, 1e-9);
    CHECK(est.raw == truth);
    CHECK(est.squared_error <= 1e-12);

    VotGrid shuffled;
    for (auto it = g.candidates.rbegin(); it != g.candidates.rend(); ++it)
      shuffled.candidates.push_back(*it);
    const VotEstimate est2 =
        estimate_vot(net, labels, daily, observed, tolls, shuffled, 1e-9);
    CHECK(est2.raw == est.raw);
    CHECK(est2.squared_error == doctest::Approx(est.squared_error));
  }
  SUBCASE("zero grid values are floored to one and noted") {
    VotGrid g;
    g.candidates = {{10.0, 0.0}};
    const VotEstimate est =
        estimate_vot(net, labels, daily, observed, tolls, g);
    CHECK(est.theta == std::vector<double>{10.0, 1.0});
    CHECK(est.notes.size() == 1);
  }
}
