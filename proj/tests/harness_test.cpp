#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hvac/harness.hpp"

using namespace hvac;
using doctest::Approx;

namespace {

const char* kHeader = "timestamp_iso8601,T_oa_C,RH_oa_pct,eta_sol_Wm2\n";

WeatherSeries parse(const std::string& body) {
  std::istringstream in(std::string(kHeader) + body);
  return parse_weather_csv(in);
}

std::string error_of(const std::string& text) {
  std::istringstream in(text);
  try {
    parse_weather_csv(in);
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

/// Trajectory of `n` steps at dt = 300 s from 08:00 with every sample inside the bands.
Trajectory inside(int n) {
  Trajectory t;
  t.dt = 300.0;
  for (int k = 0; k < n; ++k) {
    StepRecord r;
    r.step = k;
    r.t = 8 * 3600.0 + 300.0 * k;
    r.x = {22.0, 22.0, 0.008};
    r.telemetry.P_fan = 100.0 + k;
    r.telemetry.P_cc = 2000.0;
    r.telemetry.P_reheat = k % 7 == 0 ? 500.0 : 0.0;
    t.steps.push_back(r);
  }
  return t;
}

const CoilModels& tiny_coils() {
  static const CoilModels m = scenario_coil_models(load_scenario("", {"coil.density=tiny"}));
  return m;
}

}  // namespace

TEST_CASE("weather CSV: two rows and midpoint interpolation") {
  const WeatherSeries w = parse("2016-08-06T00:00:00,20,40,0\n2016-08-06T01:00:00,30,60,100\n");
  REQUIRE(w.samples.size() == 2);
  CHECK(w.t_begin() == 0.0);
  CHECK(w.t_end() == 3600.0);
  const WeatherSample mid = w.at(1800.0);
  CHECK(mid.T_oa == Approx(25.0).epsilon(1e-15));
  CHECK(mid.eta_sol == Approx(50.0).epsilon(1e-15));
  CHECK(mid.W_oa == Approx(0.5 * (w.samples[0].W_oa + w.samples[1].W_oa)).epsilon(1e-15));
  CHECK_THROWS_AS(w.at(3601.0), InputError);
}

TEST_CASE("weather CSV: relative humidity becomes humidity ratio") {
  const WeatherSeries w = parse("2016-08-06T08:00:00,25,50,0\n2016-08-06T09:00:00,25,50,0\n");
  CHECK(w.samples[0].t == 8 * 3600.0);
  CHECK(w.samples[0].W_oa == Approx(0.00985).epsilon(0.02));
  CHECK(w.samples[0].W_oa == Approx(psychro::humidity_ratio_from_rh(25.0, 0.5)).epsilon(1e-15));
}

TEST_CASE("weather CSV: a series spanning midnight keeps counting from the first day") {
  const WeatherSeries w = parse("2016-08-06T23:00:00,20,40,0\n2016-08-07T01:00:00,20,40,0\n");
  CHECK(w.samples[1].t == 25 * 3600.0);
}

TEST_CASE("weather CSV errors") {
  CHECK(error_of("").find("empty") != std::string::npos);
  CHECK(error_of(kHeader).find("no data") != std::string::npos);
  CHECK(error_of("time,T,RH,sol\n").find("line 1") != std::string::npos);
  const std::string h(kHeader);
  CHECK(error_of(h + "2016-08-06T01:00:00,20,40,0\n2016-08-06T00:00:00,20,40,0\n").find("line 3") !=
        std::string::npos);
  CHECK(error_of(h + "2016-08-06T00:00:00,20,140,0\n").find("line 2") != std::string::npos);
  CHECK(error_of(h + "2016-08-06T00:00:00,20,40\n").find("line 2") != std::string::npos);
  CHECK(error_of(h + "2016-08-06T00:00:00,20,40,0\nnot-a-date,20,40,0\n").find("line 3") != std::string::npos);
  CHECK(error_of(h + "2016-08-06T00:00:00,abc,40,0\n").find("line 2") != std::string::npos);
  CHECK_THROWS_AS(load_weather("/nonexistent/weather.csv"), InputError);
}

TEST_CASE("weather CSV round trip") {
  const WeatherSeries a = synth_weather(Archetype::Mild, 3, 0.0, 6.0, 900.0);
  std::stringstream ss;
  write_weather_csv(ss, a);
  const WeatherSeries b = parse_weather_csv(ss);
  REQUIRE(b.samples.size() == a.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(b.samples[i].t == a.samples[i].t);
    CHECK(b.samples[i].T_oa == Approx(a.samples[i].T_oa).epsilon(1e-12));
    CHECK(b.samples[i].W_oa == Approx(a.samples[i].W_oa).epsilon(1e-10));
  }
}

TEST_CASE("synthetic weather is deterministic per seed") {
  for (Archetype a : {Archetype::HotHumid, Archetype::Mild, Archetype::Cold}) {
    const WeatherSeries x = synth_weather(a, 7), y = synth_weather(a, 7), z = synth_weather(a, 8);
    REQUIRE(x.samples.size() == y.samples.size());
    bool same = true, differs = false;
    for (std::size_t i = 0; i < x.samples.size(); ++i) {
      same &= x.samples[i].T_oa == y.samples[i].T_oa && x.samples[i].W_oa == y.samples[i].W_oa &&
              x.samples[i].eta_sol == y.samples[i].eta_sol;
      differs |= x.samples[i].T_oa != z.samples[i].T_oa;
    }
    CHECK(same);
    CHECK(differs);
    CHECK(x.t_end() - x.t_begin() == 48 * 3600.0);
  }
}

TEST_CASE("hot-humid nights are cooler than the occupied upper bound yet too humid") {
  const WeatherSeries w = synth_weather(Archetype::HotHumid, 1);
  int humid_cool = 0;
  double T_max = -1e9, W_min = 1e9;
  for (const WeatherSample& s : w.samples) {
    const double h = hour_of_day(s.t);
    if (h < 7.0) {
      humid_cool += s.T_oa < 23.3 && s.W_oa > 0.0104;
      W_min = std::min(W_min, s.W_oa);
    }
    T_max = std::max(T_max, s.T_oa);
  }
  CHECK(humid_cool > 0);
  CHECK(W_min > 0.0104);
  CHECK(T_max == Approx(34.0).epsilon(0.02));
}

TEST_CASE("mild nights are cool and near saturation") {
  const WeatherSeries w = synth_weather(Archetype::Mild, 1);
  double T_max = -1e9;
  for (const WeatherSample& s : w.samples) {
    T_max = std::max(T_max, s.T_oa);
    const double h = hour_of_day(s.t);
    if (h < 6.0) {
      CHECK(s.T_oa >= 16.5);
      CHECK(s.T_oa <= 20.0);
      CHECK(psychro::rh_from_humidity_ratio(s.T_oa, s.W_oa).value >= 0.85);
    }
  }
  CHECK(T_max == Approx(24.0).epsilon(0.02));
}

TEST_CASE("cold archetype is cold and dry but stays above the lower comfort humidity") {
  const WeatherSeries w = synth_weather(Archetype::Cold, 1);
  for (const WeatherSample& s : w.samples) {
    CHECK(s.T_oa >= 2.0);
    CHECK(s.T_oa <= 10.5);
    CHECK(s.W_oa > 0.0046);
    CHECK(s.W_oa < 0.0052);
    CHECK(psychro::rh_from_humidity_ratio(s.T_oa, s.W_oa).value < 0.97);
  }
}

TEST_CASE("solar gain follows daylight") {
  const WeatherSeries w = synth_weather(Archetype::HotHumid, 1);
  for (const WeatherSample& s : w.samples) {
    const double h = hour_of_day(s.t);
    if (h < 5.0 || h > 21.0) CHECK(s.eta_sol == 0.0);
    CHECK(s.eta_sol >= 0.0);
  }
  CHECK(w.at(13 * 3600.0).eta_sol > 600.0);
}

TEST_CASE("occupancy schedule") {
  const OccupancySchedule s;
  const OccupancySample ten = occupancy_at(s, 10 * 3600.0);
  CHECK(ten.n_p == 175.0);
  CHECK(ten.q_ocp == Approx(17500.0).epsilon(1e-15));
  CHECK(ten.omega_ocp == Approx(2.4325e-3).epsilon(1e-12));
  const OccupancySample night = occupancy_at(s, 3 * 3600.0);
  CHECK(night.n_p == 0.0);
  CHECK(night.q_ocp == 0.0);
  CHECK(night.omega_ocp == 0.0);
  CHECK(occupancy_at(s, 12.5 * 3600.0).n_p == 20.0);
  CHECK(occupancy_at(s, 17 * 3600.0).n_p == 0.0);
  CHECK(occupancy_at(s, 8 * 3600.0).n_p == 175.0);
  CHECK(occupancy_at(s, (24 + 10) * 3600.0).n_p == 175.0);
}

TEST_CASE("comfort bounds") {
  const ComfortEnvelope e;
  const ComfortBounds noon = comfort_bounds(e, 12 * 3600.0);
  CHECK(noon.T_low == 21.1);
  CHECK(noon.T_high == 23.3);
  const ComfortBounds two = comfort_bounds(e, 2 * 3600.0);
  CHECK(two.T_low == 18.9);
  CHECK(two.T_high == 25.6);
  CHECK(noon.W_low == two.W_low);
  CHECK(noon.W_high == two.W_high);
  CHECK(noon.W_high == 0.0104);
  CHECK(e.is_occupied(8 * 3600.0));
  CHECK_FALSE(e.is_occupied(17 * 3600.0));
  ComfortEnvelope bad;
  bad.occupied.T_high = 26.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("temperature violation of one degree for two hours") {
  Trajectory t = inside(288);
  for (int k = 12; k < 36; ++k) t.steps[k].x.T_z = 23.3 + 1.0;  // 09:00 to 11:00
  const Metrics m = compute_metrics(t, ComfortEnvelope{});
  CHECK(std::abs(m.V_T / 2.0 - 1.0) <= 1e-12);
  CHECK(m.V_W == 0.0);
  CHECK(m.V_T_unoccupied == 0.0);
}

TEST_CASE("humidity violation of 0.002 for five hours") {
  Trajectory t = inside(288);
  for (int k = 120; k < 180; ++k) t.steps[k].x.W_z = 0.0124;  // 18:00 to 23:00, unoccupied
  const Metrics m = compute_metrics(t, ComfortEnvelope{});
  CHECK(std::abs(m.V_W / 0.01 - 1.0) <= 1e-12);
  CHECK(std::abs(m.V_W_unoccupied / 0.01 - 1.0) <= 1e-12);
  CHECK(m.V_T == 0.0);
}

TEST_CASE("violations are one-sided excesses") {
  const ComfortBounds b{21.1, 23.3, 0.0046, 0.0104};
  CHECK(temperature_excess(22.0, b) == 0.0);
  CHECK(temperature_excess(20.1, b) == Approx(1.0));
  CHECK(temperature_excess(24.3, b) == Approx(1.0));
  CHECK(humidity_excess(0.0036, b) == Approx(0.001));
  CHECK(humidity_excess(0.0050, b) == 0.0);
}

TEST_CASE("a trajectory inside the envelope has no violations") {
  const Metrics m = compute_metrics(inside(288), ComfortEnvelope{});
  CHECK(m.V_T == 0.0);
  CHECK(m.V_W == 0.0);
  CHECK(m.E_total_kWh > 0.0);
  CHECK(m.solver_success_rate == 1.0);
}

TEST_CASE("metrics are additive over a partition of the trajectory") {
  Trajectory t = inside(288);
  for (int k = 0; k < 288; k += 5) {
    t.steps[k].x.T_z = 17.0 + 0.03 * k;
    t.steps[k].x.W_z = 0.003 + 3e-5 * k;
  }
  const Metrics whole = compute_metrics(t, ComfortEnvelope{});
  Metrics sum;
  for (int a = 0; a < 288; a += 50) {
    Trajectory part;
    part.dt = t.dt;
    part.steps.assign(t.steps.begin() + a, t.steps.begin() + std::min(a + 50, 288));
    const Metrics m = compute_metrics(part, ComfortEnvelope{});
    sum.E_total_kWh += m.E_total_kWh;
    sum.V_T += m.V_T;
    sum.V_W += m.V_W;
  }
  CHECK(sum.E_total_kWh == Approx(whole.E_total_kWh).epsilon(1e-12));
  CHECK(sum.V_T == Approx(whole.V_T).epsilon(1e-12));
  CHECK(sum.V_W == Approx(whole.V_W).epsilon(1e-12));
  // Energy by hand: sum of powers times dt.
  double J = 0.0;
  for (const StepRecord& r : t.steps) J += (r.telemetry.P_fan + r.telemetry.P_cc + r.telemetry.P_reheat) * 300.0;
  CHECK(whole.E_total_kWh == Approx(J / 3.6e6).epsilon(1e-12));
}

TEST_CASE("scenario configuration and overrides") {
  const Scenario d = load_scenario("", {});
  CHECK(d.dt == 300.0);
  CHECK(d.steps() == 288);
  CHECK(d.initial.T_z == 23.0);
  CHECK(d.initial.T_w == 25.0);
  CHECK(d.initial.W_z == 0.009);
  CHECK(d.mpc.N == 288);
  CHECK(d.bl.r_oa == 0.30);

  const Scenario s = load_scenario("", {"archetype=cold", "mpc.N=12", "duration_h=2", "plant.R_w=4e-4"});
  CHECK(s.archetype == "cold");
  CHECK(s.mpc.N == 12);
  CHECK(s.steps() == 24);
  CHECK(s.plant.R_w == 4e-4);

  CHECK_THROWS_AS(load_scenario("", {"no_such_key=1"}), InputError);
  CHECK_THROWS_AS(load_scenario("", {"mpc.no_such_key=1"}), InputError);
  CHECK_THROWS_AS(load_scenario("", {"dt=-5"}), InputError);
  CHECK_THROWS_AS(load_scenario("", {"dt"}), InputError);
  CHECK_THROWS_AS(load_scenario("", {"duration_h=1.01"}), InputError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json", {}), InputError);

  const nlohmann::json j = scenario_to_json(s);
  const Scenario back = scenario_from_json(j);
  CHECK(scenario_to_json(back) == j);
}

TEST_CASE("scenario files merge over the defaults") {
  const std::string path = "harness_test_scenario.json";
  {
    std::ofstream f(path);
    f << R"({"archetype": "mild", "q_other": 4000, "bl": {"r_oa": 0.3}})";
  }
  const Scenario s = load_scenario(path, {"q_other=4500"});
  CHECK(s.archetype == "mild");
  CHECK(s.q_other == 4500.0);
  CHECK(s.dt == 300.0);
  {
    std::ofstream f(path);
    f << R"({"unknown": 1})";
  }
  CHECK_THROWS_AS(load_scenario(path, {}), InputError);
  {
    std::ofstream f(path);
    f << "{ not json";
  }
  CHECK_THROWS_AS(load_scenario(path, {}), InputError);
  std::remove(path.c_str());
}

TEST_CASE("no loads and outdoor air at zone temperature give a flat trajectory") {
  Scenario s = load_scenario("", {"occupancy.design=0", "occupancy.dip_count=0", "q_other=0"});
  const std::string path = "harness_test_flat.csv";
  {
    std::ofstream f(path);
    f << kHeader << "2016-08-06T00:00:00,23,50,0\n2016-08-08T12:00:00,23,50,0\n";
  }
  s.weather_csv = path;
  s.initial = {23.0, 23.0, psychro::humidity_ratio_from_rh(23.0, 0.5)};
  const auto exo = build_exogenous(s, scenario_weather(s), s.t0(), s.steps());
  PlantParams p = s.plant;
  ZoneState x = s.initial;
  for (const ExogenousInput& w : exo) {
    CHECK(w.q_ocp == 0.0);
    CHECK(w.eta_sol == 0.0);
    x = plant_step(p, x, ControlCommand{0.0, 0.0, 23.0, 23.0}, w, s.dt).state;
    CHECK(x.T_z == 23.0);
    CHECK(x.T_w == 23.0);
    CHECK(x.W_z == s.initial.W_z);
  }
  std::remove(path.c_str());
}

TEST_CASE("exogenous inputs combine weather, occupancy and constant gains") {
  const Scenario s = load_scenario("", {});
  const WeatherSeries w = scenario_weather(s);
  const auto exo = build_exogenous(s, w, s.t0(), 288);
  REQUIRE(exo.size() == 288);
  CHECK(exo[0].T_oa == w.at(s.t0()).T_oa);
  CHECK(exo[24].q_ocp == 17500.0);  // 10:00
  CHECK(exo[24].n_p == 175.0);
  CHECK(exo[0].q_other == 6000.0);
  CHECK(exo[0].omega_other == 0.0);
  CHECK(exo[200].n_p == 0.0);  // 00:40
  CHECK(w.t_end() >= s.t0() + (288 + 288) * 300.0 - 1e-9);
}

TEST_CASE("baseline closed loop is deterministic and keeps the outdoor-air ratio") {
  for (const char* a : {"hot-humid", "mild", "cold"}) {
    const Scenario s = load_scenario("", {std::string("archetype=") + a});
    const Trajectory t1 = run_closed_loop(s, ControllerKind::Bl, tiny_coils());
    const Trajectory t2 = run_closed_loop(s, ControllerKind::Bl, tiny_coils());
    REQUIRE_FALSE(t1.aborted);
    REQUIRE(t1.steps.size() == 288);
    std::ostringstream c1, c2;
    write_trajectory_csv(c1, t1);
    write_trajectory_csv(c2, t2);
    CHECK(c1.str() == c2.str());
    for (const StepRecord& r : t1.steps) {
      CHECK(r.u.r_oa == 0.30);
      CHECK(r.u.T_ca == 12.8);
    }
  }
}

TEST_CASE("MPC closed loop is deterministic") {
  const Scenario s = load_scenario("", {"coil.density=tiny", "mpc.N=24"});
  std::ostringstream d1, d2;
  const Trajectory a = run_closed_loop(s, ControllerKind::SMpc, tiny_coils(), 4, &d1);
  const Trajectory b = run_closed_loop(s, ControllerKind::SMpc, tiny_coils(), 4, &d2);
  std::ostringstream c1, c2;
  write_trajectory_csv(c1, a);
  write_trajectory_csv(c2, b);
  CHECK(c1.str() == c2.str());
  CHECK(d1.str() == d2.str());
  const std::string log = d1.str();
  CHECK(std::count(log.begin(), log.end(), '\n') == 4);
  for (const StepRecord& r : a.steps) {
    REQUIRE(r.diag.has_value());
    CHECK(r.u.m_sa >= s.mpc.m_sa_low - 1e-9);
    CHECK(r.u.m_sa <= s.mpc.m_sa_high + 1e-9);
    CHECK(r.u.T_sa <= s.mpc.T_sa_high + 1e-9);
    CHECK(r.u.T_ca >= s.mpc.T_ca_low - 1e-9);
  }
}

TEST_CASE("a plant error aborts the run and keeps the partial trajectory") {
  // Configuration rejects negative moisture gains, so the scenario is edited after validation.
  Scenario s = load_scenario("", {});
  s.omega_other = -0.05;
  const Trajectory t = run_closed_loop(s, ControllerKind::Bl, tiny_coils());
  CHECK(t.aborted);
  CHECK(t.steps.size() < 288);
  CHECK(t.error.find("humidity") != std::string::npos);
}

TEST_CASE("trajectory CSV layout") {
  const Scenario s = load_scenario("", {});
  const Trajectory t = run_closed_loop(s, ControllerKind::Bl, tiny_coils(), 10);
  std::ostringstream out;
  write_trajectory_csv(out, t);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("step,time_s,hour,T_z,T_w,W_z,m_sa,r_oa,", 0) == 0);
  const auto ncol = std::count(header.begin(), header.end(), ',');
  int rows = 0;
  for (std::string line; std::getline(in, line); ++rows) CHECK(std::count(line.begin(), line.end(), ',') == ncol);
  CHECK(rows == 10);
  const nlohmann::json mj = metrics_to_json(compute_metrics(t, s.envelope), t);
  CHECK(mj.contains("E_total_kWh"));
  CHECK(mj.contains("V_T_Ch"));
  CHECK(mj.contains("V_W_kgkg_h"));
}
