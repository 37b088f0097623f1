#include "hvac/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace hvac {

using nlohmann::json;

// ============================================================== names

Archetype parse_archetype(const std::string& s) {
  if (s == "hot-humid") return Archetype::HotHumid;
  if (s == "mild") return Archetype::Mild;
  if (s == "cold") return Archetype::Cold;
  throw InputError("unknown archetype '" + s + "' (expected hot-humid, mild or cold)");
}

std::string to_string(Archetype a) {
  switch (a) {
    case Archetype::HotHumid: return "hot-humid";
    case Archetype::Mild: return "mild";
    case Archetype::Cold: return "cold";
  }
  return "unknown";
}

ControllerKind parse_controller(const std::string& s) {
  if (s == "sl-mpc") return ControllerKind::SlMpc;
  if (s == "s-mpc") return ControllerKind::SMpc;
  if (s == "bl") return ControllerKind::Bl;
  throw InputError("unknown controller '" + s + "' (expected sl-mpc, s-mpc or bl)");
}

std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::SlMpc: return "sl-mpc";
    case ControllerKind::SMpc: return "s-mpc";
    case ControllerKind::Bl: return "bl";
  }
  return "unknown";
}

// ============================================================== weather

WeatherSample WeatherSeries::at(double t) const {
  if (samples.empty()) throw InputError("weather series is empty");
  const double tol = 1e-6;
  if (t < t_begin() - tol || t > t_end() + tol) {
    std::ostringstream os;
    os << "weather series covers [" << t_begin() << ", " << t_end() << "] s, requested " << t << " s";
    throw InputError(os.str());
  }
  if (samples.size() == 1 || t <= t_begin()) return {t, samples.front().T_oa, samples.front().W_oa, samples.front().eta_sol};
  if (t >= t_end()) return {t, samples.back().T_oa, samples.back().W_oa, samples.back().eta_sol};
  const auto hi = std::upper_bound(samples.begin(), samples.end(), t,
                                   [](double v, const WeatherSample& s) { return v < s.t; });
  const WeatherSample& b = *hi;
  const WeatherSample& a = *(hi - 1);
  const double f = (t - a.t) / (b.t - a.t);
  return {t, a.T_oa + f * (b.T_oa - a.T_oa), a.W_oa + f * (b.W_oa - a.W_oa), a.eta_sol + f * (b.eta_sol - a.eta_sol)};
}

namespace {

// Days since 1970-01-01 of a proleptic Gregorian date.
long days_from_civil(long y, unsigned m, unsigned d) {
  y -= m <= 2;
  const long era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

void civil_from_days(long z, long& y, unsigned& m, unsigned& d) {
  z += 719468;
  const long era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y = static_cast<long>(yoe) + era * 400 + (m <= 2);
}

struct Timestamp {
  long day = 0;
  double seconds = 0.0;
};

bool parse_timestamp(const std::string& s, Timestamp& out) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0;
  double sec = 0.0;
  int consumed = 0;
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d%n", &y, &mo, &d, &h, &mi, &consumed) != 5) return false;
  std::string rest = s.substr(static_cast<std::size_t>(consumed));
  if (!rest.empty() && rest[0] == ':') {
    char* end = nullptr;
    sec = std::strtod(rest.c_str() + 1, &end);
    rest = end;
  }
  if (!(rest.empty() || rest == "Z")) return false;
  if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 || sec >= 61) {
    return false;
  }
  out.day = days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d));
  out.seconds = h * 3600.0 + mi * 60.0 + sec;
  return true;
}

bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  char* end = nullptr;
  v = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(v);
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

WeatherSeries parse_weather_csv(std::istream& in, const PsychroConstants& c) {
  std::string line;
  long lineno = 0;
  if (!std::getline(in, line)) throw InputError("weather: empty file");
  ++lineno;
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (trim(line) != "timestamp_iso8601,T_oa_C,RH_oa_pct,eta_sol_Wm2") {
    throw InputError("weather line 1: expected header timestamp_iso8601,T_oa_C,RH_oa_pct,eta_sol_Wm2");
  }
  WeatherSeries w;
  long day0 = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    auto fail = [&](const std::string& what) {
      throw InputError("weather line " + std::to_string(lineno) + ": " + what);
    };
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(trim(cell));
    if (f.size() != 4) fail("expected 4 columns, found " + std::to_string(f.size()));
    Timestamp ts;
    if (!parse_timestamp(f[0], ts)) fail("bad timestamp '" + f[0] + "'");
    double T = 0, rh = 0, eta = 0;
    if (!parse_number(f[1], T)) fail("bad T_oa_C '" + f[1] + "'");
    if (!parse_number(f[2], rh)) fail("bad RH_oa_pct '" + f[2] + "'");
    if (!parse_number(f[3], eta)) fail("bad eta_sol_Wm2 '" + f[3] + "'");
    if (rh < 0 || rh > 100) fail("RH_oa_pct outside [0, 100]");
    if (eta < 0) fail("negative eta_sol_Wm2");
    if (w.samples.empty()) day0 = ts.day;
    const double t = static_cast<double>(ts.day - day0) * kSecondsPerDay + ts.seconds;
    if (!w.samples.empty() && !(t > w.samples.back().t)) fail("timestamps must increase strictly");
    double W = 0.0;
    try {
      W = psychro::humidity_ratio_from_rh(T, rh / 100.0, c.P_atm);
    } catch (const std::exception& e) {
      fail(e.what());
    }
    w.samples.push_back({t, T, W, eta});
  }
  if (w.samples.empty()) throw InputError("weather: file has a header but no data rows");
  return w;
}

WeatherSeries load_weather(const std::string& path, const PsychroConstants& c) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open weather file '" + path + "'");
  return parse_weather_csv(in, c);
}

void write_weather_csv(std::ostream& out, const WeatherSeries& w, const PsychroConstants& c) {
  out << "timestamp_iso8601,T_oa_C,RH_oa_pct,eta_sol_Wm2\n";
  const long epoch = days_from_civil(2016, 1, 1);
  for (const WeatherSample& s : w.samples) {
    const long day = static_cast<long>(std::floor(s.t / kSecondsPerDay));
    double sec = s.t - static_cast<double>(day) * kSecondsPerDay;
    long y = 0;
    unsigned m = 0, d = 0;
    civil_from_days(epoch + day, y, m, d);
    const int hh = static_cast<int>(sec / 3600.0);
    sec -= hh * 3600.0;
    const int mm = static_cast<int>(sec / 60.0);
    sec -= mm * 60.0;
    char ts[64];
    std::snprintf(ts, sizeof ts, "%04ld-%02u-%02uT%02d:%02d:%02.0f", y, m, d, hh, mm, sec);
    const double rh = psychro::rh_from_humidity_ratio(s.T_oa, s.W_oa, c.P_atm).value * 100.0;
    out << ts << ',' << fmt(s.T_oa) << ',' << fmt(rh) << ',' << fmt(s.eta_sol) << '\n';
  }
}

namespace {

// Diurnal 0..1 shape: maximum at 15:00, minimum at 03:00.
double day_shape(double h) { return 0.5 * (1.0 + std::cos(2.0 * M_PI * (h - 15.0) / 24.0)); }

double solar_shape(double h) {
  if (h <= 7.0 || h >= 19.0) return 0.0;
  return std::pow(std::sin(M_PI * (h - 7.0) / 12.0), 1.5);
}

// Sum of three slow sinusoids with seeded periods and phases, bounded by `amp`.
struct SmoothNoise {
  std::array<double, 3> period{}, phase{};
  double amp = 0.0;

  SmoothNoise(std::mt19937_64& rng, double amplitude) : amp(amplitude) {
    auto unit = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
    for (int i = 0; i < 3; ++i) {
      period[i] = 3600.0 * (3.0 + 6.0 * unit());
      phase[i] = 2.0 * M_PI * unit();
    }
  }
  double operator()(double t) const {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += std::sin(2.0 * M_PI * t / period[i] + phase[i]);
    return amp * s / 3.0;
  }
};

struct ArchetypeShape {
  double T_min, T_max;
  double W_ref;  ///< nearly constant outdoor humidity ratio, capped below saturation
  double solar_peak;
};

ArchetypeShape archetype_shape(Archetype a, const PsychroConstants& c) {
  switch (a) {
    case Archetype::HotHumid:
      return {23.0, 34.0, psychro::humidity_ratio_from_rh(24.0, 0.75, c.P_atm), 850.0};
    case Archetype::Mild:
      return {17.0, 24.0, psychro::humidity_ratio_from_rh(18.5, 0.90, c.P_atm), 600.0};
    case Archetype::Cold:
      // Kept just above the lower comfort humidity bound: there is no humidifier,
      // and drier air would make the lower bound unreachable overnight.
      return {5.0, 10.0, 0.0050, 400.0};
  }
  throw InputError("unknown archetype");
}

}  // namespace

WeatherSeries synth_weather(Archetype a, std::uint64_t seed, double t_start, double hours, double sample_dt,
                            const PsychroConstants& c) {
  if (!(sample_dt > 0) || !(hours > 0)) throw InputError("synth_weather: hours and sample_dt must be positive");
  const ArchetypeShape sh = archetype_shape(a, c);
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(a) + 1);
  const SmoothNoise nT(rng, 0.25);
  const SmoothNoise nW(rng, 0.01);
  const SmoothNoise nS(rng, 0.05);
  WeatherSeries w;
  const long n = static_cast<long>(std::llround(hours * 3600.0 / sample_dt));
  w.samples.reserve(static_cast<std::size_t>(n + 1));
  for (long i = 0; i <= n; ++i) {
    const double t = t_start + static_cast<double>(i) * sample_dt;
    const double h = hour_of_day(t);
    WeatherSample s;
    s.t = t;
    s.T_oa = sh.T_min + (sh.T_max - sh.T_min) * day_shape(h) + nT(t);
    s.W_oa = std::min(sh.W_ref * (1.0 + nW(t)), 0.97 * psychro::saturation_humidity_ratio(s.T_oa, c.P_atm));
    s.eta_sol = sh.solar_peak * solar_shape(h) * (1.0 + nS(t));
    w.samples.push_back(s);
  }
  return w;
}

// ============================================================ occupancy

void OccupancySchedule::validate() const {
  if (!(design >= 0 && dip_count >= 0 && q_per_person >= 0 && omega_per_person >= 0)) {
    throw InputError("occupancy: counts and per-person gains must be non-negative");
  }
  if (!(start_h >= 0 && start_h <= end_h && end_h <= 24)) throw InputError("occupancy: invalid hours");
}

OccupancySample occupancy_at(const OccupancySchedule& s, double t) {
  const double h = hour_of_day(t);
  OccupancySample o;
  if (h >= s.start_h && h < s.end_h) {
    o.n_p = (h >= s.dip_start_h && h < s.dip_end_h) ? s.dip_count : s.design;
  }
  o.q_ocp = s.q_per_person * o.n_p;
  o.omega_ocp = s.omega_per_person * o.n_p;
  return o;
}

ComfortBounds comfort_bounds(const ComfortEnvelope& e, double t) { return e.at(t); }

// ============================================================= scenario

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ZoneState, T_z, T_w, W_z)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ComfortBounds, T_low, T_high, W_low, W_high)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ComfortEnvelope, occ_start_h, occ_end_h, occupied, unoccupied)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(VentilationParams, m_oa_p, m_oa_A, A, m_oa_bp)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PsychroConstants, C_pa, C_pw, g_H2O, R_g, P_atm, P_da)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PowerParams, alpha_f, eta_cc, COP_c, eta_reheat, COP_h)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(OccupancySchedule, design, start_h, end_h, dip_start_h, dip_end_h, dip_count,
                                   q_per_person, omega_per_person)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PiGains, kp, ki)

namespace nlp {
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(IpmOptions, tol, constr_viol_tol, compl_inf_tol, max_iter, mu_init, bound_push,
                                   bound_frac, bound_relax, kappa_eps, kappa_mu, theta_mu, tau_min, kappa_sigma,
                                   s_max, delta_c, refine_steps, max_soc, stage_ordering, warm_mu_init,
                                   warm_bound_push, warm_mult_floor, print_level)
}  // namespace nlp

namespace {

json plant_json(const PlantParams& p) {
  return {{"C_z", p.C_z}, {"C_w", p.C_w}, {"R_z", p.R_z}, {"R_w", p.R_w}, {"A_e", p.A_e},
          {"V", p.V},     {"m_w_max", p.m_w_max}, {"substep", p.substep}};
}

void plant_from(const json& j, PlantParams& p) {
  j.at("C_z").get_to(p.C_z);
  j.at("C_w").get_to(p.C_w);
  j.at("R_z").get_to(p.R_z);
  j.at("R_w").get_to(p.R_w);
  j.at("A_e").get_to(p.A_e);
  j.at("V").get_to(p.V);
  j.at("m_w_max").get_to(p.m_w_max);
  j.at("substep").get_to(p.substep);
}

json mpc_json(const MpcParams& p) {
  return {{"N", p.N},
          {"R", p.R},
          {"C", p.C},
          {"m_sa_low", p.m_sa_low},
          {"m_sa_high", p.m_sa_high},
          {"r_oa_low", p.r_oa_low},
          {"r_oa_high", p.r_oa_high},
          {"T_ca_low", p.T_ca_low},
          {"T_sa_high", p.T_sa_high},
          {"m_w_low", p.m_w_low},
          {"m_w_high", p.m_w_high},
          {"m_sa_rate", p.m_sa_rate},
          {"r_oa_rate", p.r_oa_rate},
          {"T_ca_rate", p.T_ca_rate},
          {"T_sa_rate", p.T_sa_rate},
          {"comfort_margin_T", p.comfort_margin_T},
          {"comfort_margin_W", p.comfort_margin_W},
          {"solver", p.solver}};
}

void mpc_from(const json& j, MpcParams& p) {
  j.at("N").get_to(p.N);
  j.at("R").get_to(p.R);
  j.at("C").get_to(p.C);
  j.at("m_sa_low").get_to(p.m_sa_low);
  j.at("m_sa_high").get_to(p.m_sa_high);
  j.at("r_oa_low").get_to(p.r_oa_low);
  j.at("r_oa_high").get_to(p.r_oa_high);
  j.at("T_ca_low").get_to(p.T_ca_low);
  j.at("T_sa_high").get_to(p.T_sa_high);
  j.at("m_w_low").get_to(p.m_w_low);
  j.at("m_w_high").get_to(p.m_w_high);
  j.at("m_sa_rate").get_to(p.m_sa_rate);
  j.at("r_oa_rate").get_to(p.r_oa_rate);
  j.at("T_ca_rate").get_to(p.T_ca_rate);
  j.at("T_sa_rate").get_to(p.T_sa_rate);
  j.at("comfort_margin_T").get_to(p.comfort_margin_T);
  j.at("comfort_margin_W").get_to(p.comfort_margin_W);
  j.at("solver").get_to(p.solver);
}

json bl_json(const BlParams& p) {
  return {{"r_oa", p.r_oa},
          {"T_ca", p.T_ca},
          {"m_sa_high", p.m_sa_high},
          {"T_sa_high", p.T_sa_high},
          {"dwell_s", p.dwell_s},
          {"tracking_offset", p.tracking_offset},
          {"flow", p.flow},
          {"supply", p.supply},
          {"m_sa_rate", p.m_sa_rate},
          {"T_sa_rate", p.T_sa_rate},
          {"design_occupancy", p.design_occupancy},
          {"design_heating_load", p.design_heating_load}};
}

void bl_from(const json& j, BlParams& p) {
  j.at("r_oa").get_to(p.r_oa);
  j.at("T_ca").get_to(p.T_ca);
  j.at("m_sa_high").get_to(p.m_sa_high);
  j.at("T_sa_high").get_to(p.T_sa_high);
  j.at("dwell_s").get_to(p.dwell_s);
  j.at("tracking_offset").get_to(p.tracking_offset);
  j.at("flow").get_to(p.flow);
  j.at("supply").get_to(p.supply);
  j.at("m_sa_rate").get_to(p.m_sa_rate);
  j.at("T_sa_rate").get_to(p.T_sa_rate);
  j.at("design_occupancy").get_to(p.design_occupancy);
  j.at("design_heating_load").get_to(p.design_heating_load);
}

// Every key of `user` must exist in `base`, recursively through objects.
void check_known_keys(const json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) return;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw InputError("unknown configuration key '" + key + "'");
    if (base[it.key()].is_object()) {
      if (!it.value().is_object()) throw InputError("configuration key '" + key + "' must be an object");
      check_known_keys(base[it.key()], it.value(), key);
    }
  }
}

}  // namespace

int Scenario::steps() const {
  const double n = duration_h * 3600.0 / dt;
  return static_cast<int>(std::llround(n));
}

void Scenario::finalize() {
  if (!(dt > 0)) throw InputError("scenario: dt must be positive");
  if (!(duration_h > 0)) throw InputError("scenario: duration_h must be positive");
  const double n = duration_h * 3600.0 / dt;
  if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n)) {
    throw InputError("scenario: duration must be a multiple of dt");
  }
  if (weather_csv.empty()) parse_archetype(archetype);
  parse_density(coil_density);
  occupancy.validate();
  if (q_other < 0 || omega_other < 0) throw InputError("scenario: internal gains must be non-negative");
  if (!(initial.W_z >= 0)) throw InputError("scenario: initial W_z must be non-negative");

  mpc.dt = dt;
  mpc.A_e = plant.A_e;
  mpc.V = plant.V;
  mpc.envelope = envelope;
  mpc.psychro = plant.psychro;
  mpc.power = plant.power;
  mpc.vent = vent;
  bl.envelope = envelope;
  bl.vent = vent;
  bl.C_pa = plant.psychro.C_pa;
  try {
    plant.validate();
    mpc.validate();
    bl.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

json scenario_to_json(const Scenario& s) {
  return {{"name", s.name},
          {"archetype", s.archetype},
          {"weather_csv", s.weather_csv},
          {"seed", s.seed},
          {"start_h", s.start_h},
          {"duration_h", s.duration_h},
          {"dt", s.dt},
          {"occupancy", s.occupancy},
          {"q_other", s.q_other},
          {"omega_other", s.omega_other},
          {"initial", s.initial},
          {"envelope", s.envelope},
          {"ventilation", s.vent},
          {"psychro", s.plant.psychro},
          {"power", s.plant.power},
          {"plant", plant_json(s.plant)},
          {"mpc", mpc_json(s.mpc)},
          {"bl", bl_json(s.bl)},
          {"coil", {{"binned", s.coil_binned}, {"compact", s.coil_compact}, {"density", s.coil_density}}}};
}

Scenario scenario_from_json(const json& j) {
  Scenario s;
  try {
    j.at("name").get_to(s.name);
    j.at("archetype").get_to(s.archetype);
    j.at("weather_csv").get_to(s.weather_csv);
    j.at("seed").get_to(s.seed);
    j.at("start_h").get_to(s.start_h);
    j.at("duration_h").get_to(s.duration_h);
    j.at("dt").get_to(s.dt);
    j.at("occupancy").get_to(s.occupancy);
    j.at("q_other").get_to(s.q_other);
    j.at("omega_other").get_to(s.omega_other);
    j.at("initial").get_to(s.initial);
    j.at("envelope").get_to(s.envelope);
    j.at("ventilation").get_to(s.vent);
    j.at("psychro").get_to(s.plant.psychro);
    j.at("power").get_to(s.plant.power);
    plant_from(j.at("plant"), s.plant);
    mpc_from(j.at("mpc"), s.mpc);
    bl_from(j.at("bl"), s.bl);
    const json& c = j.at("coil");
    c.at("binned").get_to(s.coil_binned);
    c.at("compact").get_to(s.coil_compact);
    c.at("density").get_to(s.coil_density);
  } catch (const json::exception& e) {
    throw InputError(std::string("configuration: ") + e.what());
  }
  return s;
}

void apply_overrides(json& j, const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    json* node = &j;
    std::stringstream path(key);
    std::string part;
    while (std::getline(path, part, '.')) {
      if (!node->is_object() || !node->contains(part)) throw InputError("unknown configuration key '" + key + "'");
      node = &(*node)[part];
    }
    if (node->is_object()) throw InputError("configuration key '" + key + "' names a block, not a value");
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    const bool ok = (node->is_number() && value.is_number()) || (node->is_string() && value.is_string()) ||
                    (node->is_boolean() && value.is_boolean());
    if (!ok) throw InputError("override '" + o + "' has the wrong type for '" + key + "'");
    if (node->is_number_unsigned() && !value.is_number_unsigned()) {
      throw InputError("override '" + o + "' must be a non-negative integer");
    }
    if (node->is_number_integer() && !value.is_number_integer()) {
      throw InputError("override '" + o + "' must be an integer");
    }
    *node = value;
  }
}

Scenario load_scenario(const std::string& config_path, const std::vector<std::string>& overrides) {
  json base = scenario_to_json(Scenario{});
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw InputError("cannot open config file '" + config_path + "'");
    json user = json::parse(in, nullptr, false);
    if (user.is_discarded() || !user.is_object()) throw InputError("config file '" + config_path + "' is not a JSON object");
    check_known_keys(base, user, "");
    base.merge_patch(user);
  }
  apply_overrides(base, overrides);
  Scenario s = scenario_from_json(base);
  s.finalize();
  return s;
}

WeatherSeries scenario_weather(const Scenario& s) {
  if (!s.weather_csv.empty()) return load_weather(s.weather_csv, s.plant.psychro);
  const double hours = std::max(48.0, s.duration_h + s.mpc.N * s.dt / 3600.0);
  return synth_weather(parse_archetype(s.archetype), s.seed, s.t0(), hours, s.dt, s.plant.psychro);
}

std::vector<ExogenousInput> build_exogenous(const Scenario& s, const WeatherSeries& weather, double t_start,
                                            int count) {
  std::vector<ExogenousInput> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int k = 0; k < count; ++k) {
    const double t = t_start + k * s.dt;
    const WeatherSample ws = weather.at(t);
    const OccupancySample o = occupancy_at(s.occupancy, t);
    ExogenousInput w;
    w.eta_sol = ws.eta_sol;
    w.T_oa = ws.T_oa;
    w.W_oa = ws.W_oa;
    w.q_ocp = o.q_ocp;
    w.q_other = s.q_other;
    w.omega_ocp = o.omega_ocp;
    w.omega_other = s.omega_other;
    w.n_p = o.n_p;
    out.push_back(w);
  }
  return out;
}

CoilModels scenario_coil_models(const Scenario& s) {
  CoilModels m;
  const bool need_fit = s.coil_binned.empty() || s.coil_compact.empty();
  if (need_fit) {
    const SweepRanges r = sweep_for_density(parse_density(s.coil_density));
    const CoilDataset train = generate_training_grid(r);
    if (s.coil_binned.empty()) m.binned = fit_binned_model(train, r);
    if (s.coil_compact.empty()) m.compact = fit_compact_model(train);
  }
  try {
    if (!s.coil_binned.empty()) m.binned = load_binned_model(s.coil_binned);
    if (!s.coil_compact.empty()) m.compact = load_compact_model(s.coil_compact);
  } catch (const std::exception& e) {
    throw InputError(std::string("coil model: ") + e.what());
  }
  return m;
}

// ========================================================== closed loop

Trajectory run_closed_loop(const Scenario& s, ControllerKind kind, const CoilModels& coil, int steps,
                           std::ostream* diag_log) {
  const int n = steps < 0 ? s.steps() : steps;
  const bool is_mpc = kind != ControllerKind::Bl;
  const int N = s.mpc.N;
  const WeatherSeries weather = scenario_weather(s);
  const std::vector<ExogenousInput> exo = build_exogenous(s, weather, s.t0(), is_mpc ? n + N - 1 : n);

  PlantParams plant = s.plant;
  plant.coil = &coil.binned;

  MpcController mpc;
  mpc.variant = kind == ControllerKind::SlMpc ? MpcVariant::SL : MpcVariant::S;
  mpc.params = s.mpc;
  mpc.params.coil = coil.compact;
  BlState bl;

  Trajectory tr;
  tr.controller = to_string(kind);
  tr.dt = s.dt;
  tr.steps.reserve(static_cast<std::size_t>(n));
  ZoneState x = s.initial;
  for (int k = 0; k < n; ++k) {
    StepRecord rec;
    rec.step = k;
    rec.t = s.t0() + k * s.dt;
    rec.x = x;
    rec.w = exo[k];
    rec.bounds = s.envelope.at(rec.t);
    ControlCommand u;
    if (is_mpc) {
      MpcForecast f;
      f.t0 = rec.t;
      f.w.assign(exo.begin() + k, exo.begin() + k + N);
      const ExogenousInput& seen = f.w.front();
      if (seen.T_oa != rec.w.T_oa || seen.W_oa != rec.w.W_oa || seen.eta_sol != rec.w.eta_sol ||
          seen.n_p != rec.w.n_p) {
        throw std::logic_error("forecast differs from the plant input");
      }
      auto [cmd, dg] = mpc_step(mpc, x, f);
      u = cmd;
      rec.mode = "mpc";
      if (diag_log) *diag_log << dg.to_json_line() << '\n';
      rec.diag = std::move(dg);
    } else {
      auto [next, cmd] = bl_step(bl, x.T_z, s.envelope.is_occupied(rec.t), s.dt, s.bl);
      bl = next;
      u = cmd;
      rec.mode = to_string(bl.mode);
    }
    rec.u = u;
    try {
      const PlantStepResult r = plant_step(plant, x, u, rec.w, s.dt);
      rec.telemetry = r.telemetry;
      x = r.state;
    } catch (const PlantError& e) {
      tr.aborted = true;
      tr.error = "step " + std::to_string(k) + ": " + e.what();
      break;
    }
    tr.steps.push_back(std::move(rec));
  }
  tr.final_state = x;
  return tr;
}

double temperature_excess(double T_z, const ComfortBounds& b) {
  if (T_z > b.T_high) return T_z - b.T_high;
  if (T_z < b.T_low) return b.T_low - T_z;
  return 0.0;
}

double humidity_excess(double W_z, const ComfortBounds& b) {
  if (W_z > b.W_high) return W_z - b.W_high;
  if (W_z < b.W_low) return b.W_low - W_z;
  return 0.0;
}

Metrics compute_metrics(const Trajectory& t, const ComfortEnvelope& e) {
  Metrics m;
  const double h = t.dt / 3600.0;
  double solve_time = 0.0;
  for (const StepRecord& r : t.steps) {
    m.E_fan_kWh += r.telemetry.P_fan * t.dt / kJoulesPerKWh;
    m.E_cooling_kWh += r.telemetry.P_cc * t.dt / kJoulesPerKWh;
    m.E_reheat_kWh += r.telemetry.P_reheat * t.dt / kJoulesPerKWh;
    const ComfortBounds b = e.at(r.t);
    const double vT = temperature_excess(r.x.T_z, b) * h;
    const double vW = humidity_excess(r.x.W_z, b) * h;
    m.V_T += vT;
    m.V_W += vW;
    if (!e.is_occupied(r.t)) {
      m.V_T_unoccupied += vT;
      m.V_W_unoccupied += vW;
    }
    if (r.diag) {
      ++m.solver_steps;
      if (r.diag->status == "optimal-local" && !r.diag->fallback) ++m.solver_optimal;
      if (r.diag->fallback) ++m.solver_fallback;
      if (r.diag->recovery) ++m.solver_recovery;
      solve_time += r.diag->wall_time;
      m.max_solve_time = std::max(m.max_solve_time, r.diag->wall_time);
    }
  }
  m.E_total_kWh = m.E_fan_kWh + m.E_cooling_kWh + m.E_reheat_kWh;
  if (m.solver_steps > 0) {
    m.solver_success_rate = static_cast<double>(m.solver_optimal) / static_cast<double>(m.solver_steps);
    m.mean_solve_time = solve_time / static_cast<double>(m.solver_steps);
  }
  return m;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& t) {
  out << "step,time_s,hour,T_z,T_w,W_z,m_sa,r_oa,T_ca_cmd,T_sa_cmd,m_w,T_ma,W_ma,T_ca,W_ca,T_sa,W_sa,"
         "P_fan,P_cc,P_reheat,T_oa,W_oa,eta_sol,n_p,q_ocp,omega_ocp,T_low,T_high,W_low,W_high,mode,"
         "solver_status,iterations,recovery,fallback\n";
  for (const StepRecord& r : t.steps) {
    const PlantTelemetry& m = r.telemetry;
    const double cols[] = {r.t,         hour_of_day(r.t), r.x.T_z,          r.x.T_w,
                           r.x.W_z,     r.u.m_sa,         r.u.r_oa,         r.u.T_ca,
                           r.u.T_sa,    m.m_w,            m.mixed.T,        m.mixed.W,
                           m.conditioned.T, m.conditioned.W, m.supply.T,    m.supply.W,
                           m.P_fan,     m.P_cc,           m.P_reheat,       r.w.T_oa,
                           r.w.W_oa,    r.w.eta_sol,      r.w.n_p,          r.w.q_ocp,
                           r.w.omega_ocp, r.bounds.T_low, r.bounds.T_high,  r.bounds.W_low,
                           r.bounds.W_high};
    out << r.step;
    for (double v : cols) out << ',' << fmt(v);
    out << ',' << r.mode;
    if (r.diag) {
      out << ',' << r.diag->status << ',' << r.diag->iterations << ',' << (r.diag->recovery ? 1 : 0) << ','
          << (r.diag->fallback ? 1 : 0);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
}

json metrics_to_json(const Metrics& m, const Trajectory& t) {
  json j;
  j["controller"] = t.controller;
  j["steps"] = t.steps.size();
  j["dt_s"] = t.dt;
  j["aborted"] = t.aborted;
  j["error"] = t.error;
  j["E_total_kWh"] = m.E_total_kWh;
  j["E_fan_kWh"] = m.E_fan_kWh;
  j["E_cooling_kWh"] = m.E_cooling_kWh;
  j["E_reheat_kWh"] = m.E_reheat_kWh;
  j["V_T_Ch"] = m.V_T;
  j["V_W_kgkg_h"] = m.V_W;
  j["V_T_unoccupied_Ch"] = m.V_T_unoccupied;
  j["V_W_unoccupied_kgkg_h"] = m.V_W_unoccupied;
  j["solver"] = {{"steps", m.solver_steps},
                 {"optimal_local", m.solver_optimal},
                 {"fallback", m.solver_fallback},
                 {"recovery", m.solver_recovery},
                 {"success_rate", m.solver_success_rate}};
  j["final_state"] = t.final_state;
  return j;
}

json timing_to_json(const Metrics& m, const Trajectory& t) {
  json per_step = json::array();
  for (const StepRecord& r : t.steps) {
    if (r.diag) per_step.push_back(r.diag->wall_time);
  }
  return {{"controller", t.controller},
          {"solver_steps", m.solver_steps},
          {"mean_solve_time_s", m.mean_solve_time},
          {"max_solve_time_s", m.max_solve_time},
          {"solve_time_s", per_step}};
}

}  // namespace hvac
