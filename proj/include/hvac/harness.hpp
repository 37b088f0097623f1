#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hvac/baseline.hpp"
#include "hvac/coil.hpp"
#include "hvac/comfort.hpp"
#include "hvac/mpc.hpp"
#include "hvac/plant.hpp"

namespace hvac {

/// Malformed input: bad files, unknown configuration keys, invalid values.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- weather

enum class Archetype { HotHumid, Mild, Cold };

Archetype parse_archetype(const std::string& s);
std::string to_string(Archetype a);

struct WeatherSample {
  double t = 0.0;  ///< seconds from midnight of the first day
  double T_oa = 0.0;
  double W_oa = 0.0;
  double eta_sol = 0.0;
};

struct WeatherSeries {
  std::vector<WeatherSample> samples;  ///< strictly increasing t

  double t_begin() const { return samples.empty() ? 0.0 : samples.front().t; }
  double t_end() const { return samples.empty() ? 0.0 : samples.back().t; }
  /// Linear interpolation; throws InputError outside the covered interval.
  WeatherSample at(double t) const;
};

/// Reads `timestamp_iso8601,T_oa_C,RH_oa_pct,eta_sol_Wm2`. Times are counted
/// from midnight of the first timestamp's date.
WeatherSeries load_weather(const std::string& path, const PsychroConstants& c = {});
WeatherSeries parse_weather_csv(std::istream& in, const PsychroConstants& c = {});
void write_weather_csv(std::ostream& out, const WeatherSeries& w, const PsychroConstants& c = {});

/// Deterministic synthetic weather covering [t_start, t_start + hours] at
/// `sample_dt` resolution, with small seeded perturbations.
WeatherSeries synth_weather(Archetype a, std::uint64_t seed, double t_start = 8 * 3600.0, double hours = 48.0,
                            double sample_dt = 300.0, const PsychroConstants& c = {});

// -------------------------------------------------------------- occupancy

struct OccupancySchedule {
  double design = 175.0;
  double start_h = 8.0;
  double end_h = 17.0;
  double dip_start_h = 12.0;
  double dip_end_h = 13.0;
  double dip_count = 20.0;
  double q_per_person = 100.0;       ///< [W]
  double omega_per_person = 1.39e-5; ///< [kg/s]

  void validate() const;
};

struct OccupancySample {
  double n_p = 0.0;
  double q_ocp = 0.0;
  double omega_ocp = 0.0;
};

OccupancySample occupancy_at(const OccupancySchedule& s, double t);

ComfortBounds comfort_bounds(const ComfortEnvelope& e, double t);

// --------------------------------------------------------------- scenario

enum class ControllerKind { SlMpc, SMpc, Bl };

ControllerKind parse_controller(const std::string& s);
std::string to_string(ControllerKind k);

struct Scenario {
  std::string name = "hot-humid";
  std::string archetype = "hot-humid";  ///< used when weather_csv is empty
  std::string weather_csv;
  std::uint64_t seed = 1;
  double start_h = 8.0;
  double duration_h = 24.0;
  double dt = 300.0;

  OccupancySchedule occupancy{};
  double q_other = 6000.0;
  double omega_other = 0.0;

  ZoneState initial{};
  ComfortEnvelope envelope{};
  VentilationParams vent{};
  PlantParams plant{};
  MpcParams mpc{};
  BlParams bl{};

  std::string coil_binned;   ///< model files; empty means fit in-process
  std::string coil_compact;
  std::string coil_density = "default";

  int steps() const;
  double t0() const { return start_h * 3600.0; }

  /// Copies the shared blocks (envelope, psychrometrics, power, ventilation,
  /// geometry, step) into the controller parameter blocks and validates.
  void finalize();
};

nlohmann::json scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);

/// Applies `key=value` overrides addressed by dotted paths into the JSON
/// document. Unknown keys raise InputError.
void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides);

/// Default scenario, optionally merged with a config file, then overrides.
Scenario load_scenario(const std::string& config_path, const std::vector<std::string>& overrides);

/// Exogenous inputs for steps [0, count) starting at t_start.
std::vector<ExogenousInput> build_exogenous(const Scenario& s, const WeatherSeries& weather, double t_start,
                                            int count);

WeatherSeries scenario_weather(const Scenario& s);

// ------------------------------------------------------------- closed loop

struct CoilModels {
  BinnedCoilModel binned;
  CompactCoilModel compact;
};

/// Loads the model files named by the scenario, or fits both models on the
/// synthetic testbed at the configured density.
CoilModels scenario_coil_models(const Scenario& s);

struct StepRecord {
  long step = 0;
  double t = 0.0;
  ZoneState x;  ///< state at the start of the step
  ControlCommand u;
  PlantTelemetry telemetry;
  ExogenousInput w;
  ComfortBounds bounds;
  std::string mode;  ///< BL mode, or "mpc"
  std::optional<MpcDiagnostics> diag;
};

struct Trajectory {
  std::string controller;
  double dt = 0.0;
  std::vector<StepRecord> steps;
  ZoneState final_state;
  bool aborted = false;
  std::string error;
};

/// `diag_log` receives one JSON line per MPC solve when non-null.
Trajectory run_closed_loop(const Scenario& s, ControllerKind kind, const CoilModels& coil, int steps = -1,
                           std::ostream* diag_log = nullptr);

struct Metrics {
  double E_total_kWh = 0.0;
  double E_fan_kWh = 0.0;
  double E_cooling_kWh = 0.0;
  double E_reheat_kWh = 0.0;
  double V_T = 0.0;  ///< [degC h]
  double V_W = 0.0;  ///< [kg/kg h]
  double V_T_unoccupied = 0.0;
  double V_W_unoccupied = 0.0;
  long solver_steps = 0;
  long solver_optimal = 0;
  long solver_fallback = 0;
  long solver_recovery = 0;  ///< steps solved only as the soft-comfort recovery problem
  double solver_success_rate = 1.0;
  double mean_solve_time = 0.0;
  double max_solve_time = 0.0;
};

/// Rectangle rule at the step length over the start-of-step samples.
Metrics compute_metrics(const Trajectory& t, const ComfortEnvelope& e);

/// Violations of a single sample.
double temperature_excess(double T_z, const ComfortBounds& b);
double humidity_excess(double W_z, const ComfortBounds& b);

void write_trajectory_csv(std::ostream& out, const Trajectory& t);
/// Reproducible part of the metrics (no wall-clock quantities).
nlohmann::json metrics_to_json(const Metrics& m, const Trajectory& t);
nlohmann::json timing_to_json(const Metrics& m, const Trajectory& t);

}  // namespace hvac
