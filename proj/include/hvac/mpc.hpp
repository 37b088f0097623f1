#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hvac/coil.hpp"
#include "hvac/comfort.hpp"
#include "hvac/nlp/ipm.hpp"
#include "hvac/nlp/problem.hpp"
#include "hvac/plant.hpp"
#include "hvac/power.hpp"
#include "hvac/psychro.hpp"

namespace hvac {

struct VentilationParams {
  double m_oa_p = 0.0043;   ///< outdoor air per person [kg/s]
  double m_oa_A = 3.67e-4;  ///< outdoor air per floor area [kg/(s m^2)]
  double A = 465.0;         ///< floor area [m^2]
  double m_oa_bp = 0.1894;  ///< outdoor air for building pressurization [kg/s]

  /// Outdoor-air mass flow the zone must receive with n_p occupants.
  double required_outdoor_air(double n_p) const;
};

/// max((m_oa_p n_p + m_oa_A A) / r_oa, m_oa_bp / r_oa); +infinity when r_oa <= 0.
double min_flow_bound(double n_p, double r_oa, const VentilationParams& v);

enum class MpcVariant { SL, S };

std::string to_string(MpcVariant v);

struct MpcParams {
  double dt = 300.0;
  int N = 288;
  double R = 1.15e-3;
  double C = 6.0167e7;
  double A_e = 8.12;
  double V = 2790.0;

  double m_sa_low = 0.1705;
  double m_sa_high = 4.6;
  double r_oa_low = 0.0;
  double r_oa_high = 1.0;
  double T_ca_low = 12.8;
  double T_sa_high = 30.0;
  double m_w_low = 0.0;
  double m_w_high = 2.21;
  double m_sa_rate = 0.37 / 60.0;  ///< [kg/s per s]
  double r_oa_rate = 0.06 / 60.0;  ///< [1/s]
  double T_ca_rate = 0.56 / 60.0;  ///< [degC/s]
  double T_sa_rate = 0.56 / 60.0;

  /// Margins by which the planned states stay inside the comfort envelope,
  /// absorbing the mismatch between the controller model and the plant.
  double comfort_margin_T = 0.1;
  double comfort_margin_W = 2.0e-4;

  /// Recovery problems drop the hard comfort bounds on the planned states
  /// and charge a smoothed exact penalty on violations of the same band
  /// instead [kWh per degC step, kWh per (kg/kg) step].
  double recovery_penalty_T = 50.0;
  double recovery_penalty_W = 1.2e5;
  double recovery_smoothing_T = 0.02;  ///< [degC]
  double recovery_smoothing_W = 5.0e-5;

  VentilationParams vent{};
  ComfortEnvelope envelope{};
  PsychroConstants psychro{};
  PowerParams power{};
  CompactCoilModel coil{};
  nlp::IpmOptions solver{};

  void validate() const;
};

/// Exogenous forecast over the horizon; w[k] applies on [t0 + k dt, t0 + (k+1) dt).
struct MpcForecast {
  double t0 = 0.0;
  std::vector<ExogenousInput> w;
};

/// Column layout of the decision vector. Temperatures are stored in degC/10
/// and humidity ratios times 100.
struct MpcLayout {
  static constexpr double kTScale = 10.0;
  static constexpr double kWScale = 100.0;

  MpcVariant variant = MpcVariant::SL;
  int N = 0;

  int per_stage() const { return variant == MpcVariant::SL ? 8 : 5; }
  int n() const { return per_stage() * N; }
  int m_sa(int k) const { return per_stage() * k + 0; }
  int r_oa(int k) const { return per_stage() * k + 1; }
  int T_ca(int k) const { return per_stage() * k + 2; }
  int T_sa(int k) const { return per_stage() * k + 3; }
  int m_w(int k) const { return variant == MpcVariant::SL ? per_stage() * k + 4 : -1; }
  int W_ca(int k) const { return variant == MpcVariant::SL ? per_stage() * k + 5 : -1; }
  /// State after stage k, that is x(k+1).
  int T_z(int k) const { return variant == MpcVariant::SL ? per_stage() * k + 6 : per_stage() * k + 4; }
  int W_z(int k) const { return variant == MpcVariant::SL ? per_stage() * k + 7 : -1; }
};

enum RowKind : int {
  kRowThermal = 0,
  kRowHumidity,
  kRowCoilT,
  kRowCoilW,
  kRowTcaBelowTma,
  kRowTsaAboveTca,
  kRowWcaBelowWma,
  kRowVentilation,
  kRowRateMsa,
  kRowRateRoa,
  kRowRateTca,
  kRowRateTsa,
  kRowKinds
};

struct MpcProblem {
  nlp::Problem nlp;
  MpcLayout layout;
  double t0 = 0.0;
  std::vector<std::array<int, kRowKinds>> rows;  ///< row index per stage and kind, -1 if absent
  std::shared_ptr<const void> context;           ///< keeps element data alive
};

/// Physical values of one stage of a plan.
struct StagePlan {
  ControlCommand u;
  double m_w = 0.0;
  double W_ca = 0.0;
  double T_z = 0.0;  ///< state at the end of the stage
  double W_z = 0.0;
};

MpcProblem build_slmpc_problem(const ZoneState& x0, const MpcForecast& f,
                               const std::optional<ControlCommand>& prev_cmd, const MpcParams& p,
                               bool recovery = false);
MpcProblem build_smpc_problem(const ZoneState& x0, const MpcForecast& f,
                              const std::optional<ControlCommand>& prev_cmd, const MpcParams& p,
                              bool recovery = false);
MpcProblem build_mpc_problem(MpcVariant v, const ZoneState& x0, const MpcForecast& f,
                             const std::optional<ControlCommand>& prev_cmd, const MpcParams& p,
                             bool recovery = false);

std::vector<StagePlan> decode_plan(const MpcLayout& L, const std::vector<double>& x);
std::vector<double> encode_plan(const MpcLayout& L, const std::vector<StagePlan>& plan);

/// Mid-box commands, m_w = 0.5 kg/s, W_ca from the compact coil and states
/// rolled forward through the controller model.
std::vector<StagePlan> default_initial_plan(MpcVariant v, const ZoneState& x0, const MpcForecast& f,
                                            const MpcParams& p);

/// Objective [J] of a plan recomputed directly from the power models.
double plan_energy_J(MpcVariant v, const ZoneState& x0, const MpcForecast& f, const std::vector<StagePlan>& plan,
                     const MpcParams& p);

struct Solution {
  nlp::Status status = nlp::Status::NumericalError;
  std::vector<double> x;
  double objective_J = 0.0;
  double dual_inf = 0.0;
  double primal_inf = 0.0;
  double compl_inf = 0.0;
  double kkt_error = 0.0;
  int iterations = 0;
  double wall_time = 0.0;
  nlp::IpmStart duals;  ///< primal and multipliers, reusable as a warm start

  bool ok() const { return status == nlp::Status::Optimal; }
};

Solution solve_nlp(MpcProblem& problem, const nlp::IpmOptions& opt, const nlp::IpmStart* warm = nullptr);

/// Shift a solution one stage forward, repeating the final stage.
nlp::IpmStart shift_solution(const MpcProblem& old_problem, const nlp::IpmStart& s, const MpcProblem& new_problem);

struct MpcDiagnostics {
  long step = 0;
  double t = 0.0;
  MpcVariant variant = MpcVariant::SL;
  std::string status;
  int iterations = 0;
  double objective_J = 0.0;
  double dual_inf = 0.0, primal_inf = 0.0, compl_inf = 0.0, kkt_error = 0.0;
  double wall_time = 0.0;
  bool warm_start = false;
  bool retried_cold = false;
  bool recovery = false;  ///< solved as the soft-comfort recovery problem
  bool fallback = false;

  /// Wall time is left out by default so that logs are reproducible.
  std::string to_json_line(bool with_wall_time = false) const;
};

struct MpcController {
  MpcVariant variant = MpcVariant::SL;
  MpcParams params;
  std::optional<ControlCommand> prev_cmd;
  std::optional<MpcProblem> last_problem;
  std::optional<nlp::IpmStart> last_start;
  std::optional<std::vector<StagePlan>> last_plan;
  long step = 0;
};

/// Command applied when no solution and no previous command exist.
ControlCommand mpc_safe_default_command(const MpcParams& p);

/// One receding-horizon step: warm-started solve, then a cold start, then a
/// cold recovery problem; if all fail the previous command is repeated.
std::pair<ControlCommand, MpcDiagnostics> mpc_step(MpcController& c, const ZoneState& measurement,
                                                   const MpcForecast& f);

struct RcReduction {
  double R = 0.0;
  double C = 0.0;
  double rise_time_2r2c = 0.0;  ///< 10-90 % rise time of T_z to a T_oa step [s]
};

RcReduction reduce_2r2c_to_1r1c(const PlantParams& plant);

}  // namespace hvac
