#pragma once

#include <stdexcept>
#include <string>

#include "hvac/coil.hpp"
#include "hvac/power.hpp"
#include "hvac/psychro.hpp"

namespace hvac {

struct ZoneState {
  double T_z = 23.0;   ///< zone air temperature [degC]
  double T_w = 25.0;   ///< wall temperature [degC]
  double W_z = 0.009;  ///< zone humidity ratio [kg/kg]
};

struct ExogenousInput {
  double eta_sol = 0.0;      ///< solar irradiance [W/m^2]
  double T_oa = 20.0;        ///< outdoor temperature [degC]
  double W_oa = 0.008;       ///< outdoor humidity ratio [kg/kg]
  double q_ocp = 0.0;        ///< occupant sensible load [W]
  double q_other = 0.0;      ///< other sensible load [W]
  double omega_ocp = 0.0;    ///< occupant moisture generation [kg/s]
  double omega_other = 0.0;  ///< other moisture generation [kg/s]
  double n_p = 0.0;          ///< occupant count
};

/// u = [m_sa, r_oa, T_ca, T_sa]
struct ControlCommand {
  double m_sa = 0.0;
  double r_oa = 0.0;
  double T_ca = 0.0;
  double T_sa = 0.0;

  bool operator==(const ControlCommand&) const = default;
};

struct PlantParams {
  double C_z = 3.132e7;  ///< [J/degC]
  double C_w = 7.092e7;  ///< [J/degC]
  double R_z = 0.6e-3;   ///< wall to outdoor [degC/W]
  double R_w = 0.55e-3;  ///< zone to wall [degC/W]
  double A_e = 8.12;     ///< effective solar aperture [m^2]
  double V = 2790.0;     ///< zone volume [m^3]
  double m_w_max = 2.21; ///< chilled-water flow limit [kg/s]
  double substep = 30.0; ///< inner Euler step [s]; 0 integrates the full step at once
  PsychroConstants psychro{};
  PowerParams power{};
  const BinnedCoilModel* coil = nullptr;

  void validate() const;
};

/// Raised when an update produces a non-physical state.
class PlantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CoilActuation {
  double m_w = 0.0;
  double T_ca = 0.0;
  double W_ca = 0.0;
  bool saturated = false;  ///< m_w pinned at its limit without reaching the command
  bool clamped = false;    ///< coil inputs were outside the fitted domain
};

struct PlantTelemetry {
  double m_w = 0.0;
  MoistAirState mixed;
  MoistAirState conditioned;
  MoistAirState supply;
  double P_fan = 0.0;
  double P_cc = 0.0;
  double P_reheat = 0.0;
  bool coil_saturated = false;
  bool coil_clamped = false;
  bool cooling_clipped = false;   ///< enthalpy rose across the coil and P_cc was clipped to zero
  bool supply_raised = false;     ///< T_sa command below achieved T_ca; supply follows T_ca
};

struct PlantStepResult {
  ZoneState state;
  PlantTelemetry telemetry;
};

/// q = m_sa C_pa (T_sa - T_z)
double hvac_heat_flux(double m_sa, double T_sa, double T_z, double C_pa);

/// Mass-weighted mixing of temperature and humidity ratio.
MoistAirState mix_air(double r_oa, const MoistAirState& outdoor, const MoistAirState& zone);

/// Smallest chilled-water flow whose binned-model outlet reaches T_ca_cmd (bisection to 1e-4 kg/s).
CoilActuation actuate_coil(const BinnedCoilModel& coil, const MoistAirState& mixed, double m_sa,
                           double T_ca_cmd, double m_w_max);

/// One explicit-Euler update of the linear two-node thermal network.
/// q_zone is the sum of all heat flows into the zone air except the wall exchange.
void thermal_euler(const PlantParams& p, double& T_z, double& T_w, double q_zone, double T_oa, double dt);

PlantStepResult plant_step(const PlantParams& p, const ZoneState& x, const ControlCommand& u,
                           const ExogenousInput& w, double dt);

}  // namespace hvac
