#include "hvac/plant.hpp"

#include <algorithm>
#include <cmath>

namespace hvac {

void PlantParams::validate() const {
  if (!(C_z > 0 && C_w > 0 && R_z > 0 && R_w > 0 && A_e > 0 && V > 0 && m_w_max > 0)) {
    throw std::invalid_argument("plant parameters must be strictly positive");
  }
  if (substep < 0) throw std::invalid_argument("plant substep must be non-negative");
  psychro.validate();
  power.validate();
}

double hvac_heat_flux(double m_sa, double T_sa, double T_z, double C_pa) {
  return m_sa * C_pa * (T_sa - T_z);
}

MoistAirState mix_air(double r_oa, const MoistAirState& outdoor, const MoistAirState& zone) {
  if (r_oa <= 0.0) return zone;
  if (r_oa >= 1.0) return outdoor;
  return {r_oa * outdoor.T + (1.0 - r_oa) * zone.T, r_oa * outdoor.W + (1.0 - r_oa) * zone.W};
}

CoilActuation actuate_coil(const BinnedCoilModel& coil, const MoistAirState& mixed, double m_sa,
                           double T_ca_cmd, double m_w_max) {
  CoilActuation a;
  a.T_ca = mixed.T;
  a.W_ca = mixed.W;
  if (mixed.T <= T_ca_cmd) return a;

  auto eval = [&](double m_w) { return eval_binned_detail(coil, {mixed.T, mixed.W, m_sa, m_w}); };

  const BinnedEval top = eval(m_w_max);
  a.clamped = top.clamped;
  if (top.out.T_ca > T_ca_cmd) {
    a.m_w = m_w_max;
    a.T_ca = top.out.T_ca;
    a.W_ca = top.out.W_ca;
    a.saturated = true;
    return a;
  }
  double lo = 0.0, hi = m_w_max;
  while (hi - lo > 1e-4) {
    const double mid = 0.5 * (lo + hi);
    if (eval(mid).out.T_ca <= T_ca_cmd) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  const BinnedEval r = eval(hi);
  a.m_w = hi;
  a.T_ca = r.out.T_ca;
  a.W_ca = r.out.W_ca;
  a.clamped = a.clamped || r.clamped;
  return a;
}

void thermal_euler(const PlantParams& p, double& T_z, double& T_w, double q_zone, double T_oa,
                   double dt) {
  const double dTz = ((T_w - T_z) / p.R_w + q_zone) / p.C_z;
  const double dTw = ((T_oa - T_w) / p.R_z + (T_z - T_w) / p.R_w) / p.C_w;
  T_z += dt * dTz;
  T_w += dt * dTw;
}

namespace {

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw PlantError(std::string("plant_step: non-finite ") + what);
}

}  // namespace

PlantStepResult plant_step(const PlantParams& p, const ZoneState& x, const ControlCommand& u,
                           const ExogenousInput& w, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("plant_step: dt must be positive");
  if (!(u.m_sa >= 0.0) || !(u.r_oa >= 0.0 && u.r_oa <= 1.0)) {
    throw std::invalid_argument("plant_step: command outside actuator range");
  }
  check_finite(u.T_ca, "T_ca command");
  check_finite(u.T_sa, "T_sa command");
  const PsychroConstants& c = p.psychro;

  PlantStepResult res;
  PlantTelemetry& tel = res.telemetry;
  const MoistAirState outdoor{w.T_oa, w.W_oa};
  const MoistAirState zone{x.T_z, x.W_z};
  tel.mixed = mix_air(u.r_oa, outdoor, zone);

  CoilActuation act;
  act.T_ca = tel.mixed.T;
  act.W_ca = tel.mixed.W;
  if (u.m_sa > 0.0) {
    if (p.coil == nullptr) throw std::invalid_argument("plant_step: no coil model attached");
    act = actuate_coil(*p.coil, tel.mixed, u.m_sa, u.T_ca, p.m_w_max);
  }
  tel.m_w = act.m_w;
  tel.coil_saturated = act.saturated;
  tel.coil_clamped = act.clamped;
  tel.conditioned = {act.T_ca, act.W_ca};
  tel.supply_raised = u.T_sa < act.T_ca;
  tel.supply = {std::max(u.T_sa, act.T_ca), act.W_ca};

  tel.P_fan = power::fan_power(u.m_sa, p.power);
  const double h_ma = u.r_oa * psychro::moist_air_enthalpy(outdoor, c) +
                      (1.0 - u.r_oa) * psychro::moist_air_enthalpy(zone, c);
  const double h_ca = psychro::moist_air_enthalpy(tel.conditioned, c);
  const ClippedPower pcc = power::cooling_power_latent(u.m_sa, h_ma, h_ca, p.power);
  tel.P_cc = pcc.watts;
  tel.cooling_clipped = pcc.clipped;
  tel.P_reheat = power::reheat_power(u.m_sa, tel.supply.T, tel.conditioned.T, c.C_pa, p.power);

  const int n_sub = p.substep > 0.0 ? std::max(1, static_cast<int>(std::ceil(dt / p.substep - 1e-9))) : 1;
  const double h = dt / n_sub;
  const double q_ext = p.A_e * w.eta_sol + w.q_ocp + w.q_other;
  const double omega = w.omega_ocp + w.omega_other;
  const double W_sa = tel.supply.W;

  double T_z = x.T_z, T_w = x.T_w, W_z = x.W_z;
  for (int s = 0; s < n_sub; ++s) {
    const double q_hvac = hvac_heat_flux(u.m_sa, tel.supply.T, T_z, c.C_pa);
    const double gain = c.R_g * (T_z + psychro::kKelvinOffset) / (p.V * c.P_da);
    const double moisture = omega + u.m_sa * (W_sa - W_z) / (1.0 + W_sa);
    check_finite(q_hvac, "HVAC heat flux");
    check_finite(moisture, "moisture balance");
    W_z += h * gain * moisture;
    thermal_euler(p, T_z, T_w, q_hvac + q_ext, w.T_oa, h);
    check_finite(T_z, "zone temperature");
    check_finite(T_w, "wall temperature");
    if (!(W_z >= 0.0)) {
      throw PlantError("plant_step: zone humidity ratio became negative (moisture term " +
                       std::to_string(moisture) + " kg/s)");
    }
  }
  res.state = {T_z, T_w, W_z};
  return res;
}

}  // namespace hvac
