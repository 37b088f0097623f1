#include "hvac/baseline.hpp"

#include <algorithm>
#include <stdexcept>

namespace hvac {

std::string to_string(BlMode m) {
  switch (m) {
    case BlMode::Cooling: return "cooling";
    case BlMode::Heating: return "heating";
    case BlMode::Deadband: return "deadband";
  }
  return "unknown";
}

void BlParams::validate() const {
  envelope.validate();
  if (!(r_oa > 0 && r_oa <= 1)) throw std::invalid_argument("baseline: r_oa must lie in (0, 1]");
  if (!(T_ca < T_sa_high)) throw std::invalid_argument("baseline: T_ca must be below T_sa_high");
  if (!(dwell_s >= 0 && tracking_offset >= 0)) throw std::invalid_argument("baseline: negative dwell or offset");
  if (!(m_sa_rate > 0 && T_sa_rate > 0)) throw std::invalid_argument("baseline: rate limits must be positive");
  if (flow.kp < 0 || flow.ki < 0 || supply.kp < 0 || supply.ki < 0) {
    throw std::invalid_argument("baseline: PI gains must be non-negative");
  }
  for (const bool occ : {true, false}) {
    const ComfortBounds& b = occ ? envelope.occupied : envelope.unoccupied;
    if (!(b.T_low + tracking_offset < b.T_high - tracking_offset)) {
      throw std::invalid_argument("baseline: heating setpoint must stay below cooling setpoint");
    }
    if (!(minimum_flow(occ) < m_sa_high)) throw std::invalid_argument("baseline: minimum flow exceeds m_sa_high");
  }
}

double BlParams::minimum_flow(bool occupied) const {
  const double n_p = occupied ? design_occupancy : 0.0;
  const double vent_flow = vent.required_outdoor_air(n_p) / r_oa;
  const double heat_flow = design_heating_load / (C_pa * (T_sa_high - envelope.occupied.T_low));
  return std::max(vent_flow, heat_flow);
}

std::pair<BlState, ControlCommand> bl_step(const BlState& s, double T_z, bool occupied, double dt,
                                           const BlParams& p) {
  if (!(dt > 0)) throw std::invalid_argument("bl_step: dt must be positive");
  const ComfortBounds& band = occupied ? p.envelope.occupied : p.envelope.unoccupied;
  const double cool_sp = band.T_high;
  const double heat_sp = band.T_low;
  const double cool_target = cool_sp - p.tracking_offset;
  const double heat_target = heat_sp + p.tracking_offset;
  const double m_low = p.minimum_flow(occupied);

  BlState n = s;

  // Requested mode from the current zone temperature. The loops hand back to
  // deadband once they have wound down to their resting output.
  BlMode want = s.mode;
  if (T_z > cool_sp) {
    want = BlMode::Cooling;
  } else if (T_z < heat_sp) {
    want = BlMode::Heating;
  } else if (s.mode == BlMode::Cooling && s.last && s.last->m_sa <= m_low + 1e-9 && T_z < cool_target) {
    want = BlMode::Deadband;
  } else if (s.mode == BlMode::Heating && s.last && s.last->T_sa <= p.T_ca + 1e-9 && T_z > heat_target) {
    want = BlMode::Deadband;
  }

  if (want == s.mode) {
    n.candidate.reset();
    n.dwell = 0.0;
  } else {
    n.dwell = (s.candidate == want) ? s.dwell + dt : dt;
    n.candidate = want;
    if (n.dwell > p.dwell_s) {
      n.mode = want;
      n.candidate.reset();
      n.dwell = 0.0;
      n.flow_integral = 0.0;
      n.supply_integral = 0.0;
    }
  }

  const ControlCommand prev = s.last.value_or(ControlCommand{m_low, p.r_oa, p.T_ca, p.T_ca});
  auto rate_limit = [dt](double target, double last, double rate) {
    return std::clamp(target, last - rate * dt, last + rate * dt);
  };

  ControlCommand u{m_low, p.r_oa, p.T_ca, p.T_ca};
  if (n.mode == BlMode::Cooling) {
    const double e = T_z - cool_target;
    const double I = n.flow_integral + p.flow.ki * e * dt;
    const double raw = std::clamp(m_low + p.flow.kp * e + I, m_low, p.m_sa_high);
    u.m_sa = rate_limit(raw, prev.m_sa, p.m_sa_rate);
    n.flow_integral = u.m_sa - m_low - p.flow.kp * e;  // back-calculation keeps the integrator consistent
  } else {
    u.m_sa = rate_limit(m_low, prev.m_sa, p.m_sa_rate);
  }
  if (n.mode == BlMode::Heating) {
    const double e = heat_target - T_z;
    const double I = n.supply_integral + p.supply.ki * e * dt;
    const double raw = std::clamp(p.T_ca + p.supply.kp * e + I, p.T_ca, p.T_sa_high);
    u.T_sa = std::max(p.T_ca, rate_limit(raw, prev.T_sa, p.T_sa_rate));
    n.supply_integral = u.T_sa - p.T_ca - p.supply.kp * e;
  } else {
    u.T_sa = std::max(p.T_ca, rate_limit(p.T_ca, prev.T_sa, p.T_sa_rate));
  }
  n.last = u;
  return {n, u};
}

}  // namespace hvac
