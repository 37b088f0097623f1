#include "hvac/power.hpp"

#include <stdexcept>
#include <string>

namespace hvac {

void PowerParams::validate() const {
  if (!(alpha_f > 0 && eta_cc > 0 && COP_c > 0 && eta_reheat > 0 && COP_h > 0)) {
    throw std::invalid_argument("power parameters must be strictly positive");
  }
}

namespace power {

double fan_power(double m_sa, const PowerParams& p) { return fan_expr(m_sa, p); }

ClippedPower cooling_power_latent(double m_sa, double h_ma, double h_ca, const PowerParams& p) {
  if (h_ma < h_ca) return {0.0, true};
  return {latent_cooling_expr(m_sa, h_ma, h_ca, p), false};
}

ClippedPower cooling_power_sensible(double m_sa, double T_ma, double T_ca, double C_pa,
                                    const PowerParams& p) {
  if (T_ma < T_ca) return {0.0, true};
  return {sensible_cooling_expr(m_sa, T_ma, T_ca, C_pa, p), false};
}

double reheat_power(double m_sa, double T_sa, double T_ca, double C_pa, const PowerParams& p) {
  if (T_sa < T_ca - 1e-9) {
    throw std::invalid_argument("reheat_power: T_sa = " + std::to_string(T_sa) +
                                " below T_ca = " + std::to_string(T_ca));
  }
  if (T_sa <= T_ca) return 0.0;
  return reheat_expr(m_sa, T_sa, T_ca, C_pa, p);
}

}  // namespace power

EnergyTotals total_energy(std::span<const PowerSample> series, double dt) {
  EnergyTotals e;
  for (const auto& s : series) {
    e.fan_J += s.fan * dt;
    e.cooling_J += s.cooling * dt;
    e.reheat_J += s.reheat * dt;
  }
  e.total_J = e.fan_J + e.cooling_J + e.reheat_J;
  return e;
}

}  // namespace hvac
