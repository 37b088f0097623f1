#pragma once

#include <span>

#include "hvac/psychro.hpp"

namespace hvac {

struct PowerParams {
  double alpha_f = 236.0;   ///< fan coefficient [W s^2 / kg^2]
  double eta_cc = 0.9;      ///< cooling coil efficiency
  double COP_c = 3.5;       ///< chiller COP
  double eta_reheat = 0.9;  ///< reheat coil efficiency
  double COP_h = 0.9;       ///< boiler COP

  void validate() const;
};

/// Power value together with a flag raised when a negative driving difference was clipped to zero.
struct ClippedPower {
  double watts = 0.0;
  bool clipped = false;
};

namespace power {

double fan_power(double m_sa, const PowerParams& p);
ClippedPower cooling_power_latent(double m_sa, double h_ma, double h_ca, const PowerParams& p);
ClippedPower cooling_power_sensible(double m_sa, double T_ma, double T_ca, double C_pa,
                                    const PowerParams& p);
/// Throws std::invalid_argument when T_sa < T_ca beyond a 1e-9 degC tolerance.
double reheat_power(double m_sa, double T_sa, double T_ca, double C_pa, const PowerParams& p);

// Unclipped smooth forms for use inside the optimizer.
template <typename S>
S fan_expr(const S& m_sa, const PowerParams& p) {
  return p.alpha_f * (m_sa * m_sa);
}
template <typename S>
S latent_cooling_expr(const S& m_sa, const S& h_ma, const S& h_ca, const PowerParams& p) {
  return m_sa * (h_ma - h_ca) * (1.0 / (p.eta_cc * p.COP_c));
}
template <typename S>
S sensible_cooling_expr(const S& m_sa, const S& T_ma, const S& T_ca, double C_pa,
                        const PowerParams& p) {
  return m_sa * (T_ma - T_ca) * (C_pa / (p.eta_cc * p.COP_c));
}
template <typename S>
S reheat_expr(const S& m_sa, const S& T_sa, const S& T_ca, double C_pa, const PowerParams& p) {
  return m_sa * (T_sa - T_ca) * (C_pa / (p.eta_reheat * p.COP_h));
}

}  // namespace power

struct PowerSample {
  double fan = 0.0;
  double cooling = 0.0;
  double reheat = 0.0;
  double total() const { return fan + cooling + reheat; }
};

struct EnergyTotals {
  double fan_J = 0.0;
  double cooling_J = 0.0;
  double reheat_J = 0.0;
  double total_J = 0.0;
  double total_kWh() const { return total_J / 3.6e6; }
};

inline constexpr double kJoulesPerKWh = 3.6e6;

/// Left-rectangle integration of a uniformly sampled power series.
EnergyTotals total_energy(std::span<const PowerSample> series, double dt);

}  // namespace hvac
