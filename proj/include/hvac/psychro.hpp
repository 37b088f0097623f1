#pragma once

#include <stdexcept>

namespace hvac {

/// Thrown when a physical input lies outside the range a correlation supports.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Dry-bulb temperature and humidity ratio of an air stream.
struct MoistAirState {
  double T = 0.0;  ///< dry-bulb temperature [degC]
  double W = 0.0;  ///< humidity ratio [kg water / kg dry air]
};

struct PsychroConstants {
  double C_pa = 1006.0;     ///< dry air specific heat [J/(kg K)]
  double C_pw = 1860.0;     ///< water vapor specific heat [J/(kg K)]
  double g_H2O = 2.501e6;   ///< heat of evaporation at 0 degC [J/kg]
  double R_g = 287.055;     ///< gas constant of dry air [J/(kg K)]
  double P_atm = 101325.0;  ///< total pressure [Pa]
  double P_da = 99880.0;    ///< dry-air partial pressure in the zone balance [Pa]

  /// Throws std::invalid_argument if any constant is non-positive or P_da >= P_atm.
  void validate() const;
};

namespace psychro {

inline constexpr double kMolarMassRatio = 0.621945;
inline constexpr double kKelvinOffset = 273.15;

/// Magnus-form saturation pressure over water [Pa]. Valid for -50..80 degC
/// (the boiling-point check at 100 degC is available through the unchecked variant).
double saturation_vapor_pressure(double T);

/// Same formula without the range check.
double saturation_vapor_pressure_unchecked(double T) noexcept;

double humidity_ratio_from_rh(double T, double rh, double P_atm = 101325.0);

/// Humidity ratio of saturated air at T; no range check.
double saturation_humidity_ratio(double T, double P_atm = 101325.0) noexcept;

struct RelativeHumidity {
  double value = 0.0;          ///< clipped to [0, 1]
  double raw = 0.0;            ///< unclipped ratio p_v / p_sat
  bool supersaturated = false;
};

RelativeHumidity rh_from_humidity_ratio(double T, double W, double P_atm = 101325.0);

/// Dew point of air with humidity ratio W (inverse of the Magnus form).
double dew_point(double W, double P_atm = 101325.0);

/// h = C_pa T + W (g_H2O + C_pw T)  [J/kg dry air]
template <typename Scalar>
Scalar moist_air_enthalpy(const Scalar& T, const Scalar& W, const PsychroConstants& c) {
  return c.C_pa * T + W * (c.g_H2O + c.C_pw * T);
}

inline double moist_air_enthalpy(const MoistAirState& s, const PsychroConstants& c) {
  return moist_air_enthalpy<double>(s.T, s.W, c);
}

}  // namespace psychro
}  // namespace hvac
