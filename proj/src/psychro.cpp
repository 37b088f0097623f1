#include "hvac/psychro.hpp"

#include <cmath>
#include <string>

namespace hvac {

void PsychroConstants::validate() const {
  if (!(C_pa > 0 && C_pw > 0 && g_H2O > 0 && R_g > 0 && P_atm > 0 && P_da > 0)) {
    throw std::invalid_argument("psychrometric constants must be strictly positive");
  }
  if (!(P_da < P_atm)) {
    throw std::invalid_argument("P_da must be below P_atm");
  }
}

namespace psychro {

namespace {
constexpr double kMagnusA = 610.94;
constexpr double kMagnusB = 17.625;
constexpr double kMagnusC = 243.04;
}  // namespace

double saturation_vapor_pressure_unchecked(double T) noexcept {
  return kMagnusA * std::exp(kMagnusB * T / (T + kMagnusC));
}

double saturation_vapor_pressure(double T) {
  if (!(T >= -50.0 && T <= 80.0)) {
    throw DomainError("saturation_vapor_pressure: T = " + std::to_string(T) +
                      " degC outside [-50, 80]");
  }
  return saturation_vapor_pressure_unchecked(T);
}

double humidity_ratio_from_rh(double T, double rh, double P_atm) {
  if (!(rh >= 0.0 && rh <= 1.0)) {
    throw DomainError("humidity_ratio_from_rh: RH = " + std::to_string(rh) + " outside [0, 1]");
  }
  const double pv = rh * saturation_vapor_pressure(T);
  if (pv >= P_atm) {
    throw DomainError("humidity_ratio_from_rh: vapor pressure reaches total pressure");
  }
  return kMolarMassRatio * pv / (P_atm - pv);
}

double saturation_humidity_ratio(double T, double P_atm) noexcept {
  const double ps = saturation_vapor_pressure_unchecked(T);
  return kMolarMassRatio * ps / (P_atm - ps);
}

RelativeHumidity rh_from_humidity_ratio(double T, double W, double P_atm) {
  if (!(W >= 0.0)) {
    throw DomainError("rh_from_humidity_ratio: negative humidity ratio");
  }
  const double pv = W * P_atm / (kMolarMassRatio + W);
  RelativeHumidity out;
  out.raw = pv / saturation_vapor_pressure(T);
  out.supersaturated = out.raw > 1.0;
  out.value = out.supersaturated ? 1.0 : out.raw;
  return out;
}

double dew_point(double W, double P_atm) {
  if (!(W > 0.0)) {
    throw DomainError("dew_point: humidity ratio must be positive");
  }
  const double pv = W * P_atm / (kMolarMassRatio + W);
  const double g = std::log(pv / kMagnusA);
  return kMagnusC * g / (kMagnusB - g);
}

}  // namespace psychro
}  // namespace hvac
