#include "hvac/comfort.hpp"

#include <cmath>
#include <stdexcept>

namespace hvac {

double hour_of_day(double t_seconds) {
  double r = std::fmod(t_seconds, kSecondsPerDay);
  if (r < 0) r += kSecondsPerDay;
  return r / 3600.0;
}

bool ComfortEnvelope::is_occupied(double t_seconds) const {
  const double h = hour_of_day(t_seconds);
  return h >= occ_start_h && h < occ_end_h;
}

ComfortBounds ComfortEnvelope::at(double t_seconds) const {
  return is_occupied(t_seconds) ? occupied : unoccupied;
}

void ComfortEnvelope::validate() const {
  auto ok = [](const ComfortBounds& b) { return b.T_low < b.T_high && b.W_low < b.W_high; };
  if (!ok(occupied) || !ok(unoccupied)) {
    throw std::invalid_argument("comfort envelope: every band needs low < high");
  }
  if (occupied.T_low < unoccupied.T_low || occupied.T_high > unoccupied.T_high ||
      occupied.W_low < unoccupied.W_low || occupied.W_high > unoccupied.W_high) {
    throw std::invalid_argument("comfort envelope: occupied band must lie inside the unoccupied band");
  }
  if (!(occ_start_h >= 0 && occ_start_h < occ_end_h && occ_end_h <= 24)) {
    throw std::invalid_argument("comfort envelope: invalid occupied hours");
  }
}

}  // namespace hvac
