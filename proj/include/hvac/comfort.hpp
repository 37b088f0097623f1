#pragma once

namespace hvac {

inline constexpr double kSecondsPerDay = 86400.0;

/// Hour of day in [0, 24) for a time measured in seconds from midnight of day zero.
double hour_of_day(double t_seconds);

struct ComfortBounds {
  double T_low = 0.0, T_high = 0.0;
  double W_low = 0.0, W_high = 0.0;
};

/// Step schedule of admissible zone conditions: one band during occupied
/// hours, a wider one otherwise.
struct ComfortEnvelope {
  double occ_start_h = 8.0;
  double occ_end_h = 17.0;
  ComfortBounds occupied{21.1, 23.3, 0.0046, 0.0104};
  ComfortBounds unoccupied{18.9, 25.6, 0.0046, 0.0104};

  bool is_occupied(double t_seconds) const;
  ComfortBounds at(double t_seconds) const;

  /// Throws std::invalid_argument unless low < high in both bands and the
  /// occupied band lies inside the unoccupied one.
  void validate() const;
};

}  // namespace hvac
