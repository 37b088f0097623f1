#pragma once

#include <optional>
#include <string>
#include <utility>

#include "hvac/comfort.hpp"
#include "hvac/mpc.hpp"
#include "hvac/plant.hpp"

namespace hvac {

enum class BlMode { Cooling, Heating, Deadband };

std::string to_string(BlMode m);

struct PiGains {
  double kp = 0.0;  ///< output units per degC of error
  double ki = 0.0;  ///< output units per degC per second
};

struct BlParams {
  double r_oa = 0.30;
  double T_ca = 12.8;
  double m_sa_high = 4.6;
  double T_sa_high = 30.0;
  double dwell_s = 300.0;
  /// The loops regulate this far inside the band whose edges trigger mode changes.
  double tracking_offset = 0.3;
  PiGains flow{0.8, 4.0e-4};    ///< kg/s per degC above the cooling target
  PiGains supply{5.0, 2.0e-2};  ///< degC per degC below the heating target
  double m_sa_rate = 0.37 / 60.0;  ///< [kg/s per s]
  double T_sa_rate = 0.56 / 60.0;  ///< [degC/s]

  double design_occupancy = 175.0;
  double design_heating_load = 5000.0;  ///< [W]

  ComfortEnvelope envelope{};
  VentilationParams vent{};
  double C_pa = 1006.0;

  void validate() const;

  /// Minimum supply flow for the given occupancy state: ventilation at design
  /// occupancy (zero occupants when unoccupied) divided by r_oa, and at least
  /// the flow that delivers the design heating load at T_sa_high.
  double minimum_flow(bool occupied) const;
};

struct BlState {
  BlMode mode = BlMode::Deadband;
  std::optional<BlMode> candidate;
  double dwell = 0.0;  ///< time the candidate mode has been requested [s]
  double flow_integral = 0.0;
  double supply_integral = 0.0;
  std::optional<ControlCommand> last;
};

/// One step of the single-maximum sequence.
std::pair<BlState, ControlCommand> bl_step(const BlState& s, double T_z, bool occupied, double dt,
                                           const BlParams& p);

}  // namespace hvac
