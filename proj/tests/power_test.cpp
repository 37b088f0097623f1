#include <doctest.h>

#include <random>
#include <vector>

#include "hvac/power.hpp"

using namespace hvac;
using doctest::Approx;

TEST_CASE("fan power is quadratic in flow") {
  const PowerParams p;
  CHECK(power::fan_power(0.0, p) == 0.0);
  CHECK(power::fan_power(4.6, p) == Approx(4993.76).epsilon(1e-12));
  CHECK(power::fan_power(4.6, p) == Approx(4994.0).epsilon(1e-4));
  CHECK(power::fan_power(2.0, p) / power::fan_power(1.0, p) == Approx(4.0).epsilon(1e-15));
}

TEST_CASE("latent-aware cooling power") {
  PowerParams p;
  CHECK(power::cooling_power_latent(2.0, 40000.0, 40000.0, p).watts == 0.0);
  // 2 * 20000 / (0.9 * 3.5)
  CHECK(power::cooling_power_latent(2.0, 55000.0, 35000.0, p).watts == Approx(12698.412698412698).epsilon(1e-12));
  const double full = power::cooling_power_latent(2.0, 55000.0, 35000.0, p).watts;
  p.COP_c /= 2.0;
  CHECK(power::cooling_power_latent(2.0, 55000.0, 35000.0, p).watts == Approx(2.0 * full).epsilon(1e-14));

  const ClippedPower neg = power::cooling_power_latent(2.0, 30000.0, 35000.0, PowerParams{});
  CHECK(neg.watts == 0.0);
  CHECK(neg.clipped);
}

TEST_CASE("sensible cooling power") {
  const PowerParams p;
  CHECK(power::cooling_power_sensible(2.0, 20.0, 20.0, 1006.0, p).watts == 0.0);
  // 2 * 1006 * 13.2 / 3.15
  CHECK(power::cooling_power_sensible(2.0, 26.0, 12.8, 1006.0, p).watts ==
        Approx(8431.238095238095).epsilon(1e-12));
  CHECK(power::cooling_power_sensible(2.0, 26.0, 12.8, 1006.0, p).watts == Approx(8430.0).epsilon(2e-4));
  CHECK(power::cooling_power_sensible(2.0, 12.0, 12.8, 1006.0, p).clipped);
}

TEST_CASE("sensible power never exceeds latent-aware power when the coil dries the air") {
  const PowerParams p;
  const PsychroConstants c;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> UT(15.0, 40.0), UD(0.0, 15.0), UW(0.003, 0.02), UF(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const double T_ma = UT(rng), T_ca = T_ma - UD(rng);
    const double W_ma = UW(rng), W_ca = W_ma * UF(rng);
    const double m = 0.2 + 4.0 * UF(rng);
    const double hs = power::cooling_power_sensible(m, T_ma, T_ca, c.C_pa, p).watts;
    // Sensible part uses C_pa only; the enthalpy drop also contains the vapor terms.
    const double h_ma = psychro::moist_air_enthalpy(T_ma, W_ma, c);
    const double h_ca = psychro::moist_air_enthalpy(T_ca, W_ca, c);
    const double hl = power::cooling_power_latent(m, h_ma, h_ca, p).watts;
    CHECK(hs <= hl + 1e-9);
  }
}

TEST_CASE("reheat power") {
  const PowerParams p;
  CHECK(power::reheat_power(1.0, 12.8, 12.8, 1006.0, p) == 0.0);
  // 1006 * 17.2 / 0.81 is 21361.98 W; the rounded figure 21357 sits within 0.03 %.
  CHECK(power::reheat_power(1.0, 30.0, 12.8, 1006.0, p) == Approx(21361.975308641973).epsilon(1e-12));
  CHECK(power::reheat_power(1.0, 30.0, 12.8, 1006.0, p) == Approx(21357.0).epsilon(3e-4));
  CHECK(power::reheat_power(2.0, 30.0, 12.8, 1006.0, p) ==
        Approx(2.0 * power::reheat_power(1.0, 30.0, 12.8, 1006.0, p)).epsilon(1e-15));
  CHECK_THROWS_AS(power::reheat_power(1.0, 12.0, 12.8, 1006.0, p), std::invalid_argument);
  CHECK_NOTHROW(power::reheat_power(1.0, 12.8 - 1e-10, 12.8, 1006.0, p));
}

TEST_CASE("homogeneity in flow") {
  const PowerParams p;
  for (double s : {0.5, 2.0, 3.7}) {
    CHECK(power::cooling_power_latent(s * 1.3, 50000, 30000, p).watts ==
          Approx(s * power::cooling_power_latent(1.3, 50000, 30000, p).watts).epsilon(1e-14));
    CHECK(power::cooling_power_sensible(s * 1.3, 25, 13, 1006, p).watts ==
          Approx(s * power::cooling_power_sensible(1.3, 25, 13, 1006, p).watts).epsilon(1e-14));
    CHECK(power::fan_power(s * 1.3, p) == Approx(s * s * power::fan_power(1.3, p)).epsilon(1e-14));
  }
}

TEST_CASE("mixed-air enthalpy is affine in the outdoor-air ratio") {
  const PsychroConstants c;
  const double h_oa = psychro::moist_air_enthalpy(32.0, 0.016, c);
  const double h_z = psychro::moist_air_enthalpy(23.0, 0.009, c);
  auto h = [&](double r) { return r * h_oa + (1 - r) * h_z; };
  for (double r = 0.0; r <= 0.9; r += 0.1) {
    CHECK(h(r + 0.1) - h(r) == Approx(0.1 * (h_oa - h_z)).epsilon(1e-9));
  }
}

TEST_CASE("energy integration") {
  std::vector<PowerSample> s(288, PowerSample{1000.0, 0.0, 0.0});
  const EnergyTotals e = total_energy(s, 300.0);
  CHECK(e.total_J == Approx(86.4e6).epsilon(1e-15));
  CHECK(e.total_kWh() == Approx(24.0).epsilon(1e-15));

  std::vector<PowerSample> zero(10);
  CHECK(total_energy(zero, 300.0).total_J == 0.0);

  std::vector<PowerSample> mixed;
  for (int i = 0; i < 20; ++i) mixed.push_back({10.0 * i, 3.0 * i * i, 7.0});
  const std::span<const PowerSample> all(mixed);
  const double whole = total_energy(all, 60.0).total_J;
  const double parts = total_energy(all.subspan(0, 7), 60.0).total_J + total_energy(all.subspan(7), 60.0).total_J;
  CHECK(whole == Approx(parts).epsilon(1e-14));
}

TEST_CASE("power parameter validation") {
  PowerParams p;
  CHECK_NOTHROW(p.validate());
  p.COP_h = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
