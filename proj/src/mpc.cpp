#include "hvac/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <type_traits>

#include <json.hpp>

namespace hvac {

double VentilationParams::required_outdoor_air(double n_p) const {
  return std::max(m_oa_p * n_p + m_oa_A * A, m_oa_bp);
}

double min_flow_bound(double n_p, double r_oa, const VentilationParams& v) {
  if (!(r_oa > 0.0)) return std::numeric_limits<double>::infinity();
  return std::max((v.m_oa_p * n_p + v.m_oa_A * v.A) / r_oa, v.m_oa_bp / r_oa);
}

std::string to_string(MpcVariant v) { return v == MpcVariant::SL ? "sl-mpc" : "s-mpc"; }

void MpcParams::validate() const {
  if (!(dt > 0)) throw std::invalid_argument("mpc: dt must be positive");
  if (N < 1) throw std::invalid_argument("mpc: horizon N must be at least 1");
  if (!(R > 0 && C > 0 && A_e > 0 && V > 0)) throw std::invalid_argument("mpc: model parameters must be positive");
  if (!(m_sa_rate > 0 && r_oa_rate > 0 && T_ca_rate > 0 && T_sa_rate > 0)) {
    throw std::invalid_argument("mpc: rate limits must be positive");
  }
  if (!(m_sa_low < m_sa_high && r_oa_low < r_oa_high && T_ca_low < T_sa_high && m_w_low < m_w_high)) {
    throw std::invalid_argument("mpc: actuator boxes must have low < high");
  }
  if (!(comfort_margin_T >= 0 && comfort_margin_W >= 0)) {
    throw std::invalid_argument("mpc: comfort margins must be non-negative");
  }
  if (!(recovery_penalty_T > 0 && recovery_penalty_W > 0 && recovery_smoothing_T > 0 && recovery_smoothing_W > 0)) {
    throw std::invalid_argument("mpc: recovery penalties and smoothing must be positive");
  }
  envelope.validate();
  psychro.validate();
  power.validate();
}

namespace {

constexpr double kTs = MpcLayout::kTScale;
constexpr double kWs = MpcLayout::kWScale;
constexpr double kObjScale = 1.0 / kJoulesPerKWh;  // objective carried in kWh

struct StageData {
  double T_oa = 0.0;
  double W_oa = 0.0;
  double h_oa = 0.0;
  double q_ext = 0.0;
  double omega = 0.0;
  double vent_min = 0.0;
};

struct Context {
  MpcParams p;
  std::vector<StageData> stage;
};

template <typename T>
using Scalar = std::remove_cvref_t<T>;

// ---- model rows (scaled units) ------------------------------------------

template <typename S>
S thermal_row(const Context& c, const StageData& d, const S& Tz0s, const S& m, const S& Tsas, const S& Tz1s) {
  const MpcParams& p = c.p;
  const S Tz0 = kTs * Tz0s;
  const S q = (d.T_oa - Tz0) * (1.0 / p.R) + p.psychro.C_pa * (m * (kTs * Tsas - Tz0)) + d.q_ext;
  return Tz1s - Tz0s - q * (p.dt / (p.C * kTs));
}

template <typename S>
S humidity_row(const Context& c, const StageData& d, const S& Tz0s, const S& Wz0s, const S& m, const S& Wcas,
               const S& Wz1s) {
  const MpcParams& p = c.p;
  const S Wz0 = Wz0s / kWs;
  const S Wca = Wcas / kWs;
  const double k = p.dt * p.psychro.R_g / (p.V * p.psychro.P_da);
  const S gain = (kTs * Tz0s + psychro::kKelvinOffset) * k;
  const S flux = d.omega + m * (Wca - Wz0) / (1.0 + Wca);
  return Wz1s - Wz0s - kWs * (gain * flux);
}

template <typename S>
S mixed_T(const StageData& d, const S& r, const S& Tz0s) {
  return r * d.T_oa + (1.0 - r) * (kTs * Tz0s);
}

template <typename S>
S mixed_W(const StageData& d, const S& r, const S& Wz0s) {
  return r * d.W_oa + (1.0 - r) * (Wz0s / kWs);
}

template <typename S>
S coil_T_row(const Context& c, const StageData& d, const S& r, const S& Tz0s, const S& Wz0s, const S& m,
             const S& mw, const S& Tcas) {
  const S Tma = mixed_T(d, r, Tz0s);
  const S Wma = mixed_W(d, r, Wz0s);
  return Tcas - compact_T_ca(c.p.coil, Tma, Wma, m, mw) / kTs;
}

template <typename S>
S coil_W_row(const Context& c, const StageData& d, const S& r, const S& Tz0s, const S& Wz0s, const S& m,
             const S& mw, const S& Wcas) {
  const S Tma = mixed_T(d, r, Tz0s);
  const S Wma = mixed_W(d, r, Wz0s);
  return Wcas - kWs * compact_W_ca(c.p.coil, Tma, Wma, m, mw);
}

template <typename S>
S sl_stage_cost(const Context& c, const StageData& d, const S& r, const S& m, const S& Tcas, const S& Wcas,
                const S& Tsas, const S& Tz0s, const S& Wz0s) {
  const MpcParams& p = c.p;
  const S h_z = psychro::moist_air_enthalpy(S(kTs * Tz0s), S(Wz0s / kWs), p.psychro);
  const S h_ma = r * d.h_oa + (1.0 - r) * h_z;
  const S h_ca = psychro::moist_air_enthalpy(S(kTs * Tcas), S(Wcas / kWs), p.psychro);
  const S P = power::fan_expr(m, p.power) + power::latent_cooling_expr(m, h_ma, h_ca, p.power) +
              power::reheat_expr(m, S(kTs * Tsas), S(kTs * Tcas), p.psychro.C_pa, p.power);
  return P * (p.dt * kObjScale);
}

template <typename S>
S s_stage_cost(const Context& c, const StageData& d, const S& r, const S& m, const S& Tcas, const S& Tsas,
               const S& Tz0s) {
  const MpcParams& p = c.p;
  const S Tma = mixed_T(d, r, Tz0s);
  const S P = power::fan_expr(m, p.power) +
              power::sensible_cooling_expr(m, Tma, S(kTs * Tcas), p.psychro.C_pa, p.power) +
              power::reheat_expr(m, S(kTs * Tsas), S(kTs * Tcas), p.psychro.C_pa, p.power);
  return P * (p.dt * kObjScale);
}

std::shared_ptr<Context> make_context(const MpcForecast& f, const MpcParams& p) {
  auto ctx = std::make_shared<Context>();
  ctx->p = p;
  ctx->stage.resize(static_cast<std::size_t>(p.N));
  for (int k = 0; k < p.N; ++k) {
    const ExogenousInput& w = f.w[k];
    StageData& d = ctx->stage[k];
    d.T_oa = w.T_oa;
    d.W_oa = w.W_oa;
    d.h_oa = psychro::moist_air_enthalpy<double>(w.T_oa, w.W_oa, p.psychro);
    d.q_ext = p.A_e * w.eta_sol + w.q_ocp + w.q_other;
    d.omega = w.omega_ocp + w.omega_other;
    d.vent_min = p.vent.required_outdoor_air(w.n_p);
  }
  return ctx;
}

struct Box {
  double lo, hi;
};

// Physical state ranges used when the comfort band is soft.
constexpr Box kStateT{0.0, 50.0};
constexpr Box kStateW{0.0, 0.03};

// 0.5 (d + sqrt(d^2 + eps^2)): a smooth upper bound of max(d, 0).
template <typename S>
S smooth_plus(const S& d, double eps) {
  using std::sqrt;
  return 0.5 * (d + sqrt(d * d + eps * eps));
}

Box anchored(double lo, double hi, const std::optional<double>& prev, double step) {
  if (!prev) return {lo, hi};
  Box b{std::max(lo, *prev - step), std::min(hi, *prev + step)};
  if (b.lo > b.hi) {
    // The previous command lies outside the box; stay as close to it as the box allows.
    const double v = std::clamp(*prev, lo, hi);
    b = {v, v};
  }
  return b;
}

MpcProblem build(MpcVariant variant, const ZoneState& x0, const MpcForecast& f,
                 const std::optional<ControlCommand>& prev, const MpcParams& p, bool recovery) {
  p.validate();
  if (static_cast<int>(f.w.size()) != p.N) {
    throw std::invalid_argument("mpc: forecast has " + std::to_string(f.w.size()) + " steps, horizon is " +
                                std::to_string(p.N));
  }
  const bool SL = variant == MpcVariant::SL;
  auto ctx = make_context(f, p);
  const Context* c = ctx.get();

  MpcProblem P;
  P.layout = {variant, p.N};
  P.t0 = f.t0;
  P.context = ctx;
  P.rows.assign(static_cast<std::size_t>(p.N), {});
  for (auto& r : P.rows) r.fill(-1);
  const MpcLayout& L = P.layout;
  nlp::Problem& nlp = P.nlp;

  const auto init = default_initial_plan(variant, x0, f, p);
  const double Tz0s = x0.T_z / kTs;
  const double Wz0s = x0.W_z * kWs;

  for (int k = 0; k < p.N; ++k) {
    const StagePlan& g0 = init[k];
    std::optional<double> pm, pr, pc, ps;
    if (k == 0 && prev) {
      pm = prev->m_sa;
      pr = prev->r_oa;
      pc = prev->T_ca;
      ps = prev->T_sa;
    }
    const Box bm = anchored(p.m_sa_low, p.m_sa_high, pm, p.m_sa_rate * p.dt);
    const Box br = anchored(p.r_oa_low, p.r_oa_high, pr, p.r_oa_rate * p.dt);
    const Box bc = anchored(p.T_ca_low, p.T_sa_high, pc, p.T_ca_rate * p.dt);
    const Box bs = anchored(p.T_ca_low, p.T_sa_high, ps, p.T_sa_rate * p.dt);
    nlp.add_variable(bm.lo, bm.hi, g0.u.m_sa, k);
    nlp.add_variable(br.lo, br.hi, g0.u.r_oa, k);
    nlp.add_variable(bc.lo / kTs, bc.hi / kTs, g0.u.T_ca / kTs, k);
    nlp.add_variable(bs.lo / kTs, bs.hi / kTs, g0.u.T_sa / kTs, k);
    if (SL) {
      nlp.add_variable(p.m_w_low, p.m_w_high, g0.m_w, k);
      nlp.add_variable(0.0, 0.05 * kWs, g0.W_ca * kWs, k);
    }
    const ComfortBounds cb = p.envelope.at(f.t0 + (k + 1) * p.dt);
    const double T_lo = cb.T_low + p.comfort_margin_T, T_hi = cb.T_high - p.comfort_margin_T;
    const double W_lo = cb.W_low + p.comfort_margin_W, W_hi = cb.W_high - p.comfort_margin_W;
    if (recovery) {
      const int iz = nlp.add_variable(kStateT.lo / kTs, kStateT.hi / kTs, g0.T_z / kTs, k);
      const double rho = p.recovery_penalty_T, eps = p.recovery_smoothing_T;
      nlp.add_objective<1>({iz}, [=](const auto* x) {
        const auto T = kTs * x[0];
        return rho * (smooth_plus(T - T_hi, eps) + smooth_plus(T_lo - T, eps));
      });
      if (SL) {
        const int iw = nlp.add_variable(kStateW.lo * kWs, kStateW.hi * kWs, g0.W_z * kWs, k);
        const double rw = p.recovery_penalty_W, ew = p.recovery_smoothing_W;
        nlp.add_objective<1>({iw}, [=](const auto* x) {
          const auto W = x[0] / kWs;
          return rw * (smooth_plus(W - W_hi, ew) + smooth_plus(W_lo - W, ew));
        });
      }
      continue;
    }
    nlp.add_variable(T_lo / kTs, T_hi / kTs, g0.T_z / kTs, k);
    if (SL) nlp.add_variable(W_lo * kWs, W_hi * kWs, g0.W_z * kWs, k);
  }

  for (int k = 0; k < p.N; ++k) {
    const StageData* d = &c->stage[k];
    auto& rows = P.rows[k];
    const int im = L.m_sa(k), ir = L.r_oa(k), ic = L.T_ca(k), is = L.T_sa(k), iz = L.T_z(k);
    const bool first = k == 0;
    const int pz = first ? -1 : L.T_z(k - 1);

    // Thermal dynamics.
    if (first) {
      rows[kRowThermal] = nlp.add_constraint<3>({im, is, iz}, 0.0, 0.0, [c, d, Tz0s](const auto* x) {
        using S = Scalar<decltype(x[0])>;
        return thermal_row(*c, *d, S(Tz0s), x[0], x[1], x[2]);
      }, k, "thermal");
    } else {
      rows[kRowThermal] = nlp.add_constraint<4>({pz, im, is, iz}, 0.0, 0.0, [c, d](const auto* x) {
        return thermal_row(*c, *d, x[0], x[1], x[2], x[3]);
      }, k, "thermal");
    }

    if (SL) {
      const int iw = L.m_w(k), iW = L.W_ca(k), iWz = L.W_z(k);
      const int pW = first ? -1 : L.W_z(k - 1);
      if (first) {
        rows[kRowHumidity] = nlp.add_constraint<3>({im, iW, iWz}, 0.0, 0.0, [c, d, Tz0s, Wz0s](const auto* x) {
          using S = Scalar<decltype(x[0])>;
          return humidity_row(*c, *d, S(Tz0s), S(Wz0s), x[0], x[1], x[2]);
        }, k, "humidity");
        rows[kRowCoilT] = nlp.add_constraint<4>({ir, im, iw, ic}, 0.0, 0.0, [c, d, Tz0s, Wz0s](const auto* x) {
          using S = Scalar<decltype(x[0])>;
          return coil_T_row(*c, *d, x[0], S(Tz0s), S(Wz0s), x[1], x[2], x[3]);
        }, k, "coil_T");
        rows[kRowCoilW] = nlp.add_constraint<4>({ir, im, iw, iW}, 0.0, 0.0, [c, d, Tz0s, Wz0s](const auto* x) {
          using S = Scalar<decltype(x[0])>;
          return coil_W_row(*c, *d, x[0], S(Tz0s), S(Wz0s), x[1], x[2], x[3]);
        }, k, "coil_W");
        rows[kRowWcaBelowWma] = nlp.add_constraint<2>({ir, iW}, 0.0, nlp::kInf, [d, Wz0s](const auto* x) {
          using S = Scalar<decltype(x[0])>;
          return kWs * mixed_W(*d, x[0], S(Wz0s)) - x[1];
        }, k, "W_ca<=W_ma");
      } else {
        rows[kRowHumidity] = nlp.add_constraint<5>({pz, pW, im, iW, iWz}, 0.0, 0.0, [c, d](const auto* x) {
          return humidity_row(*c, *d, x[0], x[1], x[2], x[3], x[4]);
        }, k, "humidity");
        rows[kRowCoilT] = nlp.add_constraint<6>({ir, pz, pW, im, iw, ic}, 0.0, 0.0, [c, d](const auto* x) {
          return coil_T_row(*c, *d, x[0], x[1], x[2], x[3], x[4], x[5]);
        }, k, "coil_T");
        rows[kRowCoilW] = nlp.add_constraint<6>({ir, pz, pW, im, iw, iW}, 0.0, 0.0, [c, d](const auto* x) {
          return coil_W_row(*c, *d, x[0], x[1], x[2], x[3], x[4], x[5]);
        }, k, "coil_W");
        rows[kRowWcaBelowWma] = nlp.add_constraint<3>({ir, pW, iW}, 0.0, nlp::kInf, [d](const auto* x) {
          return kWs * mixed_W(*d, x[0], x[1]) - x[2];
        }, k, "W_ca<=W_ma");
      }
    }

    // T_ca <= T_ma and T_sa >= T_ca.
    if (first) {
      rows[kRowTcaBelowTma] = nlp.add_constraint<2>({ir, ic}, 0.0, nlp::kInf, [d, Tz0s](const auto* x) {
        using S = Scalar<decltype(x[0])>;
        return mixed_T(*d, x[0], S(Tz0s)) / kTs - x[1];
      }, k, "T_ca<=T_ma");
    } else {
      rows[kRowTcaBelowTma] = nlp.add_constraint<3>({ir, pz, ic}, 0.0, nlp::kInf, [d](const auto* x) {
        return mixed_T(*d, x[0], x[1]) / kTs - x[2];
      }, k, "T_ca<=T_ma");
    }
    rows[kRowTsaAboveTca] = nlp.add_constraint<2>({ic, is}, 0.0, nlp::kInf, [](const auto* x) {
      return x[1] - x[0];
    }, k, "T_sa>=T_ca");

    // Ventilation in product form.
    rows[kRowVentilation] = nlp.add_constraint<2>({im, ir}, d->vent_min, nlp::kInf, [](const auto* x) {
      return x[0] * x[1];
    }, k, "ventilation");

    // Rates between consecutive stages; stage zero is anchored through its bounds.
    if (!first) {
      auto diff = [](const auto* x) { return x[1] - x[0]; };
      const double dm = p.m_sa_rate * p.dt, dr = p.r_oa_rate * p.dt;
      const double dc = p.T_ca_rate * p.dt / kTs, ds = p.T_sa_rate * p.dt / kTs;
      rows[kRowRateMsa] = nlp.add_constraint<2>({L.m_sa(k - 1), im}, -dm, dm, diff, k, "rate_m_sa");
      rows[kRowRateRoa] = nlp.add_constraint<2>({L.r_oa(k - 1), ir}, -dr, dr, diff, k, "rate_r_oa");
      rows[kRowRateTca] = nlp.add_constraint<2>({L.T_ca(k - 1), ic}, -dc, dc, diff, k, "rate_T_ca");
      rows[kRowRateTsa] = nlp.add_constraint<2>({L.T_sa(k - 1), is}, -ds, ds, diff, k, "rate_T_sa");
    }

    // Stage cost.
    if (SL) {
      const int iW = L.W_ca(k);
      if (first) {
        nlp.add_objective<5>({ir, im, ic, iW, is}, [c, d, Tz0s, Wz0s](const auto* x) {
          using S = Scalar<decltype(x[0])>;
          return sl_stage_cost(*c, *d, x[0], x[1], x[2], x[3], x[4], S(Tz0s), S(Wz0s));
        });
      } else {
        nlp.add_objective<7>({ir, im, ic, iW, is, pz, L.W_z(k - 1)}, [c, d](const auto* x) {
          return sl_stage_cost(*c, *d, x[0], x[1], x[2], x[3], x[4], x[5], x[6]);
        });
      }
    } else {
      if (first) {
        nlp.add_objective<4>({ir, im, ic, is}, [c, d, Tz0s](const auto* x) {
          using S = Scalar<decltype(x[0])>;
          return s_stage_cost(*c, *d, x[0], x[1], x[2], x[3], S(Tz0s));
        });
      } else {
        nlp.add_objective<5>({ir, im, ic, is, pz}, [c, d](const auto* x) {
          return s_stage_cost(*c, *d, x[0], x[1], x[2], x[3], x[4]);
        });
      }
    }
  }
  nlp.finalize();
  return P;
}

}  // namespace

MpcProblem build_slmpc_problem(const ZoneState& x0, const MpcForecast& f,
                               const std::optional<ControlCommand>& prev_cmd, const MpcParams& p, bool recovery) {
  return build(MpcVariant::SL, x0, f, prev_cmd, p, recovery);
}

MpcProblem build_smpc_problem(const ZoneState& x0, const MpcForecast& f,
                              const std::optional<ControlCommand>& prev_cmd, const MpcParams& p, bool recovery) {
  return build(MpcVariant::S, x0, f, prev_cmd, p, recovery);
}

MpcProblem build_mpc_problem(MpcVariant v, const ZoneState& x0, const MpcForecast& f,
                             const std::optional<ControlCommand>& prev_cmd, const MpcParams& p, bool recovery) {
  return build(v, x0, f, prev_cmd, p, recovery);
}

std::vector<StagePlan> decode_plan(const MpcLayout& L, const std::vector<double>& x) {
  if (static_cast<int>(x.size()) != L.n()) throw std::invalid_argument("decode_plan: size mismatch");
  std::vector<StagePlan> plan(static_cast<std::size_t>(L.N));
  for (int k = 0; k < L.N; ++k) {
    StagePlan& s = plan[k];
    s.u = {x[L.m_sa(k)], x[L.r_oa(k)], x[L.T_ca(k)] * kTs, x[L.T_sa(k)] * kTs};
    s.T_z = x[L.T_z(k)] * kTs;
    if (L.variant == MpcVariant::SL) {
      s.m_w = x[L.m_w(k)];
      s.W_ca = x[L.W_ca(k)] / kWs;
      s.W_z = x[L.W_z(k)] / kWs;
    }
  }
  return plan;
}

std::vector<double> encode_plan(const MpcLayout& L, const std::vector<StagePlan>& plan) {
  if (static_cast<int>(plan.size()) != L.N) throw std::invalid_argument("encode_plan: size mismatch");
  std::vector<double> x(static_cast<std::size_t>(L.n()));
  for (int k = 0; k < L.N; ++k) {
    const StagePlan& s = plan[k];
    x[L.m_sa(k)] = s.u.m_sa;
    x[L.r_oa(k)] = s.u.r_oa;
    x[L.T_ca(k)] = s.u.T_ca / kTs;
    x[L.T_sa(k)] = s.u.T_sa / kTs;
    x[L.T_z(k)] = s.T_z / kTs;
    if (L.variant == MpcVariant::SL) {
      x[L.m_w(k)] = s.m_w;
      x[L.W_ca(k)] = s.W_ca * kWs;
      x[L.W_z(k)] = s.W_z * kWs;
    }
  }
  return x;
}

std::vector<StagePlan> default_initial_plan(MpcVariant v, const ZoneState& x0, const MpcForecast& f,
                                            const MpcParams& p) {
  if (static_cast<int>(f.w.size()) < p.N) throw std::invalid_argument("default_initial_plan: forecast too short");
  std::vector<StagePlan> plan(static_cast<std::size_t>(p.N));
  double Tz = x0.T_z, Wz = x0.W_z;
  const double T_mid = 0.5 * (p.T_ca_low + p.T_sa_high);
  for (int k = 0; k < p.N; ++k) {
    const ExogenousInput& w = f.w[k];
    StagePlan& s = plan[k];
    s.u = {0.5 * (p.m_sa_low + p.m_sa_high), 0.5 * (p.r_oa_low + p.r_oa_high), T_mid, T_mid};
    const double Tma = s.u.r_oa * w.T_oa + (1.0 - s.u.r_oa) * Tz;
    const double Wma = s.u.r_oa * w.W_oa + (1.0 - s.u.r_oa) * Wz;
    s.m_w = v == MpcVariant::SL ? 0.5 : 0.0;
    s.W_ca = v == MpcVariant::SL ? compact_W_ca(p.coil, Tma, Wma, s.u.m_sa, s.m_w) : 0.0;
    const double q = (w.T_oa - Tz) / p.R + s.u.m_sa * p.psychro.C_pa * (s.u.T_sa - Tz) + p.A_e * w.eta_sol +
                     w.q_ocp + w.q_other;
    const double gain = p.dt * p.psychro.R_g * (Tz + psychro::kKelvinOffset) / (p.V * p.psychro.P_da);
    const double Wn = Wz + gain * (w.omega_ocp + w.omega_other + s.u.m_sa * (s.W_ca - Wz) / (1.0 + s.W_ca));
    Tz += p.dt / p.C * q;
    Wz = v == MpcVariant::SL ? Wn : Wz;
    s.T_z = Tz;
    s.W_z = v == MpcVariant::SL ? Wz : 0.0;
  }
  return plan;
}

double plan_energy_J(MpcVariant v, const ZoneState& x0, const MpcForecast& f, const std::vector<StagePlan>& plan,
                     const MpcParams& p) {
  double E = 0.0;
  double Tz = x0.T_z, Wz = x0.W_z;
  for (int k = 0; k < static_cast<int>(plan.size()); ++k) {
    const ExogenousInput& w = f.w[k];
    const StagePlan& s = plan[k];
    const double r = s.u.r_oa, m = s.u.m_sa;
    double P = power::fan_power(m, p.power);
    if (v == MpcVariant::SL) {
      const double h_ma = r * psychro::moist_air_enthalpy<double>(w.T_oa, w.W_oa, p.psychro) +
                          (1.0 - r) * psychro::moist_air_enthalpy<double>(Tz, Wz, p.psychro);
      const double h_ca = psychro::moist_air_enthalpy<double>(s.u.T_ca, s.W_ca, p.psychro);
      P += m * (h_ma - h_ca) / (p.power.eta_cc * p.power.COP_c);
    } else {
      const double Tma = r * w.T_oa + (1.0 - r) * Tz;
      P += m * p.psychro.C_pa * (Tma - s.u.T_ca) / (p.power.eta_cc * p.power.COP_c);
    }
    P += m * p.psychro.C_pa * (s.u.T_sa - s.u.T_ca) / (p.power.eta_reheat * p.power.COP_h);
    E += P * p.dt;
    Tz = s.T_z;
    Wz = s.W_z;
  }
  return E;
}

Solution solve_nlp(MpcProblem& problem, const nlp::IpmOptions& opt, const nlp::IpmStart* warm) {
  const nlp::IpmResult r = nlp::solve_ipm(problem.nlp, opt, warm, 1.0);
  Solution s;
  s.status = r.status;
  s.x = r.x;
  s.objective_J = r.objective * kJoulesPerKWh;
  s.dual_inf = r.dual_inf;
  s.primal_inf = r.primal_inf;
  s.compl_inf = r.compl_inf;
  s.kkt_error = r.kkt_error;
  s.iterations = r.iterations;
  s.wall_time = r.wall_time;
  s.duals = {r.x, r.y, r.zL, r.zU};
  return s;
}

nlp::IpmStart shift_solution(const MpcProblem& old_problem, const nlp::IpmStart& s, const MpcProblem& new_problem) {
  const MpcLayout& L = new_problem.layout;
  const int ps = L.per_stage();
  const int N = L.N;
  if (old_problem.layout.per_stage() != ps || old_problem.layout.N != N) {
    throw std::invalid_argument("shift_solution: layouts differ");
  }
  nlp::IpmStart out;
  const int n = L.n();
  out.x.assign(static_cast<std::size_t>(n), 0.0);
  out.zL.assign(static_cast<std::size_t>(n), 0.0);
  out.zU.assign(static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < N; ++k) {
    const int src = std::min(k + 1, N - 1);
    for (int j = 0; j < ps; ++j) {
      out.x[k * ps + j] = s.x[src * ps + j];
      if (!s.zL.empty()) out.zL[k * ps + j] = s.zL[src * ps + j];
      if (!s.zU.empty()) out.zU[k * ps + j] = s.zU[src * ps + j];
    }
  }
  out.y.assign(static_cast<std::size_t>(new_problem.nlp.m()), 0.0);
  if (!s.y.empty()) {
    for (int k = 0; k < N; ++k) {
      const int src = std::min(k + 1, N - 1);
      for (int kind = 0; kind < kRowKinds; ++kind) {
        const int dst_row = new_problem.rows[k][kind];
        const int src_row = old_problem.rows[src][kind];
        if (dst_row >= 0 && src_row >= 0) out.y[dst_row] = s.y[src_row];
      }
    }
  }
  return out;
}

std::string MpcDiagnostics::to_json_line(bool with_wall_time) const {
  nlohmann::json j;
  j["step"] = step;
  j["t"] = t;
  j["controller"] = to_string(variant);
  j["status"] = status;
  j["iterations"] = iterations;
  j["objective_J"] = objective_J;
  j["dual_inf"] = dual_inf;
  j["primal_inf"] = primal_inf;
  j["compl_inf"] = compl_inf;
  j["kkt_error"] = kkt_error;
  if (with_wall_time) j["wall_time_s"] = wall_time;
  j["warm_start"] = warm_start;
  j["retried_cold"] = retried_cold;
  j["recovery"] = recovery;
  j["fallback"] = fallback;
  return j.dump();
}

ControlCommand mpc_safe_default_command(const MpcParams& p) {
  const double T_mid = 0.5 * (p.T_ca_low + p.T_sa_high);
  return {0.5 * (p.m_sa_low + p.m_sa_high), 0.5 * (p.r_oa_low + p.r_oa_high), T_mid, T_mid};
}

std::pair<ControlCommand, MpcDiagnostics> mpc_step(MpcController& c, const ZoneState& measurement,
                                                   const MpcForecast& f) {
  MpcDiagnostics dg;
  dg.step = c.step++;
  dg.t = f.t0;
  dg.variant = c.variant;

  MpcProblem prob = build_mpc_problem(c.variant, measurement, f, c.prev_cmd, c.params);
  std::optional<nlp::IpmStart> start;
  if (c.last_problem && c.last_start) start = shift_solution(*c.last_problem, *c.last_start, prob);

  Solution sol;
  double wall = 0.0;
  int iters = 0;
  auto attempt = [&](MpcProblem& pr, const nlp::IpmStart* ws) {
    sol = solve_nlp(pr, c.params.solver, ws);
    wall += sol.wall_time;
    iters += sol.iterations;
  };
  if (start) {
    dg.warm_start = true;
    attempt(prob, &*start);
  }
  if (!start || !sol.ok()) {
    dg.retried_cold = start.has_value();
    attempt(prob, nullptr);
  }
  if (!sol.ok()) {
    MpcProblem relaxed = build_mpc_problem(c.variant, measurement, f, c.prev_cmd, c.params, true);
    attempt(relaxed, nullptr);
    if (sol.ok()) {
      dg.recovery = true;
      prob = std::move(relaxed);
    }
  }
  sol.wall_time = wall;
  sol.iterations = iters;
  dg.status = nlp::to_string(sol.status);
  dg.iterations = sol.iterations;
  dg.objective_J = sol.objective_J;
  dg.dual_inf = sol.dual_inf;
  dg.primal_inf = sol.primal_inf;
  dg.compl_inf = sol.compl_inf;
  dg.kkt_error = sol.kkt_error;
  dg.wall_time = sol.wall_time;

  ControlCommand cmd;
  if (sol.ok()) {
    auto plan = decode_plan(prob.layout, sol.x);
    cmd = plan.front().u;
    c.last_plan = std::move(plan);
    c.last_start = sol.duals;
    c.last_problem = std::move(prob);
  } else {
    dg.fallback = true;
    cmd = c.prev_cmd ? *c.prev_cmd : mpc_safe_default_command(c.params);
    if (c.last_problem && start) {
      // Keep the shifted guess so that the next step shifts once more.
      c.last_start = *start;
      c.last_problem = std::move(prob);
    }
  }
  c.prev_cmd = cmd;
  return {cmd, dg};
}

RcReduction reduce_2r2c_to_1r1c(const PlantParams& pp) {
  RcReduction out;
  out.R = pp.R_z + pp.R_w;
  if (pp.C_w <= 0.0) {
    out.C = pp.C_z;
    out.rise_time_2r2c = out.R * out.C * std::log(9.0);
    return out;
  }
  const double a11 = -1.0 / (pp.C_z * pp.R_w);
  const double a12 = 1.0 / (pp.C_z * pp.R_w);
  const double a21 = 1.0 / (pp.C_w * pp.R_w);
  const double a22 = -(1.0 / pp.R_z + 1.0 / pp.R_w) / pp.C_w;
  const double tr = a11 + a22;
  const double det = a11 * a22 - a12 * a21;
  const double disc = std::sqrt(std::max(tr * tr / 4.0 - det, 0.0));
  const double l1 = tr / 2.0 + disc;  // slow pole
  const double l2 = tr / 2.0 - disc;  // fast pole
  // Unit T_oa step from rest: T_z(t) = 1 - [exp(A t) 1]_z via Sylvester's formula.
  auto y = [&](double t) {
    const double e1 = std::exp(l1 * t), e2 = std::exp(l2 * t);
    return 1.0 - (e1 * (a11 - l2 + a12) - e2 * (a11 - l1 + a12)) / (l1 - l2);
  };
  auto crossing = [&](double level) {
    double lo = 0.0, hi = 1.0;
    while (y(hi) < level) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-9 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (y(mid) < level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  out.rise_time_2r2c = crossing(0.9) - crossing(0.1);
  out.C = out.rise_time_2r2c / (out.R * std::log(9.0));
  return out;
}

}  // namespace hvac
