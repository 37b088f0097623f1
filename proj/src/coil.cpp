#include "hvac/coil.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <Eigen/Dense>
#include <json.hpp>

namespace hvac {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Reference coil
// ---------------------------------------------------------------------------

CoilOutput reference_coil(const CoilInput& inp, double T_wi, const ReferenceCoilParams& p) {
  const double T = inp.T_ma;
  const double W = inp.W_ma;
  if (inp.m_w <= 0.0 || inp.m_sa <= 0.0 || T <= T_wi) {
    return {T, W};
  }
  const double UA = p.UA_nom * std::pow(inp.m_sa / p.m_sa_nom, p.flow_exponent) *
                    std::pow(inp.m_w / p.m_w_nom, p.flow_exponent);
  const double C_a = inp.m_sa * (p.psychro.C_pa + p.psychro.C_pw * W);
  const double C_w = inp.m_w * p.C_water;
  const double C_min = std::min(C_a, C_w);
  const double C_max = std::max(C_a, C_w);
  const double Cr = C_min / C_max;
  const double ntu = UA / C_min;

  double eff;
  if (std::abs(1.0 - Cr) < 1e-9) {
    eff = ntu / (1.0 + ntu);
  } else {
    const double x = std::exp(-ntu * (1.0 - Cr));
    eff = (1.0 - x) / (1.0 - Cr * x);
  }
  const double T_ca = T - eff * C_min * (T - T_wi) / C_a;

  // Bypass factor of the whole coil; the apparatus dew point is the surface
  // state that the leaving air lies on a straight line towards.
  const double BF = std::exp(-UA / C_a);
  const double T_adp = std::max((T_ca - BF * T) / std::max(1.0 - BF, 1e-12), T_wi);
  const double W_adp = psychro::saturation_humidity_ratio(T_adp, p.psychro.P_atm);
  double W_ca = W;
  if (W_adp < W) {
    W_ca = BF * W + (1.0 - BF) * W_adp;
  }
  W_ca = std::min(W_ca, psychro::saturation_humidity_ratio(T_ca, p.psychro.P_atm));
  return {T_ca, W_ca};
}

double calibrate_reference_ua(double T_target, const ReferenceCoilParams& base) {
  CoilInput anchor;
  anchor.T_ma = 25.0;
  anchor.W_ma = psychro::humidity_ratio_from_rh(25.0, 0.5, base.psychro.P_atm);
  anchor.m_sa = 2.3;
  anchor.m_w = 1.1;
  ReferenceCoilParams p = base;
  double lo = 10.0, hi = 1.0e6;
  for (int it = 0; it < 200; ++it) {
    p.UA_nom = std::sqrt(lo * hi);
    if (reference_coil(anchor, kChilledWaterInlet, p).T_ca > T_target) {
      lo = p.UA_nom;
    } else {
      hi = p.UA_nom;
    }
    if (hi - lo < 1e-12 * hi) break;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

Density parse_density(const std::string& name) {
  if (name == "tiny") return Density::Tiny;
  if (name == "default") return Density::Default;
  if (name == "paper") return Density::Paper;
  throw std::invalid_argument("unknown density '" + name + "' (expected tiny, default or paper)");
}

std::string to_string(Density d) {
  switch (d) {
    case Density::Tiny: return "tiny";
    case Density::Default: return "default";
    case Density::Paper: return "paper";
  }
  return "default";
}

SweepRanges sweep_for_density(Density d) {
  SweepRanges r;
  int n = 8;
  if (d == Density::Tiny) n = 6;
  if (d == Density::Paper) n = 16;
  r.m_sa = GridAxis{0.1705, (4.6 - 0.1705) / (n - 1), n};
  r.m_w = GridAxis{0.0, 2.21 / (n - 1), n};
  return r;
}

namespace {

CoilDataset sweep(const GridAxis& T, const GridAxis& RH, const GridAxis& ms, const GridAxis& mw,
                  double T_wi, const ReferenceCoilParams& p) {
  CoilDataset out;
  if (T.count <= 0 || RH.count <= 0 || ms.count <= 0 || mw.count <= 0) return out;
  out.reserve(static_cast<std::size_t>(T.count) * RH.count * ms.count * mw.count);
  for (int i = 0; i < T.count; ++i) {
    const double t = T.value(i);
    for (int j = 0; j < RH.count; ++j) {
      const double w = psychro::humidity_ratio_from_rh(t, std::min(RH.value(j), 1.0), p.psychro.P_atm);
      for (int a = 0; a < ms.count; ++a) {
        for (int b = 0; b < mw.count; ++b) {
          CoilSample s;
          s.in = {t, w, ms.value(a), mw.value(b)};
          s.out = reference_coil(s.in, T_wi, p);
          out.push_back(s);
        }
      }
    }
  }
  return out;
}

GridAxis half_shift(const GridAxis& a) {
  return GridAxis{a.lo + 0.5 * a.step, a.step, std::max(a.count - 1, 0)};
}

}  // namespace

CoilDataset generate_training_grid(const SweepRanges& r, const ReferenceCoilParams& p) {
  return sweep(r.T, r.RH, r.m_sa, r.m_w, r.T_wi, p);
}

CoilDataset generate_validation_grid(const SweepRanges& r, const ReferenceCoilParams& p) {
  return sweep(half_shift(r.T), half_shift(r.RH), half_shift(r.m_sa), half_shift(r.m_w), r.T_wi, p);
}

void write_dataset_csv(std::ostream& os, const CoilDataset& d) {
  os << "T_ma,W_ma,m_sa,m_w,T_ca,W_ca\n";
  os << std::setprecision(17);
  for (const auto& s : d) {
    os << s.in.T_ma << ',' << s.in.W_ma << ',' << s.in.m_sa << ',' << s.in.m_w << ','
       << s.out.T_ca << ',' << s.out.W_ca << '\n';
  }
}

CoilDataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("coil dataset: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "T_ma,W_ma,m_sa,m_w,T_ca,W_ca") {
    throw std::runtime_error("coil dataset: unexpected header '" + line + "'");
  }
  CoilDataset out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::array<double, 6> v{};
    std::stringstream ss(line);
    std::string cell;
    int k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= 6) break;
      try {
        v[k] = std::stod(cell);
      } catch (const std::exception&) {
        throw std::runtime_error("coil dataset line " + std::to_string(lineno) + ": bad number '" +
                                 cell + "'");
      }
      ++k;
    }
    if (k != 6) {
      throw std::runtime_error("coil dataset line " + std::to_string(lineno) + ": expected 6 columns");
    }
    out.push_back({{v[0], v[1], v[2], v[3]}, {v[4], v[5]}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binned model
// ---------------------------------------------------------------------------

const std::array<std::array<int, 2>, kBinnedTerms>& binned_exponents() {
  static const auto table = [] {
    std::array<std::array<int, 2>, kBinnedTerms> t{};
    int k = 0;
    for (int d = 0; d <= kBinnedDegree; ++d) {
      for (int i = d; i >= 0; --i) t[k++] = {i, d - i};
    }
    return t;
  }();
  return table;
}

namespace {

int axis_index(const GridAxis& a, double x, bool& clamped) {
  const double f = std::floor((x - a.lo) / a.step + 0.5 + 1e-9);
  if (f < 0.0) {
    clamped = true;
    return 0;
  }
  if (f > a.count - 1) {
    clamped = true;
    return a.count - 1;
  }
  return static_cast<int>(f);
}

double to_unit(double x, double lo, double hi) {
  return hi > lo ? (2.0 * x - (lo + hi)) / (hi - lo) : 0.0;
}

// Fills the total-degree basis on normalized flows; terms beyond the given
// degree come last in the ordering, so a reduced fit uses a prefix.
void fill_basis(double u, double v, double* out) {
  std::array<double, kBinnedDegree + 1> pu{}, pv{};
  pu[0] = pv[0] = 1.0;
  for (int i = 1; i <= kBinnedDegree; ++i) {
    pu[i] = pu[i - 1] * u;
    pv[i] = pv[i - 1] * v;
  }
  const auto& e = binned_exponents();
  for (int k = 0; k < kBinnedTerms; ++k) out[k] = pu[e[k][0]] * pv[e[k][1]];
}

}  // namespace

std::size_t locate_bin(const BinnedCoilModel& m, double T_ma, double W_ma, bool* clamped) {
  bool c = false;
  const int iT = axis_index(m.T_bins, T_ma, c);
  const double rh = psychro::rh_from_humidity_ratio(T_ma, std::max(W_ma, 0.0), m.P_atm).raw;
  const int iR = axis_index(m.RH_bins, rh, c);
  if (clamped) *clamped = c;
  return m.bin_index(iT, iR);
}

BinnedCoilModel fit_binned_model(const CoilDataset& data, const SweepRanges& r,
                                 BinnedFitSummary* summary) {
  BinnedCoilModel m;
  m.T_bins = r.T;
  m.RH_bins = r.RH;
  m.m_sa_lo = r.m_sa.lo;
  m.m_sa_hi = r.m_sa.hi();
  m.m_w_lo = r.m_w.lo;
  m.m_w_hi = r.m_w.hi();
  m.T_wi = r.T_wi;
  m.bins.assign(static_cast<std::size_t>(r.T.count) * r.RH.count, BinFit{});

  std::vector<std::vector<std::size_t>> members(m.bins.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    members[locate_bin(m, data[i].in.T_ma, data[i].in.W_ma)].push_back(i);
  }

  BinnedFitSummary sum;
  for (std::size_t b = 0; b < m.bins.size(); ++b) {
    auto& rows = members[b];
    BinFit& fit = m.bins[b];
    fit.n_samples = rows.size();
    if (rows.size() < static_cast<std::size_t>(kBinnedTerms)) {
      fit.empty = true;
      ++sum.n_empty;
      continue;
    }
    // Least squares is order-invariant in exact arithmetic; sorting the rows
    // makes it order-invariant in floating point as well.
    std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t c) {
      const auto& x = data[a].in;
      const auto& y = data[c].in;
      return std::tie(x.m_sa, x.m_w, x.T_ma, x.W_ma) < std::tie(y.m_sa, y.m_w, y.T_ma, y.W_ma);
    });
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd A(n, kBinnedTerms);
    Eigen::MatrixXd Y(n, 2);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& s = data[rows[k]];
      std::array<double, kBinnedTerms> phi{};
      fill_basis(to_unit(s.in.m_sa, m.m_sa_lo, m.m_sa_hi), to_unit(s.in.m_w, m.m_w_lo, m.m_w_hi),
                 phi.data());
      for (int j = 0; j < kBinnedTerms; ++j) A(k, j) = phi[j];
      Y(k, 0) = s.out.T_ca;
      Y(k, 1) = s.out.W_ca;
    }
    int degree = kBinnedDegree;
    for (; degree >= 0; --degree) {
      const int p = basis_size(degree);
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A.leftCols(p));
      qr.setThreshold(1e-10);
      if (qr.rank() < p) continue;
      const Eigen::MatrixXd X = qr.solve(Y);
      fit.cT.fill(0.0);
      fit.cW.fill(0.0);
      for (int j = 0; j < p; ++j) {
        fit.cT[j] = X(j, 0);
        fit.cW[j] = X(j, 1);
      }
      break;
    }
    if (degree < 0) {
      fit.empty = true;
      ++sum.n_empty;
      continue;
    }
    fit.empty = false;
    fit.degree = degree;
    if (degree < kBinnedDegree) {
      ++sum.n_reduced;
      sum.reduced_bins.push_back(b);
    }
    double sT = 0.0, sW = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
      double pT = 0.0, pW = 0.0;
      for (int j = 0; j < kBinnedTerms; ++j) {
        pT += fit.cT[j] * A(k, j);
        pW += fit.cW[j] * A(k, j);
      }
      const double eT = std::abs(pT - Y(k, 0));
      const double eW = std::abs(pW - Y(k, 1));
      sT += eT * eT;
      sW += eW * eW;
      fit.max_T = std::max(fit.max_T, eT);
      fit.max_W = std::max(fit.max_W, eW);
    }
    fit.rmse_T = std::sqrt(sT / n);
    fit.rmse_W = std::sqrt(sW / n);
  }
  if (summary) *summary = sum;
  return m;
}

CoilOutput eval_bin_polynomial(const BinnedCoilModel& m, std::size_t bin, double m_sa, double m_w) {
  const BinFit& fit = m.bins.at(bin);
  std::array<double, kBinnedTerms> phi{};
  fill_basis(to_unit(m_sa, m.m_sa_lo, m.m_sa_hi), to_unit(m_w, m.m_w_lo, m.m_w_hi), phi.data());
  CoilOutput o;
  for (int j = 0; j < kBinnedTerms; ++j) {
    o.T_ca += fit.cT[j] * phi[j];
    o.W_ca += fit.cW[j] * phi[j];
  }
  return o;
}

BinnedEval eval_binned_detail(const BinnedCoilModel& m, const CoilInput& inp) {
  BinnedEval r;
  bool clamped = false;
  std::size_t bin = locate_bin(m, inp.T_ma, inp.W_ma, &clamped);
  if (m.bins[bin].empty) {
    // Nearest non-empty bin in grid distance; ties resolved by lowest index.
    const int iT0 = static_cast<int>(bin / m.RH_bins.count);
    const int iR0 = static_cast<int>(bin % m.RH_bins.count);
    long best = -1;
    int best_d = 0;
    for (std::size_t b = 0; b < m.bins.size(); ++b) {
      if (m.bins[b].empty) continue;
      const int dT = static_cast<int>(b / m.RH_bins.count) - iT0;
      const int dR = static_cast<int>(b % m.RH_bins.count) - iR0;
      const int d = dT * dT + dR * dR;
      if (best < 0 || d < best_d) {
        best = static_cast<long>(b);
        best_d = d;
      }
    }
    if (best < 0) throw std::runtime_error("binned coil model has no fitted bins");
    bin = static_cast<std::size_t>(best);
    r.substituted_empty = true;
  }
  const double ms = std::clamp(inp.m_sa, m.m_sa_lo, m.m_sa_hi);
  const double mw = std::clamp(inp.m_w, m.m_w_lo, m.m_w_hi);
  if (ms != inp.m_sa || mw != inp.m_w) clamped = true;

  CoilOutput o = eval_bin_polynomial(m, bin, ms, mw);
  o.T_ca = std::clamp(o.T_ca, std::min(m.T_wi, inp.T_ma), inp.T_ma);
  const double W_floor = std::min(inp.W_ma, psychro::saturation_humidity_ratio(m.T_wi, m.P_atm));
  o.W_ca = std::clamp(o.W_ca, W_floor, inp.W_ma);
  r.out = o;
  r.bin = bin;
  r.clamped = clamped;
  return r;
}

CoilOutput eval_binned(const BinnedCoilModel& m, const CoilInput& inp) {
  return eval_binned_detail(m, inp).out;
}

// ---------------------------------------------------------------------------
// Compact model
// ---------------------------------------------------------------------------

CoilOutput eval_compact(const CompactCoilModel& m, const CoilInput& inp) {
  return {compact_T_ca(m, inp.T_ma, inp.W_ma, inp.m_sa, inp.m_w),
          compact_W_ca(m, inp.T_ma, inp.W_ma, inp.m_sa, inp.m_w)};
}

namespace {
const std::array<const char*, kCompactTerms> kCompactNames = {
    "1", "T_ma", "W_ma", "m_sa", "m_w", "T_ma^2", "W_ma^2", "m_sa^2", "m_w^2",
    "T_ma*W_ma", "T_ma*m_sa", "T_ma*m_w", "W_ma*m_sa", "W_ma*m_w", "m_sa*m_w"};
}

CompactCoilModel fit_compact_model(const CoilDataset& data) {
  if (data.empty()) throw std::invalid_argument("fit_compact_model: empty dataset");
  // Canonical row order, as in the binned fit.
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    const auto& x = data[a];
    const auto& y = data[c];
    return std::tie(x.in.T_ma, x.in.W_ma, x.in.m_sa, x.in.m_w, x.out.T_ca, x.out.W_ca) <
           std::tie(y.in.T_ma, y.in.W_ma, y.in.m_sa, y.in.m_w, y.out.T_ca, y.out.W_ca);
  });
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd A(n, kCompactTerms);
  Eigen::MatrixXd Y(n, 2);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& s = data[order[static_cast<std::size_t>(k)]];
    const auto b = compact_basis(s.in.T_ma, s.in.W_ma, s.in.m_sa, s.in.m_w);
    for (int j = 0; j < kCompactTerms; ++j) A(k, j) = s.in.m_w * b[j];
    Y(k, 0) = s.out.T_ca - s.in.T_ma;
    Y(k, 1) = s.out.W_ca - s.in.W_ma;
  }
  // Identically zero columns (for example every W term of a dry sweep) carry
  // no information; they are dropped and their coefficients set to zero.
  std::vector<int> active;
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(kCompactTerms);
  for (int j = 0; j < kCompactTerms; ++j) {
    scale[j] = A.col(j).cwiseAbs().maxCoeff();
    if (scale[j] > 0.0) active.push_back(j);
  }
  if (active.empty()) throw std::runtime_error("fit_compact_model: all basis columns vanish (m_w = 0)");
  Eigen::MatrixXd As(n, static_cast<Eigen::Index>(active.size()));
  for (std::size_t c = 0; c < active.size(); ++c) As.col(c) = A.col(active[c]) / scale[active[c]];

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(As);
  qr.setThreshold(1e-12);
  const Eigen::Index p = static_cast<Eigen::Index>(active.size());
  if (qr.rank() < p) {
    std::string names;
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      if (!names.empty()) names += ", ";
      names += std::string("m_w*") + kCompactNames[active[qr.colsPermutation().indices()[k]]];
    }
    throw std::runtime_error("fit_compact_model: rank deficient design; dependent columns: " + names);
  }
  const Eigen::MatrixXd X = qr.solve(Y);
  CompactCoilModel m;
  for (std::size_t c = 0; c < active.size(); ++c) {
    m.alpha[active[c]] = X(static_cast<Eigen::Index>(c), 0) / scale[active[c]];
    m.beta[active[c]] = X(static_cast<Eigen::Index>(c), 1) / scale[active[c]];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace {
template <typename Eval>
FitReport score(const CoilDataset& data, Eval&& eval) {
  if (data.empty()) throw std::invalid_argument("validate_model: empty dataset");
  FitReport r;
  double sT = 0.0, sW = 0.0;
  for (const auto& s : data) {
    const CoilOutput o = eval(s.in);
    const double eT = std::abs(o.T_ca - s.out.T_ca);
    const double eW = std::abs(o.W_ca - s.out.W_ca);
    sT += eT * eT;
    sW += eW * eW;
    r.max_T = std::max(r.max_T, eT);
    r.max_W = std::max(r.max_W, eW);
  }
  r.n_samples = data.size();
  r.rmse_T = std::sqrt(sT / static_cast<double>(data.size()));
  r.rmse_W = std::sqrt(sW / static_cast<double>(data.size()));
  return r;
}
}  // namespace

FitReport validate_model(const BinnedCoilModel& m, const CoilDataset& data) {
  return score(data, [&](const CoilInput& in) { return eval_binned(m, in); });
}

FitReport validate_model(const CompactCoilModel& m, const CoilDataset& data) {
  return score(data, [&](const CoilInput& in) { return eval_compact(m, in); });
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

json axis_json(const GridAxis& a) { return {{"lo", a.lo}, {"step", a.step}, {"count", a.count}}; }

GridAxis axis_from(const json& j) {
  return GridAxis{j.at("lo").get<double>(), j.at("step").get<double>(), j.at("count").get<int>()};
}

void check_header(const json& j, const char* kind) {
  if (j.value("format", std::string()) != kind) {
    throw std::runtime_error(std::string("coil model: expected format '") + kind + "'");
  }
  const int v = j.value("version", -1);
  if (v != kCoilFormatVersion) {
    throw std::runtime_error("coil model: unsupported version " + std::to_string(v));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

}  // namespace

std::string serialize(const BinnedCoilModel& m) {
  json j;
  j["format"] = "hvac-binned-coil";
  j["version"] = kCoilFormatVersion;
  j["basis"] = "total-degree-5 in normalized (m_sa, m_w); see binned_exponents()";
  j["T_bins"] = axis_json(m.T_bins);
  j["RH_bins"] = axis_json(m.RH_bins);
  j["m_sa"] = {m.m_sa_lo, m.m_sa_hi};
  j["m_w"] = {m.m_w_lo, m.m_w_hi};
  j["T_wi"] = m.T_wi;
  j["P_atm"] = m.P_atm;
  json bins = json::array();
  for (const auto& b : m.bins) {
    json e;
    e["empty"] = b.empty;
    e["n"] = b.n_samples;
    if (!b.empty) {
      e["degree"] = b.degree;
      e["cT"] = b.cT;
      e["cW"] = b.cW;
      e["rmse_T"] = b.rmse_T;
      e["max_T"] = b.max_T;
      e["rmse_W"] = b.rmse_W;
      e["max_W"] = b.max_W;
    }
    bins.push_back(std::move(e));
  }
  j["bins"] = std::move(bins);
  return j.dump() + "\n";
}

std::string serialize(const CompactCoilModel& m) {
  json j;
  j["format"] = "hvac-compact-coil";
  j["version"] = kCoilFormatVersion;
  j["terms"] = kCompactNames;
  j["alpha"] = m.alpha;
  j["beta"] = m.beta;
  return j.dump(2) + "\n";
}

BinnedCoilModel parse_binned_model(const std::string& text) {
  const json j = json::parse(text);
  check_header(j, "hvac-binned-coil");
  BinnedCoilModel m;
  m.T_bins = axis_from(j.at("T_bins"));
  m.RH_bins = axis_from(j.at("RH_bins"));
  m.m_sa_lo = j.at("m_sa").at(0).get<double>();
  m.m_sa_hi = j.at("m_sa").at(1).get<double>();
  m.m_w_lo = j.at("m_w").at(0).get<double>();
  m.m_w_hi = j.at("m_w").at(1).get<double>();
  m.T_wi = j.at("T_wi").get<double>();
  m.P_atm = j.at("P_atm").get<double>();
  const auto& bins = j.at("bins");
  if (bins.size() != static_cast<std::size_t>(m.T_bins.count) * m.RH_bins.count) {
    throw std::runtime_error("coil model: bin count does not match grid");
  }
  for (const auto& e : bins) {
    BinFit b;
    b.empty = e.at("empty").get<bool>();
    b.n_samples = e.at("n").get<std::size_t>();
    if (!b.empty) {
      b.degree = e.at("degree").get<int>();
      b.cT = e.at("cT").get<std::array<double, kBinnedTerms>>();
      b.cW = e.at("cW").get<std::array<double, kBinnedTerms>>();
      b.rmse_T = e.at("rmse_T").get<double>();
      b.max_T = e.at("max_T").get<double>();
      b.rmse_W = e.at("rmse_W").get<double>();
      b.max_W = e.at("max_W").get<double>();
    }
    m.bins.push_back(b);
  }
  return m;
}

CompactCoilModel parse_compact_model(const std::string& text) {
  const json j = json::parse(text);
  check_header(j, "hvac-compact-coil");
  CompactCoilModel m;
  m.alpha = j.at("alpha").get<std::array<double, kCompactTerms>>();
  m.beta = j.at("beta").get<std::array<double, kCompactTerms>>();
  return m;
}

void save_model(const std::string& path, const BinnedCoilModel& m) { write_file(path, serialize(m)); }
void save_model(const std::string& path, const CompactCoilModel& m) { write_file(path, serialize(m)); }
BinnedCoilModel load_binned_model(const std::string& path) { return parse_binned_model(read_file(path)); }
CompactCoilModel load_compact_model(const std::string& path) { return parse_compact_model(read_file(path)); }

}  // namespace hvac
