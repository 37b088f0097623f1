#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "hvac/psychro.hpp"

namespace hvac {

struct CoilInput {
  double T_ma = 0.0;  ///< mixed-air temperature [degC]
  double W_ma = 0.0;  ///< mixed-air humidity ratio [kg/kg]
  double m_sa = 0.0;  ///< supply-air mass flow [kg/s]
  double m_w = 0.0;   ///< chilled-water mass flow [kg/s]
};

struct CoilOutput {
  double T_ca = 0.0;
  double W_ca = 0.0;
};

struct CoilSample {
  CoilInput in;
  CoilOutput out;
};

using CoilDataset = std::vector<CoilSample>;

// ---------------------------------------------------------------------------
// Reference coil (synthetic testbed)
// ---------------------------------------------------------------------------

/// Counterflow effectiveness-NTU coil with a bypass-factor wet regime.
/// UA follows a product power law in both flows around the nominal point.
struct ReferenceCoilParams {
  double UA_nom = 3172.5904714099943;  ///< [W/K], gives T_ca = 13 degC at the anchor point
  double m_sa_nom = 2.3;
  double m_w_nom = 1.1;
  double flow_exponent = 0.8;
  double C_water = 4186.0;  ///< [J/(kg K)]
  PsychroConstants psychro{};
};

inline constexpr double kChilledWaterInlet = 6.7;  ///< T_wi [degC]

CoilOutput reference_coil(const CoilInput& inp, double T_wi = kChilledWaterInlet,
                          const ReferenceCoilParams& p = {});

/// UA_nom for which the anchor inlet (25 degC, 50 % RH, 2.3 kg/s, 1.1 kg/s) leaves at T_target.
double calibrate_reference_ua(double T_target = 13.0, const ReferenceCoilParams& base = {});

// ---------------------------------------------------------------------------
// Sweep grids
// ---------------------------------------------------------------------------

/// One evenly spaced axis: values lo + i*step for i in [0, count).
struct GridAxis {
  double lo = 0.0;
  double step = 0.0;
  int count = 0;
  double value(int i) const { return lo + step * i; }
  double hi() const { return value(count - 1); }
};

struct SweepRanges {
  GridAxis T{10.0, 5.0 / 9.0, 61};   // 10 .. 43.33 degC, one degF per step
  GridAxis RH{0.10, 0.05, 19};       // 10 .. 100 %
  GridAxis m_sa{0.1705, (4.6 - 0.1705) / 7.0, 8};
  GridAxis m_w{0.0, 2.21 / 7.0, 8};
  double T_wi = kChilledWaterInlet;
};

enum class Density { Tiny, Default, Paper };

Density parse_density(const std::string& name);
std::string to_string(Density d);

/// Sweep ranges with the flow axes resampled to the preset density
/// (tiny 6x6, default 8x8, paper 16x16 flow points per bin).
SweepRanges sweep_for_density(Density d);

CoilDataset generate_training_grid(const SweepRanges& r, const ReferenceCoilParams& p = {});

/// Same ranges shifted by half a step on every axis (one fewer point per axis).
CoilDataset generate_validation_grid(const SweepRanges& r, const ReferenceCoilParams& p = {});

void write_dataset_csv(std::ostream& os, const CoilDataset& d);
CoilDataset read_dataset_csv(std::istream& is);

// ---------------------------------------------------------------------------
// Binned degree-5 model
// ---------------------------------------------------------------------------

inline constexpr int kBinnedDegree = 5;
inline constexpr int kBinnedTerms = 21;

/// Monomial exponents (i, j) of m_sa^i m_w^j ordered by total degree, then by descending i.
const std::array<std::array<int, 2>, kBinnedTerms>& binned_exponents();

/// Number of terms of the total-degree basis.
constexpr int basis_size(int degree) { return (degree + 1) * (degree + 2) / 2; }

struct BinFit {
  bool empty = true;
  int degree = kBinnedDegree;          ///< may be reduced on rank deficiency
  std::array<double, kBinnedTerms> cT{};  ///< T_ca coefficients (unused tail is zero)
  std::array<double, kBinnedTerms> cW{};
  std::size_t n_samples = 0;
  double rmse_T = 0.0, max_T = 0.0;
  double rmse_W = 0.0, max_W = 0.0;
};

struct BinnedCoilModel {
  GridAxis T_bins;   ///< bin centres in T_ma
  GridAxis RH_bins;  ///< bin centres in RH_ma
  double m_sa_lo = 0.1705, m_sa_hi = 4.6;
  double m_w_lo = 0.0, m_w_hi = 2.21;
  double T_wi = kChilledWaterInlet;
  double P_atm = 101325.0;
  std::vector<BinFit> bins;  ///< row-major: index = iT * RH_bins.count + iRH

  std::size_t bin_index(int iT, int iRH) const {
    return static_cast<std::size_t>(iT) * RH_bins.count + iRH;
  }
  std::size_t bin_count() const { return bins.size(); }
};

struct BinnedFitSummary {
  std::size_t n_empty = 0;
  std::size_t n_reduced = 0;
  std::vector<std::size_t> reduced_bins;
};

BinnedCoilModel fit_binned_model(const CoilDataset& data, const SweepRanges& r,
                                 BinnedFitSummary* summary = nullptr);

struct BinnedEval {
  CoilOutput out;
  std::size_t bin = 0;
  bool clamped = false;             ///< an input was moved onto the fitted domain
  bool substituted_empty = false;   ///< nearest non-empty bin used
};

/// Locate the (T_ma, RH_ma) bin with half-open intervals around each centre.
std::size_t locate_bin(const BinnedCoilModel& m, double T_ma, double W_ma, bool* clamped = nullptr);

BinnedEval eval_binned_detail(const BinnedCoilModel& m, const CoilInput& inp);
CoilOutput eval_binned(const BinnedCoilModel& m, const CoilInput& inp);

/// Evaluate the raw polynomial of one bin (no clipping).
CoilOutput eval_bin_polynomial(const BinnedCoilModel& m, std::size_t bin, double m_sa, double m_w);

// ---------------------------------------------------------------------------
// Compact control-oriented model
// ---------------------------------------------------------------------------

inline constexpr int kCompactTerms = 15;

/// T_ca = T_ma + m_w f(T_ma, W_ma, m_sa, m_w),  W_ca = W_ma + m_w g(...)
/// with f and g full quadratics in the four inputs.
/// Term order: 1, T, W, m_sa, m_w, T^2, W^2, m_sa^2, m_w^2, TW, T m_sa, T m_w, W m_sa, W m_w, m_sa m_w.
struct CompactCoilModel {
  std::array<double, kCompactTerms> alpha{};
  std::array<double, kCompactTerms> beta{};
};

template <typename S>
std::array<S, kCompactTerms> compact_basis(const S& T, const S& W, const S& ms, const S& mw) {
  return {S(1.0), T, W, ms, mw, T * T, W * W, ms * ms, mw * mw,
          T * W, T * ms, T * mw, W * ms, W * mw, ms * mw};
}

template <typename S>
S compact_T_ca(const CompactCoilModel& m, const S& T, const S& W, const S& ms, const S& mw) {
  const auto b = compact_basis(T, W, ms, mw);
  S f = m.alpha[0] * b[0];
  for (int i = 1; i < kCompactTerms; ++i) f = f + m.alpha[i] * b[i];
  return T + mw * f;
}

template <typename S>
S compact_W_ca(const CompactCoilModel& m, const S& T, const S& W, const S& ms, const S& mw) {
  const auto b = compact_basis(T, W, ms, mw);
  S g = m.beta[0] * b[0];
  for (int i = 1; i < kCompactTerms; ++i) g = g + m.beta[i] * b[i];
  return W + mw * g;
}

CoilOutput eval_compact(const CompactCoilModel& m, const CoilInput& inp);

/// Throws std::runtime_error naming the dependent columns when the design is rank deficient.
CompactCoilModel fit_compact_model(const CoilDataset& data);

// ---------------------------------------------------------------------------
// Validation and serialization
// ---------------------------------------------------------------------------

struct FitReport {
  double rmse_T = 0.0, max_T = 0.0;
  double rmse_W = 0.0, max_W = 0.0;
  std::size_t n_samples = 0;
};

FitReport validate_model(const BinnedCoilModel& m, const CoilDataset& data);
FitReport validate_model(const CompactCoilModel& m, const CoilDataset& data);

inline constexpr int kCoilFormatVersion = 1;

std::string serialize(const BinnedCoilModel& m);
std::string serialize(const CompactCoilModel& m);
BinnedCoilModel parse_binned_model(const std::string& text);
CompactCoilModel parse_compact_model(const std::string& text);

void save_model(const std::string& path, const BinnedCoilModel& m);
void save_model(const std::string& path, const CompactCoilModel& m);
BinnedCoilModel load_binned_model(const std::string& path);
CompactCoilModel load_compact_model(const std::string& path);

}  // namespace hvac
