#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hvac/coil.hpp"
#include "hvac/nlp/dual.hpp"

using namespace hvac;
using doctest::Approx;

namespace {

// Shared fits: building them once keeps the suite fast.
struct Fits {
  SweepRanges ranges = sweep_for_density(Density::Default);
  CoilDataset train = generate_training_grid(ranges);
  CoilDataset held_out = generate_validation_grid(ranges);
  BinnedFitSummary summary;
  BinnedCoilModel binned = fit_binned_model(train, ranges, &summary);
  CompactCoilModel compact = fit_compact_model(train);
};

const Fits& fits() {
  static const Fits f;
  return f;
}

double normalized(double x, double lo, double hi) { return (2.0 * x - (lo + hi)) / (hi - lo); }

}  // namespace

TEST_CASE("reference coil is calibrated to the anchor point") {
  const ReferenceCoilParams p;
  CHECK(calibrate_reference_ua(13.0) == Approx(p.UA_nom).epsilon(1e-9));
  const CoilInput anchor{25.0, psychro::humidity_ratio_from_rh(25.0, 0.5), 2.3, 1.1};
  CHECK(reference_coil(anchor).T_ca == Approx(13.0).epsilon(1e-9));
}

TEST_CASE("reference coil passes air through without coolant") {
  for (double T : {12.0, 25.0, 40.0}) {
    const CoilInput in{T, 0.01, 2.0, 0.0};
    const CoilOutput out = reference_coil(in);
    CHECK(out.T_ca == T);
    CHECK(out.W_ca == 0.01);
  }
}

TEST_CASE("reference coil does not condense from air whose dew point is below the water inlet") {
  const double W = psychro::humidity_ratio_from_rh(30.0, 0.15);  // dew point near 1 degC
  REQUIRE(psychro::dew_point(W) < kChilledWaterInlet);
  for (double m_w = 0.0; m_w <= 2.21; m_w += 0.1) {
    CHECK(reference_coil({30.0, W, 1.5, m_w}).W_ca == W);
  }
}

TEST_CASE("reference coil leaving temperature is non-increasing in water flow") {
  for (double T : {18.0, 27.0, 40.0}) {
    for (double rh : {0.3, 0.9}) {
      const double W = psychro::humidity_ratio_from_rh(T, rh);
      double prev = reference_coil({T, W, 2.0, 0.0}).T_ca;
      for (int i = 1; i < 50; ++i) {
        const double cur = reference_coil({T, W, 2.0, 2.21 * i / 49.0}).T_ca;
        CHECK(cur <= prev + 1e-12);
        prev = cur;
      }
    }
  }
}

TEST_CASE("training grid sizes") {
  CHECK(generate_training_grid(sweep_for_density(Density::Default)).size() == 74176u);
  CHECK(generate_training_grid(sweep_for_density(Density::Paper)).size() == 296704u);
  SweepRanges empty = sweep_for_density(Density::Tiny);
  empty.m_w.count = 0;
  CHECK(generate_training_grid(empty).empty());
  // 60 x 18 x 7 x 7 at the half-step offsets
  CHECK(fits().held_out.size() == 60u * 18u * 7u * 7u);
}

TEST_CASE("every training row is physically consistent") {
  for (const CoilSample& s : fits().train) {
    CHECK(s.out.T_ca <= s.in.T_ma);
    CHECK(s.out.W_ca <= s.in.W_ma);
    CHECK(s.out.T_ca >= kChilledWaterInlet - 1e-12);
  }
}

TEST_CASE("bin grid has 1159 bins") {
  const BinnedCoilModel& m = fits().binned;
  CHECK(m.bin_count() == 1159u);
  CHECK(m.T_bins.count == 61);
  CHECK(m.RH_bins.count == 19);
  CHECK(m.T_bins.hi() == Approx(43.333333333).epsilon(1e-9));
  CHECK(fits().summary.n_empty == 0u);
}

TEST_CASE("binned basis is the total-degree basis") {
  const auto& e = binned_exponents();
  CHECK(e.size() == 21u);
  for (const auto& ij : e) CHECK(ij[0] + ij[1] <= 5);
  CHECK(e[0] == std::array<int, 2>{0, 0});
  CHECK(e[1] == std::array<int, 2>{1, 0});
  CHECK(e[20] == std::array<int, 2>{0, 5});
}

TEST_CASE("binned fit recovers an exact degree-5 polynomial") {
  SweepRanges r = sweep_for_density(Density::Tiny);
  r.T = GridAxis{20.0, 1.0, 1};
  r.RH = GridAxis{0.5, 0.05, 1};
  std::array<double, kBinnedTerms> cT{}, cW{};
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < kBinnedTerms; ++k) {
    cT[k] = U(rng);
    cW[k] = 1e-3 * U(rng);
  }
  CoilDataset d;
  const double W = psychro::humidity_ratio_from_rh(20.0, 0.5);
  for (int i = 0; i < 9; ++i) {
    for (int j = 0; j < 9; ++j) {
      const double ms = 0.1705 + (4.6 - 0.1705) * i / 8.0;
      const double mw = 2.21 * j / 8.0;
      const double u = normalized(ms, 0.1705, r.m_sa.hi());
      const double v = normalized(mw, 0.0, r.m_w.hi());
      double t = 0.0, w = 0.0;
      for (int k = 0; k < kBinnedTerms; ++k) {
        const double phi = std::pow(u, binned_exponents()[k][0]) * std::pow(v, binned_exponents()[k][1]);
        t += cT[k] * phi;
        w += cW[k] * phi;
      }
      d.push_back({{20.0, W, ms, mw}, {t, w}});
    }
  }
  const BinnedCoilModel m = fit_binned_model(d, r);
  REQUIRE_FALSE(m.bins[0].empty);
  CHECK(m.bins[0].degree == 5);
  for (int k = 0; k < kBinnedTerms; ++k) {
    CHECK(m.bins[0].cT[k] == Approx(cT[k]).epsilon(1e-8));
    CHECK(m.bins[0].cW[k] == Approx(cW[k]).epsilon(1e-8).scale(1e-3));
  }
}

TEST_CASE("binned fit reduces the degree on a rank-deficient bin") {
  SweepRanges r = sweep_for_density(Density::Tiny);
  r.T = GridAxis{20.0, 1.0, 1};
  r.RH = GridAxis{0.5, 0.05, 1};
  CoilDataset d;
  const double W = psychro::humidity_ratio_from_rh(20.0, 0.5);
  // Only three distinct water flows: the m_w direction supports degree 2 at most.
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double ms = 0.2 + 0.35 * i, mw = 0.7 * j;
      d.push_back({{20.0, W, ms, mw}, {20.0 - mw, W}});
    }
  }
  BinnedFitSummary s;
  const BinnedCoilModel m = fit_binned_model(d, r, &s);
  CHECK(m.bins[0].degree < 5);
  CHECK(s.n_reduced == 1u);
  CHECK(s.reduced_bins == std::vector<std::size_t>{0});
}

TEST_CASE("bins with too few points are marked empty and substituted") {
  SweepRanges r = sweep_for_density(Density::Tiny);
  r.T = GridAxis{20.0, 1.0, 2};
  r.RH = GridAxis{0.5, 0.05, 1};
  CoilDataset d;
  const double W = psychro::humidity_ratio_from_rh(20.0, 0.5);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) d.push_back({{20.0, W, 0.2 + 0.8 * i, 0.4 * j}, {19.0, W}});
  }
  BinnedFitSummary s;
  const BinnedCoilModel m = fit_binned_model(d, r, &s);
  CHECK(s.n_empty == 1u);
  CHECK(m.bins[1].empty);
  const BinnedEval e = eval_binned_detail(m, {21.0, psychro::humidity_ratio_from_rh(21.0, 0.5), 1.0, 1.0});
  CHECK(e.substituted_empty);
  CHECK(e.bin == 0u);
}

TEST_CASE("binned fit is invariant to row order") {
  const Fits& f = fits();
  CoilDataset shuffled = f.train;
  std::mt19937_64 rng(5);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const BinnedCoilModel m = fit_binned_model(shuffled, f.ranges);
  for (std::size_t b = 0; b < m.bin_count(); b += 37) {
    for (int k = 0; k < kBinnedTerms; ++k) {
      CHECK(m.bins[b].cT[k] == Approx(f.binned.bins[b].cT[k]).epsilon(1e-12));
      CHECK(m.bins[b].cW[k] == Approx(f.binned.bins[b].cW[k]).epsilon(1e-12));
    }
  }
  const CompactCoilModel c = fit_compact_model(shuffled);
  for (int k = 0; k < kCompactTerms; ++k) {
    CHECK(c.alpha[k] == Approx(f.compact.alpha[k]).epsilon(1e-12));
    CHECK(c.beta[k] == Approx(f.compact.beta[k]).epsilon(1e-12));
  }
}

TEST_CASE("binned model holds its training error and the held-out threshold") {
  const Fits& f = fits();
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> pick(0, f.train.size() - 1);
  for (int i = 0; i < 500; ++i) {
    const CoilSample& s = f.train[pick(rng)];
    const BinnedEval e = eval_binned_detail(f.binned, s.in);
    const BinFit& fit = f.binned.bins[e.bin];
    CHECK(std::abs(e.out.T_ca - s.out.T_ca) <= fit.max_T + 1e-12);
    CHECK(std::abs(e.out.W_ca - s.out.W_ca) <= fit.max_W + 1e-12);
  }
  double T_lo = 1e9, T_hi = -1e9, W_lo = 1e9, W_hi = -1e9;
  for (const CoilSample& s : f.held_out) {
    T_lo = std::min(T_lo, s.out.T_ca);
    T_hi = std::max(T_hi, s.out.T_ca);
    W_lo = std::min(W_lo, s.out.W_ca);
    W_hi = std::max(W_hi, s.out.W_ca);
  }
  const FitReport r = validate_model(f.binned, f.held_out);
  CHECK(r.rmse_T <= 0.01 * (T_hi - T_lo));
  CHECK(r.rmse_W <= 0.01 * (W_hi - W_lo));
}

TEST_CASE("binned evaluation at zero water flow stays within the fit error of the inlet") {
  const Fits& f = fits();
  for (double T = 12.0; T < 43.0; T += 3.1) {
    for (double rh = 0.15; rh < 1.0; rh += 0.2) {
      const double W = psychro::humidity_ratio_from_rh(T, rh);
      const BinnedEval e = eval_binned_detail(f.binned, {T, W, 2.0, 0.0});
      const BinFit& fit = f.binned.bins[e.bin];
      CHECK(std::abs(e.out.T_ca - T) <= 2.0 * fit.max_T + 1e-9);
      CHECK(std::abs(e.out.W_ca - W) <= 2.0 * fit.max_W + 1e-12);
    }
  }
}

TEST_CASE("binned evaluation is nearly continuous across bin edges") {
  const Fits& f = fits();
  const BinnedCoilModel& m = f.binned;
  int checked = 0;
  for (int iT = 5; iT < 55; iT += 7) {
    const double edge = m.T_bins.value(iT) + 0.5 * m.T_bins.step;
    for (double rh : {0.35, 0.62}) {
      const double W = psychro::humidity_ratio_from_rh(edge, rh);
      for (double ms : {1.0, 3.0}) {
        for (double mw : {0.5, 1.5}) {
          const BinnedEval a = eval_binned_detail(m, {edge - 1e-7, W, ms, mw});
          const BinnedEval b = eval_binned_detail(m, {edge + 1e-7, W, ms, mw});
          REQUIRE(a.bin != b.bin);
          // Both fits sit within their own worst training error of the same reference surface.
          const double tol = m.bins[a.bin].max_T + m.bins[b.bin].max_T;
          CHECK(std::abs(a.out.T_ca - b.out.T_ca) < std::max(tol, 1e-3));
          ++checked;
        }
      }
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("binned output is clipped to the physical cone") {
  const Fits& f = fits();
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> UT(10.0, 43.0), UR(0.1, 1.0), UM(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double T = UT(rng);
    const double W = psychro::humidity_ratio_from_rh(T, UR(rng));
    const CoilOutput o = eval_binned(f.binned, {T, W, 0.1705 + 4.43 * UM(rng), 2.21 * UM(rng)});
    CHECK(o.T_ca <= T);
    CHECK(o.W_ca <= W);
  }
}

TEST_CASE("bin location uses half-open intervals around the centres") {
  const BinnedCoilModel& m = fits().binned;
  const double c = m.T_bins.value(10);
  const double W = psychro::humidity_ratio_from_rh(c, 0.5);
  bool clamped = true;
  const std::size_t b = locate_bin(m, c, W, &clamped);
  CHECK_FALSE(clamped);
  CHECK(b == m.bin_index(10, 8));
  locate_bin(m, 50.0, 0.01, &clamped);
  CHECK(clamped);
}

TEST_CASE("compact model passes inputs through at zero water flow") {
  const CompactCoilModel& m = fits().compact;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const CoilInput in{10.0 + 33.0 * U(rng), 0.02 * U(rng), 0.2 + 4.0 * U(rng), 0.0};
    const CoilOutput o = eval_compact(m, in);
    CHECK(o.T_ca == in.T_ma);
    CHECK(o.W_ca == in.W_ma);
  }
}

TEST_CASE("binned model is more accurate than the compact model on held-out data") {
  const Fits& f = fits();
  const FitReport rb = validate_model(f.binned, f.held_out);
  const FitReport rc = validate_model(f.compact, f.held_out);
  CHECK(rb.rmse_T < rc.rmse_T);
  CHECK(rb.rmse_W < rc.rmse_W);
}

TEST_CASE("compact fit on a dry sweep leaves the humidity residual at zero") {
  CoilDataset dry = fits().train;
  for (CoilSample& s : dry) {
    s.in.W_ma = 0.0;
    s.out.W_ca = 0.0;
  }
  const CompactCoilModel m = fit_compact_model(dry);
  for (std::size_t i = 0; i < dry.size(); i += 97) {
    CHECK(std::abs(eval_compact(m, dry[i].in).W_ca) < 1e-9);
  }
}

TEST_CASE("compact fit names dependent columns") {
  CoilDataset d;
  for (int i = 0; i < 10; ++i) {
    for (int j = 1; j < 6; ++j) {
      for (int k = 0; k < 4; ++k) d.push_back({{15.0 + 2.0 * i, 0.005 + 0.002 * k, 2.0, 0.4 * j}, {14.0, 0.004}});
    }
  }
  try {
    fit_compact_model(d);
    FAIL("expected rank deficiency");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("dependent columns: m_w*") != std::string::npos);
  }
}

TEST_CASE("compact derivatives agree with central differences") {
  const CompactCoilModel& m = fits().compact;
  using D = nlp::Dual2<4>;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const std::array<double, 4> x{12.0 + 30.0 * U(rng), 0.004 + 0.015 * U(rng), 0.3 + 4.0 * U(rng),
                                  0.1 + 2.0 * U(rng)};
    std::array<D, 4> ad;
    for (int k = 0; k < 4; ++k) ad[k] = D::variable(x[k], k);
    const D T = compact_T_ca(m, ad[0], ad[1], ad[2], ad[3]);
    const D W = compact_W_ca(m, ad[0], ad[1], ad[2], ad[3]);
    for (int k = 0; k < 4; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[k]));
      auto xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      const double fdT = (compact_T_ca(m, xp[0], xp[1], xp[2], xp[3]) - compact_T_ca(m, xm[0], xm[1], xm[2], xm[3])) /
                         (2 * h);
      const double fdW = (compact_W_ca(m, xp[0], xp[1], xp[2], xp[3]) - compact_W_ca(m, xm[0], xm[1], xm[2], xm[3])) /
                         (2 * h);
      CHECK(T.g[k] == Approx(fdT).epsilon(1e-6).scale(1.0));
      CHECK(W.g[k] == Approx(fdW).epsilon(1e-6).scale(1e-3));
    }
  }
}

TEST_CASE("validation reports") {
  const Fits& f = fits();
  const FitReport train = validate_model(f.binned, f.train);
  const FitReport held = validate_model(f.binned, f.held_out);
  CHECK(train.rmse_T <= held.rmse_T);
  CHECK(train.rmse_W <= held.rmse_W);
  CHECK(held.n_samples == f.held_out.size());
  for (double v : {held.rmse_T, held.max_T, held.rmse_W, held.max_W}) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
  }
  // A dataset labelled by the compact model itself scores zero.
  CoilDataset self = f.held_out;
  for (CoilSample& s : self) s.out = eval_compact(f.compact, s.in);
  const FitReport perfect = validate_model(f.compact, self);
  CHECK(perfect.rmse_T == 0.0);
  CHECK(perfect.max_T == 0.0);
  CHECK(perfect.rmse_W == 0.0);
  CHECK(perfect.max_W == 0.0);
  CHECK_THROWS_AS(validate_model(f.compact, CoilDataset{}), std::invalid_argument);
}

TEST_CASE("fits are deterministic") {
  const Fits& f = fits();
  CHECK(serialize(fit_binned_model(f.train, f.ranges)) == serialize(f.binned));
  CHECK(serialize(fit_compact_model(f.train)) == serialize(f.compact));
}

TEST_CASE("model serialization round trip") {
  const Fits& f = fits();
  const BinnedCoilModel b = parse_binned_model(serialize(f.binned));
  CHECK(serialize(b) == serialize(f.binned));
  const CompactCoilModel c = parse_compact_model(serialize(f.compact));
  for (int k = 0; k < kCompactTerms; ++k) {
    CHECK(c.alpha[k] == f.compact.alpha[k]);
    CHECK(c.beta[k] == f.compact.beta[k]);
  }
  CHECK_THROWS(parse_compact_model(serialize(f.binned)));
  CHECK_THROWS(parse_binned_model("{\"format\": \"binned-coil\", \"version\": 99}"));
}

TEST_CASE("dataset CSV round trip") {
  CoilDataset d(fits().train.begin(), fits().train.begin() + 50);
  std::stringstream ss;
  write_dataset_csv(ss, d);
  const CoilDataset back = read_dataset_csv(ss);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back[i].in.T_ma == d[i].in.T_ma);
    CHECK(back[i].in.m_w == d[i].in.m_w);
    CHECK(back[i].out.W_ca == d[i].out.W_ca);
  }
  std::stringstream bad("T_ma,W_ma\n1,2\n");
  CHECK_THROWS(read_dataset_csv(bad));
  std::stringstream empty;
  CHECK_THROWS(read_dataset_csv(empty));
}

TEST_CASE("density names") {
  CHECK(parse_density("tiny") == Density::Tiny);
  CHECK(to_string(Density::Paper) == "paper");
  CHECK_THROWS_AS(parse_density("huge"), std::invalid_argument);
}
