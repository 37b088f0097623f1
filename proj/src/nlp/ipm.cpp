#include "hvac/nlp/ipm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <tuple>
#include <utility>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace hvac::nlp {

std::string to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal-local";
    case Status::MaxIter: return "max-iter";
    case Status::Infeasible: return "infeasible";
    case Status::NumericalError: return "numerical-error";
  }
  return "unknown";
}

double constraint_violation(const Problem& problem, const std::vector<double>& x) {
  double v = 0.0;
  for (int j = 0; j < problem.n(); ++j) {
    v = std::max(v, problem.x_lower()[j] - x[j]);
    v = std::max(v, x[j] - problem.x_upper()[j]);
  }
  std::vector<double> g(static_cast<std::size_t>(problem.m()));
  problem.constraints(x.data(), g.data());
  for (int r = 0; r < problem.m(); ++r) {
    v = std::max(v, problem.g_lower()[r] - g[r]);
    v = std::max(v, g[r] - problem.g_upper()[r]);
  }
  return v;
}

namespace {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Vec = Eigen::VectorXd;

double relaxed(double b, double factor, int sign) {
  return b + sign * factor * std::max(1.0, std::abs(b));
}

/// Reduced KKT matrix with a fixed sparsity pattern and precomputed value slots.
class KktSystem {
 public:
  KktSystem(const Problem& P, const std::vector<int>& jac_rows, const std::vector<int>& jac_cols,
            const std::vector<int>& eq_index, const std::vector<int>& ineq_rows, bool stage_ordering)
      : n_(P.n()), mE_(0) {
    for (int r = 0; r < P.m(); ++r) {
      if (eq_index[r] >= 0) ++mE_;
    }
    dim_ = n_ + mE_;

    // Unknown ordering: by stage, then primal before equality rows, then index.
    std::vector<std::tuple<int, int, int>> keys;
    keys.reserve(static_cast<std::size_t>(dim_));
    for (int j = 0; j < n_; ++j) keys.emplace_back(stage_ordering ? P.var_stage()[j] : 0, 0, j);
    for (int r = 0; r < P.m(); ++r) {
      if (eq_index[r] >= 0) {
        keys.emplace_back(stage_ordering ? P.row_stage()[r] : 0, 1, n_ + eq_index[r]);
      }
    }
    std::vector<int> order(static_cast<std::size_t>(dim_));
    std::iota(order.begin(), order.end(), 0);
    if (stage_ordering) {
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return keys[a] < keys[b]; });
    }
    pos_.assign(static_cast<std::size_t>(dim_), 0);
    for (int k = 0; k < dim_; ++k) pos_[std::get<2>(keys[order[k]])] = k;

    // Collect every (row, col) in permuted coordinates, lower triangle.
    std::vector<std::pair<int, int>> entries;  // (col, row)
    auto add = [&](int u, int v) {
      int a = pos_[u], b = pos_[v];
      if (a < b) std::swap(a, b);
      entries.emplace_back(b, a);
    };
    const auto& hr = P.hessian_rows();
    const auto& hc = P.hessian_cols();
    for (std::size_t k = 0; k < hr.size(); ++k) add(hr[k], hc[k]);
    for (int j = 0; j < n_; ++j) add(j, j);
    row_start_.assign(static_cast<std::size_t>(P.m()) + 1, 0);
    for (std::size_t k = 0; k < jac_rows.size(); ++k) row_start_[jac_rows[k] + 1]++;
    for (int r = 0; r < P.m(); ++r) row_start_[r + 1] += row_start_[r];
    for (int r : ineq_rows) {
      for (int a = row_start_[r]; a < row_start_[r + 1]; ++a) {
        for (int b = row_start_[r]; b <= a; ++b) add(jac_cols[a], jac_cols[b]);
      }
    }
    for (int r = 0; r < P.m(); ++r) {
      if (eq_index[r] < 0) continue;
      for (int a = row_start_[r]; a < row_start_[r + 1]; ++a) add(n_ + eq_index[r], jac_cols[a]);
      add(n_ + eq_index[r], n_ + eq_index[r]);
    }
    std::sort(entries.begin(), entries.end());
    entries.erase(std::unique(entries.begin(), entries.end()), entries.end());

    K_.resize(dim_, dim_);
    std::vector<int> col_count(static_cast<std::size_t>(dim_), 0);
    for (const auto& e : entries) col_count[e.first]++;
    K_.reserve(col_count);
    for (const auto& e : entries) K_.insert(e.second, e.first) = 0.0;
    K_.makeCompressed();

    auto slot = [&](int u, int v) {
      int a = pos_[u], b = pos_[v];
      if (a < b) std::swap(a, b);
      const int* inner = K_.innerIndexPtr();
      const int* begin = inner + K_.outerIndexPtr()[b];
      const int* end = inner + K_.outerIndexPtr()[b + 1];
      const int* it = std::lower_bound(begin, end, a);
      return static_cast<int>(it - inner);
    };
    slot_hess_.resize(hr.size());
    for (std::size_t k = 0; k < hr.size(); ++k) slot_hess_[k] = slot(hr[k], hc[k]);
    slot_xdiag_.resize(static_cast<std::size_t>(n_));
    for (int j = 0; j < n_; ++j) slot_xdiag_[j] = slot(j, j);
    ineq_rows_ = ineq_rows;
    for (int r : ineq_rows) {
      for (int a = row_start_[r]; a < row_start_[r + 1]; ++a) {
        for (int b = row_start_[r]; b <= a; ++b) slot_pair_.push_back(slot(jac_cols[a], jac_cols[b]));
      }
    }
    slot_jE_.assign(jac_rows.size(), -1);
    slot_ediag_.assign(static_cast<std::size_t>(mE_), -1);
    for (int r = 0; r < P.m(); ++r) {
      if (eq_index[r] < 0) continue;
      for (int a = row_start_[r]; a < row_start_[r + 1]; ++a) {
        slot_jE_[a] = slot(n_ + eq_index[r], jac_cols[a]);
      }
      slot_ediag_[eq_index[r]] = slot(n_ + eq_index[r], n_ + eq_index[r]);
    }
    stage_ordering_ = stage_ordering;
    if (stage_ordering_) {
      nat_.analyzePattern(K_);
    } else {
      amd_.analyzePattern(K_);
    }
  }

  int dim() const { return dim_; }
  int n() const { return n_; }
  int mE() const { return mE_; }

  /// sigma_x: per primal diag; d_s: per inequality row (in ineq_rows order).
  void assemble(const std::vector<double>& hess, const Vec& sigma_x, const Vec& d_s,
                const std::vector<double>& jac, double delta_w, double delta_c) {
    double* v = K_.valuePtr();
    std::fill(v, v + K_.nonZeros(), 0.0);
    for (std::size_t k = 0; k < slot_hess_.size(); ++k) v[slot_hess_[k]] += hess[k];
    for (int j = 0; j < n_; ++j) v[slot_xdiag_[j]] += sigma_x[j] + delta_w;
    std::size_t q = 0;
    for (std::size_t i = 0; i < ineq_rows_.size(); ++i) {
      const int r = ineq_rows_[i];
      const double D = d_s[static_cast<Eigen::Index>(i)];
      for (int a = row_start_[r]; a < row_start_[r + 1]; ++a) {
        for (int b = row_start_[r]; b <= a; ++b) v[slot_pair_[q++]] += D * jac[a] * jac[b];
      }
    }
    for (std::size_t k = 0; k < slot_jE_.size(); ++k) {
      if (slot_jE_[k] >= 0) v[slot_jE_[k]] += jac[k];
    }
    for (int e = 0; e < mE_; ++e) v[slot_ediag_[e]] -= delta_c;
    delta_c_ = delta_c;
  }

  /// Returns (success, negative pivot count, zero pivot present).
  std::tuple<bool, int, bool> factorize() {
    Vec D;
    if (stage_ordering_) {
      nat_.factorize(K_);
      if (nat_.info() != Eigen::Success) return {false, 0, true};
      D = nat_.vectorD();
    } else {
      amd_.factorize(K_);
      if (amd_.info() != Eigen::Success) return {false, 0, true};
      D = amd_.vectorD();
    }
    int neg = 0;
    bool zero = false;
    double dmax = 0.0;
    for (Eigen::Index i = 0; i < D.size(); ++i) dmax = std::max(dmax, std::abs(D[i]));
    for (Eigen::Index i = 0; i < D.size(); ++i) {
      if (!std::isfinite(D[i])) return {false, 0, true};
      if (std::abs(D[i]) <= 1e-300 + 1e-20 * dmax) zero = true;
      if (D[i] < 0) ++neg;
    }
    return {true, neg, zero};
  }

  /// Solves the unregularized-in-E system (refining against the dual shift).
  Vec solve(const Vec& rhs, int refine) const {
    Vec b(dim_);
    for (int u = 0; u < dim_; ++u) b[pos_[u]] = rhs[u];
    Vec x = raw_solve(b);
    for (int it = 0; it < refine; ++it) {
      Vec r = b - apply(x);
      const double rn = r.lpNorm<Eigen::Infinity>();
      if (rn <= 1e-14 * std::max(1.0, b.lpNorm<Eigen::Infinity>())) break;
      x += raw_solve(r);
    }
    Vec out(dim_);
    for (int u = 0; u < dim_; ++u) out[u] = x[pos_[u]];
    return out;
  }

 private:
  Vec raw_solve(const Vec& b) const { return stage_ordering_ ? Vec(nat_.solve(b)) : Vec(amd_.solve(b)); }

  // K*x with the dual regularization removed (the system the step should satisfy).
  Vec apply(const Vec& x) const {
    Vec y = Vec::Zero(dim_);
    for (int c = 0; c < dim_; ++c) {
      for (SpMat::InnerIterator it(K_, c); it; ++it) {
        const int r = static_cast<int>(it.row());
        y[r] += it.value() * x[c];
        if (r != c) y[c] += it.value() * x[r];
      }
    }
    for (int e = 0; e < mE_; ++e) {
      // equality unknowns sit at permuted positions of n_ + e
      const int k = pos_[n_ + e];
      y[k] += delta_c_ * x[k];
    }
    return y;
  }

  int n_, mE_, dim_;
  std::vector<int> pos_;
  SpMat K_;
  std::vector<int> row_start_;
  std::vector<int> ineq_rows_;
  std::vector<int> slot_hess_, slot_xdiag_, slot_pair_, slot_jE_, slot_ediag_;
  double delta_c_ = 0.0;
  bool stage_ordering_ = true;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::NaturalOrdering<int>> nat_;
  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> amd_;
};

struct Filter {
  std::vector<std::pair<double, double>> entries;
  bool acceptable(double theta, double phi) const {
    for (const auto& [t, p] : entries) {
      if (theta >= t && phi >= p) return false;
    }
    return true;
  }
  void add(double theta, double phi) {
    std::vector<std::pair<double, double>> keep;
    for (const auto& e : entries) {
      if (!(e.first >= theta && e.second >= phi)) keep.push_back(e);
    }
    keep.emplace_back(theta, phi);
    entries = std::move(keep);
  }
};

class Solver {
 public:
  Solver(Problem& P, const IpmOptions& opt, double obj_scale)
      : P_(P), opt_(opt), sigma_(obj_scale), n_(P.n()), m_(P.m()) {}

  IpmResult run(const IpmStart* warm);

 private:
  // ---- problem data
  Problem& P_;
  IpmOptions opt_;
  double sigma_;
  int n_, m_;
  int mI_ = 0, mE_ = 0, np_ = 0;
  std::vector<int> eq_index_, ineq_index_, ineq_rows_, eq_rows_;
  std::vector<int> jac_rows_, jac_cols_, row_start_;
  std::vector<double> lo_, hi_;
  std::vector<char> hasL_, hasU_;
  std::vector<double> target_;  // equality right-hand side

  // ---- iterate
  Vec p_, y_, zL_, zU_;
  double mu_ = 0.1;
  double f_ = 0.0;
  std::vector<double> grad_, g_, jac_, hess_;

  // ---- helpers
  void setup();
  void init_point(const IpmStart* warm);
  void evaluate();  // all derivatives at p_
  void residual_c(const std::vector<double>& g, const Vec& p, Vec& cE, Vec& cI) const;
  double theta_of(const std::vector<double>& g, const Vec& p) const;
  double barrier(double f, const Vec& p) const;
  double objective_at(const Vec& p, std::vector<double>& g) const;
  void errors(double mu, double& dual, double& primal, double& compl_err, double& scaled) const;
  double max_step(const Vec& v, const Vec& dv, double tau) const;  // for primal p
  double max_step_z(const Vec& z, const Vec& dz, const std::vector<char>& has, double tau) const;

  Vec jt_times(const Vec& yv) const;  // J' y over x
};

void Solver::setup() {
  P_.finalize();
  eq_index_.assign(static_cast<std::size_t>(m_), -1);
  ineq_index_.assign(static_cast<std::size_t>(m_), -1);
  for (int r = 0; r < m_; ++r) {
    if (P_.g_lower()[r] == P_.g_upper()[r]) {
      eq_index_[r] = mE_++;
      eq_rows_.push_back(r);
    } else {
      ineq_index_[r] = mI_++;
      ineq_rows_.push_back(r);
    }
  }
  np_ = n_ + mI_;
  lo_.assign(static_cast<std::size_t>(np_), -kInf);
  hi_.assign(static_cast<std::size_t>(np_), kInf);
  hasL_.assign(static_cast<std::size_t>(np_), 0);
  hasU_.assign(static_cast<std::size_t>(np_), 0);
  auto set_bounds = [&](int k, double l, double u) {
    if (finite_bound(l)) {
      hasL_[k] = 1;
      lo_[k] = relaxed(l, opt_.bound_relax, -1);
    }
    if (finite_bound(u)) {
      hasU_[k] = 1;
      hi_[k] = relaxed(u, opt_.bound_relax, +1);
    }
  };
  for (int j = 0; j < n_; ++j) set_bounds(j, P_.x_lower()[j], P_.x_upper()[j]);
  for (int i = 0; i < mI_; ++i) {
    const int r = ineq_rows_[i];
    set_bounds(n_ + i, P_.g_lower()[r], P_.g_upper()[r]);
  }
  target_.assign(static_cast<std::size_t>(m_), 0.0);
  for (int r : eq_rows_) target_[r] = P_.g_lower()[r];

  P_.jacobian_structure(jac_rows_, jac_cols_);
  row_start_.assign(static_cast<std::size_t>(m_) + 1, 0);
  for (int r : jac_rows_) row_start_[r + 1]++;
  for (int r = 0; r < m_; ++r) row_start_[r + 1] += row_start_[r];

  grad_.assign(static_cast<std::size_t>(n_), 0.0);
  g_.assign(static_cast<std::size_t>(m_), 0.0);
  jac_.assign(jac_rows_.size(), 0.0);
  hess_.assign(static_cast<std::size_t>(P_.hessian_nnz()), 0.0);
}

void Solver::init_point(const IpmStart* warm) {
  const bool use_warm = warm != nullptr && static_cast<int>(warm->x.size()) == n_;
  const double push = use_warm ? opt_.warm_bound_push : opt_.bound_push;
  const double frac = use_warm ? opt_.warm_bound_push : opt_.bound_frac;
  auto project = [&](int k, double v) {
    const double l = lo_[k], u = hi_[k];
    if (hasL_[k] && hasU_[k]) {
      const double pl = std::min(push * std::max(1.0, std::abs(l)), frac * (u - l));
      const double pu = std::min(push * std::max(1.0, std::abs(u)), frac * (u - l));
      return std::clamp(v, l + pl, u - pu);
    }
    if (hasL_[k]) return std::max(v, l + push * std::max(1.0, std::abs(l)));
    if (hasU_[k]) return std::min(v, u - push * std::max(1.0, std::abs(u)));
    return v;
  };
  p_.resize(np_);
  const std::vector<double>& x0 = use_warm ? warm->x : P_.x_init();
  for (int j = 0; j < n_; ++j) p_[j] = project(j, x0[j]);
  std::vector<double> g(static_cast<std::size_t>(m_));
  P_.constraints(p_.data(), g.data());
  for (int i = 0; i < mI_; ++i) p_[n_ + i] = project(n_ + i, g[ineq_rows_[i]]);

  mu_ = use_warm ? opt_.warm_mu_init : opt_.mu_init;
  y_ = Vec::Zero(m_);
  zL_ = Vec::Zero(np_);
  zU_ = Vec::Zero(np_);
  if (use_warm && static_cast<int>(warm->y.size()) == m_) {
    for (int r = 0; r < m_; ++r) y_[r] = warm->y[r];
  }
  const bool warm_z = use_warm && static_cast<int>(warm->zL.size()) == n_ &&
                      static_cast<int>(warm->zU.size()) == n_;
  for (int k = 0; k < np_; ++k) {
    if (!use_warm) {
      if (hasL_[k]) zL_[k] = 1.0;
      if (hasU_[k]) zU_[k] = 1.0;
      continue;
    }
    double wl = 0.0, wu = 0.0;
    if (k < n_) {
      if (warm_z) {
        wl = warm->zL[k];
        wu = warm->zU[k];
      }
    } else {
      // Slack multipliers follow from stationarity in s: y = zU - zL.
      const double yr = y_[ineq_rows_[k - n_]];
      wl = std::max(-yr, 0.0);
      wu = std::max(yr, 0.0);
    }
    if (hasL_[k]) zL_[k] = std::max({wl, opt_.warm_mult_floor, mu_ / (p_[k] - lo_[k])});
    if (hasU_[k]) zU_[k] = std::max({wu, opt_.warm_mult_floor, mu_ / (hi_[k] - p_[k])});
    if (hasL_[k] && !hasU_[k] && wl == 0.0) zL_[k] = mu_ / (p_[k] - lo_[k]);
  }
}

void Solver::evaluate() {
  P_.evaluate_all(p_.data(), sigma_, y_.data(), f_, grad_.data(), g_.data(), jac_.data(), hess_.data());
  for (auto& v : grad_) v *= sigma_;
}

void Solver::residual_c(const std::vector<double>& g, const Vec& p, Vec& cE, Vec& cI) const {
  cE.resize(mE_);
  cI.resize(mI_);
  for (int e = 0; e < mE_; ++e) cE[e] = g[eq_rows_[e]] - target_[eq_rows_[e]];
  for (int i = 0; i < mI_; ++i) cI[i] = g[ineq_rows_[i]] - p[n_ + i];
}

double Solver::theta_of(const std::vector<double>& g, const Vec& p) const {
  double t = 0.0;
  for (int e = 0; e < mE_; ++e) t += std::abs(g[eq_rows_[e]] - target_[eq_rows_[e]]);
  for (int i = 0; i < mI_; ++i) t += std::abs(g[ineq_rows_[i]] - p[n_ + i]);
  return t;
}

double Solver::barrier(double f, const Vec& p) const {
  double phi = sigma_ * f;
  for (int k = 0; k < np_; ++k) {
    if (hasL_[k]) phi -= mu_ * std::log(p[k] - lo_[k]);
    if (hasU_[k]) phi -= mu_ * std::log(hi_[k] - p[k]);
  }
  return phi;
}

double Solver::objective_at(const Vec& p, std::vector<double>& g) const {
  P_.constraints(p.data(), g.data());
  return P_.objective(p.data());
}

Vec Solver::jt_times(const Vec& yv) const {
  Vec out = Vec::Zero(n_);
  for (std::size_t k = 0; k < jac_rows_.size(); ++k) out[jac_cols_[k]] += jac_[k] * yv[jac_rows_[k]];
  return out;
}

void Solver::errors(double mu, double& dual, double& primal, double& compl_err, double& scaled) const {
  Vec jy = jt_times(y_);
  dual = 0.0;
  for (int j = 0; j < n_; ++j) {
    dual = std::max(dual, std::abs(grad_[j] + jy[j] - zL_[j] + zU_[j]));
  }
  for (int i = 0; i < mI_; ++i) {
    const int k = n_ + i;
    dual = std::max(dual, std::abs(-y_[ineq_rows_[i]] - zL_[k] + zU_[k]));
  }
  primal = 0.0;
  for (int e = 0; e < mE_; ++e) primal = std::max(primal, std::abs(g_[eq_rows_[e]] - target_[eq_rows_[e]]));
  for (int i = 0; i < mI_; ++i) primal = std::max(primal, std::abs(g_[ineq_rows_[i]] - p_[n_ + i]));
  compl_err = 0.0;
  double zsum = 0.0;
  int nz = 0;
  for (int k = 0; k < np_; ++k) {
    if (hasL_[k]) {
      compl_err = std::max(compl_err, std::abs((p_[k] - lo_[k]) * zL_[k] - mu));
      zsum += zL_[k];
      ++nz;
    }
    if (hasU_[k]) {
      compl_err = std::max(compl_err, std::abs((hi_[k] - p_[k]) * zU_[k] - mu));
      zsum += zU_[k];
      ++nz;
    }
  }
  const double ysum = y_.lpNorm<1>();
  const double s_d = std::max(opt_.s_max, (ysum + zsum) / std::max(1, m_ + nz)) / opt_.s_max;
  const double s_c = std::max(opt_.s_max, zsum / std::max(1, nz)) / opt_.s_max;
  scaled = std::max({dual / s_d, primal, compl_err / s_c});
}

double Solver::max_step(const Vec& v, const Vec& dv, double tau) const {
  double a = 1.0;
  for (int k = 0; k < np_; ++k) {
    if (hasL_[k] && dv[k] < 0) a = std::min(a, -tau * (v[k] - lo_[k]) / dv[k]);
    if (hasU_[k] && dv[k] > 0) a = std::min(a, tau * (hi_[k] - v[k]) / dv[k]);
  }
  return a;
}

double Solver::max_step_z(const Vec& z, const Vec& dz, const std::vector<char>& has, double tau) const {
  double a = 1.0;
  for (int k = 0; k < np_; ++k) {
    if (has[k] && dz[k] < 0) a = std::min(a, -tau * z[k] / dz[k]);
  }
  return a;
}

IpmResult Solver::run(const IpmStart* warm) {
  const auto t0 = std::chrono::steady_clock::now();
  setup();
  init_point(warm);

  KktSystem kkt(P_, jac_rows_, jac_cols_, eq_index_, ineq_rows_, opt_.stage_ordering);

  IpmResult res;
  Filter filter;
  double delta_w_last = 0.0;
  double theta_max = 0.0, theta_min = 0.0;
  std::vector<double> g_trial(static_cast<std::size_t>(m_));

  constexpr double kGammaTheta = 1e-5, kGammaPhi = 1e-8, kDelta = 1.0, kSTheta = 1.1, kSPhi = 2.3,
                   kEtaPhi = 1e-8, kGammaAlpha = 0.05;

  int iter = 0;
  evaluate();
  theta_max = 1e4 * std::max(1.0, theta_of(g_, p_));
  theta_min = 1e-4 * std::max(1.0, theta_of(g_, p_));

  auto finish = [&](Status st, const std::string& msg) {
    double dual, primal, compl_err, scaled;
    errors(0.0, dual, primal, compl_err, scaled);
    res.status = st;
    res.message = msg;
    res.x.assign(p_.data(), p_.data() + n_);
    // Final primal is the interior iterate; clip the tiny bound relaxation away.
    for (int j = 0; j < n_; ++j) res.x[j] = std::clamp(res.x[j], P_.x_lower()[j], P_.x_upper()[j]);
    res.g.assign(static_cast<std::size_t>(m_), 0.0);
    P_.constraints(res.x.data(), res.g.data());
    res.objective = P_.objective(res.x.data());
    res.y.assign(y_.data(), y_.data() + m_);
    res.zL.assign(zL_.data(), zL_.data() + n_);
    res.zU.assign(zU_.data(), zU_.data() + n_);
    res.iterations = iter;
    res.dual_inf = dual / sigma_;
    res.primal_inf = primal;
    res.compl_inf = compl_err;
    res.kkt_error = scaled;
    res.mu = mu_;
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  };

  for (;; ++iter) {
    double dual, primal, compl0, scaled0;
    errors(0.0, dual, primal, compl0, scaled0);
    if (!std::isfinite(scaled0)) return finish(Status::NumericalError, "non-finite KKT error");
    if (opt_.print_level > 0) {
      std::fprintf(stderr, "%4d f=%.10e inf_pr=%.2e inf_du=%.2e compl=%.2e mu=%.1e\n", iter, f_, primal, dual,
                   compl0, mu_);
    }
    if (scaled0 <= opt_.tol && primal <= opt_.constr_viol_tol && compl0 <= opt_.compl_inf_tol) {
      return finish(Status::Optimal, "converged");
    }
    if (iter >= opt_.max_iter) return finish(Status::MaxIter, "iteration limit");

    // Barrier parameter update (monotone, possibly several times per iteration).
    for (;;) {
      double d, pr, cm, sc;
      errors(mu_, d, pr, cm, sc);
      const double mu_floor = opt_.tol / 10.0;
      if (sc > opt_.kappa_eps * mu_ || mu_ <= mu_floor) break;
      const double next = std::max(mu_floor, std::min(opt_.kappa_mu * mu_, std::pow(mu_, opt_.theta_mu)));
      if (next >= mu_) break;
      mu_ = next;
      filter.entries.clear();
    }
    const double tau = std::max(opt_.tau_min, 1.0 - mu_);

    // Diagonal blocks.
    Vec sigL = Vec::Zero(np_), sigU = Vec::Zero(np_);
    for (int k = 0; k < np_; ++k) {
      if (hasL_[k]) sigL[k] = zL_[k] / (p_[k] - lo_[k]);
      if (hasU_[k]) sigU[k] = zU_[k] / (hi_[k] - p_[k]);
    }
    Vec sigma_x = (sigL + sigU).head(n_);
    Vec sigma_s = (sigL + sigU).tail(mI_);

    // Barrier gradients and residuals.
    Vec bx(n_), bs(mI_);
    {
      Vec jy = jt_times(y_);
      for (int j = 0; j < n_; ++j) {
        double v = grad_[j] + jy[j];
        if (hasL_[j]) v -= mu_ / (p_[j] - lo_[j]);
        if (hasU_[j]) v += mu_ / (hi_[j] - p_[j]);
        bx[j] = v;
      }
      for (int i = 0; i < mI_; ++i) {
        const int k = n_ + i;
        double v = -y_[ineq_rows_[i]];
        if (hasL_[k]) v -= mu_ / (p_[k] - lo_[k]);
        if (hasU_[k]) v += mu_ / (hi_[k] - p_[k]);
        bs[i] = v;
      }
    }
    Vec cE, cI;
    residual_c(g_, p_, cE, cI);

    // Factorization with inertia correction.
    double delta_w = 0.0;
    double delta_c = opt_.delta_c;
    bool factored = false;
    for (int attempt = 0; attempt < 120; ++attempt) {
      Vec d_s = sigma_s.array() + delta_w;
      kkt.assemble(hess_, sigma_x, d_s, jac_, delta_w, delta_c);
      auto [ok, neg, zero] = kkt.factorize();
      if (ok && !zero && neg == mE_) {
        factored = true;
        break;
      }
      // Singular or rank-deficient equality block: a larger dual shift is
      // needed, since no primal shift can fix the count of negative pivots.
      if (zero && delta_c < 1e-8 * std::pow(mu_, 0.25)) {
        delta_c = 1e-8 * std::pow(mu_, 0.25);
        continue;
      }
      if (delta_w == 0.0) {
        delta_w = delta_w_last == 0.0 ? 1e-4 : std::max(1e-20, delta_w_last / 3.0);
      } else {
        delta_w *= delta_w_last == 0.0 ? 100.0 : 8.0;
      }
      if (delta_w > 1e10) {
        if (delta_c >= 1e-2) break;
        delta_c = std::min(1e-2, std::max(delta_c * 100.0, 1e-8));
        delta_w = 0.0;
      }
    }
    if (!factored) return finish(Status::NumericalError, "KKT factorization failed");
    if (delta_w > 0.0) delta_w_last = delta_w;
    const Vec D_s = sigma_s.array() + delta_w;

    // Direction for a given constraint residual (used again by second-order corrections).
    auto direction = [&](const Vec& cEv, const Vec& cIv, Vec& dp, Vec& dy) {
      Vec rhs(kkt.dim());
      Vec tI = D_s.cwiseProduct(cIv) + bs;  // per inequality row
      Vec rx = -bx;
      for (int i = 0; i < mI_; ++i) {
        const int r = ineq_rows_[i];
        for (int a = row_start_[r]; a < row_start_[r + 1]; ++a) rx[jac_cols_[a]] -= jac_[a] * tI[i];
      }
      rhs.head(n_) = rx;
      rhs.tail(mE_) = -cEv;
      Vec sol = kkt.solve(rhs, opt_.refine_steps);
      dp.resize(np_);
      dy.resize(m_);
      dp.head(n_) = sol.head(n_);
      for (int e = 0; e < mE_; ++e) dy[eq_rows_[e]] = sol[n_ + e];
      for (int i = 0; i < mI_; ++i) {
        const int r = ineq_rows_[i];
        double jd = 0.0;
        for (int a = row_start_[r]; a < row_start_[r + 1]; ++a) jd += jac_[a] * sol[jac_cols_[a]];
        const double ds = jd + cIv[i];
        dp[n_ + i] = ds;
        dy[r] = D_s[i] * ds + bs[i];
      }
    };

    Vec dp, dy;
    direction(cE, cI, dp, dy);
    if (!dp.allFinite() || !dy.allFinite()) return finish(Status::NumericalError, "non-finite step");

    Vec dzL = Vec::Zero(np_), dzU = Vec::Zero(np_);
    for (int k = 0; k < np_; ++k) {
      if (hasL_[k]) dzL[k] = mu_ / (p_[k] - lo_[k]) - zL_[k] - sigL[k] * dp[k];
      if (hasU_[k]) dzU[k] = mu_ / (hi_[k] - p_[k]) - zU_[k] + sigU[k] * dp[k];
    }

    const double alpha_max = max_step(p_, dp, tau);
    const double alpha_z = std::min(max_step_z(zL_, dzL, hasL_, tau), max_step_z(zU_, dzU, hasU_, tau));

    // Filter line search.
    const double theta = theta_of(g_, p_);
    const double phi = barrier(f_, p_);
    double gphi = 0.0;
    for (int j = 0; j < n_; ++j) gphi += grad_[j] * dp[j];
    for (int k = 0; k < np_; ++k) {
      if (hasL_[k]) gphi -= mu_ * dp[k] / (p_[k] - lo_[k]);
      if (hasU_[k]) gphi += mu_ * dp[k] / (hi_[k] - p_[k]);
    }
    double alpha_min = kGammaTheta;
    if (gphi < 0.0) {
      alpha_min = std::min({kGammaTheta, kGammaPhi * theta / (-gphi)});
      if (theta <= theta_min) alpha_min = std::min(alpha_min, kDelta * std::pow(theta, kSTheta) / std::pow(-gphi, kSPhi));
    }
    alpha_min *= kGammaAlpha;

    auto accept_test = [&](double alpha, double theta_t, double phi_t, bool& f_type) {
      f_type = false;
      if (!std::isfinite(phi_t) || theta_t > theta_max) return false;
      const bool switching = gphi < 0.0 && alpha * std::pow(-gphi, kSPhi) > kDelta * std::pow(theta, kSTheta);
      if (switching && theta <= theta_min) {
        if (phi_t <= phi + kEtaPhi * alpha * gphi) {
          f_type = true;
          return true;
        }
        return false;
      }
      if (!filter.acceptable(theta_t, phi_t)) return false;
      return theta_t <= (1.0 - kGammaTheta) * theta || phi_t <= phi - kGammaPhi * theta;
    };

    double alpha = alpha_max;
    bool accepted = false, f_type = false;
    Vec p_new;
    for (int trial = 0; alpha >= alpha_min || trial == 0; ++trial) {
      p_new = p_ + alpha * dp;
      const double f_t = objective_at(p_new, g_trial);
      const double theta_t = theta_of(g_trial, p_new);
      const double phi_t = barrier(f_t, p_new);
      if (accept_test(alpha, theta_t, phi_t, f_type)) {
        accepted = true;
        break;
      }
      if (trial == 0 && theta_t >= theta && opt_.max_soc > 0) {
        // Second-order correction on the full step.
        Vec cE_soc = alpha * cE, cI_soc = alpha * cI;
        Vec cEt, cIt;
        residual_c(g_trial, p_new, cEt, cIt);
        double theta_old = theta_t;
        for (int s = 0; s < opt_.max_soc; ++s) {
          cE_soc += cEt;
          cI_soc += cIt;
          Vec dp_soc, dy_soc;
          direction(cE_soc, cI_soc, dp_soc, dy_soc);
          const double a_soc = max_step(p_, dp_soc, tau);
          Vec p_soc = p_ + a_soc * dp_soc;
          const double f_s = objective_at(p_soc, g_trial);
          const double theta_s = theta_of(g_trial, p_soc);
          const double phi_s = barrier(f_s, p_soc);
          if (accept_test(alpha, theta_s, phi_s, f_type)) {
            accepted = true;
            p_new = p_soc;
            dy = dy_soc;
            // Bound multiplier steps follow the corrected direction.
            for (int k = 0; k < np_; ++k) {
              if (hasL_[k]) dzL[k] = mu_ / (p_[k] - lo_[k]) - zL_[k] - sigL[k] * dp_soc[k];
              if (hasU_[k]) dzU[k] = mu_ / (hi_[k] - p_[k]) - zU_[k] + sigU[k] * dp_soc[k];
            }
            alpha = a_soc;
            break;
          }
          if (theta_s > 0.99 * theta_old) break;
          theta_old = theta_s;
          cE_soc *= a_soc;
          cI_soc *= a_soc;
          residual_c(g_trial, p_soc, cEt, cIt);
        }
        if (accepted) break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      return finish(Status::Infeasible, "line search failed (no restoration phase)");
    }

    if (!f_type) filter.add((1.0 - kGammaTheta) * theta, phi - kGammaPhi * theta);

    const double az = std::min(alpha_z, 1.0);
    p_ = p_new;
    y_ += alpha * dy;
    zL_ += az * dzL;
    zU_ += az * dzU;
    // Keep the primal-dual products within a band around mu.
    for (int k = 0; k < np_; ++k) {
      if (hasL_[k]) {
        const double s = p_[k] - lo_[k];
        zL_[k] = std::clamp(zL_[k], mu_ / (opt_.kappa_sigma * s), opt_.kappa_sigma * mu_ / s);
      }
      if (hasU_[k]) {
        const double s = hi_[k] - p_[k];
        zU_[k] = std::clamp(zU_[k], mu_ / (opt_.kappa_sigma * s), opt_.kappa_sigma * mu_ / s);
      }
    }
    evaluate();
  }
}

}  // namespace

IpmResult solve_ipm(Problem& problem, const IpmOptions& opt, const IpmStart* warm, double obj_scale) {
  if (!(obj_scale > 0.0)) throw std::invalid_argument("solve_ipm: obj_scale must be positive");
  Solver s(problem, opt, obj_scale);
  return s.run(warm);
}

}  // namespace hvac::nlp
