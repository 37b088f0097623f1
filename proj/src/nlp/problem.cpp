#include "hvac/nlp/problem.hpp"

#include <algorithm>
#include <map>
#include <utility>

namespace hvac::nlp {

namespace {
constexpr int kMaxLocal = 16;
constexpr int kMaxPacked = kMaxLocal * (kMaxLocal + 1) / 2;

struct Local {
  std::array<double, kMaxLocal> x{};
  std::array<double, kMaxLocal> g{};
  std::array<double, kMaxPacked> h{};
};

void gather(const Problem::Element& e, const double* x, Local& L) {
  if (e.vars.size() > static_cast<std::size_t>(kMaxLocal)) {
    throw std::length_error("element has too many local variables");
  }
  for (std::size_t i = 0; i < e.vars.size(); ++i) L.x[i] = x[e.vars[i]];
}
}  // namespace

double Problem::objective(const double* x) const {
  Local L;
  double f = 0.0;
  for (const auto& e : elements_) {
    if (e.row >= 0) continue;
    gather(e, x, L);
    f += e.value(L.x.data());
  }
  return f;
}

void Problem::constraints(const double* x, double* g) const {
  Local L;
  for (const auto& e : elements_) {
    if (e.row < 0) continue;
    gather(e, x, L);
    g[e.row] = e.value(L.x.data());
  }
}

void Problem::gradient(const double* x, double* grad) const {
  std::fill(grad, grad + n(), 0.0);
  Local L;
  double v;
  for (const auto& e : elements_) {
    if (e.row >= 0) continue;
    gather(e, x, L);
    e.derivs(L.x.data(), v, L.g.data(), L.h.data());
    for (std::size_t i = 0; i < e.vars.size(); ++i) grad[e.vars[i]] += L.g[i];
  }
}

int Problem::jacobian_nnz() const {
  int nnz = 0;
  for (int r = 0; r < m(); ++r) nnz += static_cast<int>(elements_[row_element_[r]].vars.size());
  return nnz;
}

void Problem::jacobian_structure(std::vector<int>& rows, std::vector<int>& cols) const {
  rows.clear();
  cols.clear();
  for (int r = 0; r < m(); ++r) {
    for (int v : elements_[row_element_[r]].vars) {
      rows.push_back(r);
      cols.push_back(v);
    }
  }
}

void Problem::jacobian(const double* x, double* values) const {
  Local L;
  double v;
  int k = 0;
  for (int r = 0; r < m(); ++r) {
    const auto& e = elements_[row_element_[r]];
    gather(e, x, L);
    e.derivs(L.x.data(), v, L.g.data(), L.h.data());
    for (std::size_t i = 0; i < e.vars.size(); ++i) values[k++] = L.g[i];
  }
}

void Problem::finalize() {
  if (finalized_) return;
  std::map<std::pair<int, int>, int> slot;
  for (auto& e : elements_) {
    const int K = static_cast<int>(e.vars.size());
    for (int a = 0; a < K; ++a) {
      for (int b = 0; b <= a; ++b) {
        const int i = std::max(e.vars[a], e.vars[b]);
        const int j = std::min(e.vars[a], e.vars[b]);
        slot.emplace(std::make_pair(j, i), 0);  // keyed column-major for a CSC-friendly order
      }
    }
  }
  hess_rows_.clear();
  hess_cols_.clear();
  int idx = 0;
  for (auto& [key, value] : slot) {
    value = idx++;
    hess_cols_.push_back(key.first);
    hess_rows_.push_back(key.second);
  }
  for (auto& e : elements_) {
    const int K = static_cast<int>(e.vars.size());
    e.hess_slot.assign(static_cast<std::size_t>(K * (K + 1) / 2), -1);
    for (int a = 0, k = 0; a < K; ++a) {
      for (int b = 0; b <= a; ++b, ++k) {
        const int i = std::max(e.vars[a], e.vars[b]);
        const int j = std::min(e.vars[a], e.vars[b]);
        e.hess_slot[k] = slot.at(std::make_pair(j, i));
      }
    }
  }
  jac_offset_.assign(static_cast<std::size_t>(m()), 0);
  int off = 0;
  for (int r = 0; r < m(); ++r) {
    jac_offset_[r] = off;
    off += static_cast<int>(elements_[row_element_[r]].vars.size());
  }
  finalized_ = true;
}

void Problem::hessian(const double* x, double obj_factor, const double* lambda, double* values) const {
  if (!finalized_) throw std::logic_error("Problem::hessian called before finalize()");
  std::fill(values, values + hessian_nnz(), 0.0);
  Local L;
  double v;
  for (const auto& e : elements_) {
    const double w = e.row < 0 ? obj_factor : lambda[e.row];
    if (w == 0.0) continue;
    gather(e, x, L);
    e.derivs(L.x.data(), v, L.g.data(), L.h.data());
    const int K = static_cast<int>(e.vars.size());
    const int P = K * (K + 1) / 2;
    for (int k = 0; k < P; ++k) values[e.hess_slot[k]] += w * L.h[k];
  }
}

void Problem::evaluate_all(const double* x, double obj_factor, const double* lambda, double& f,
                           double* grad, double* g, double* jac, double* hess) const {
  if (!finalized_) throw std::logic_error("Problem::evaluate_all called before finalize()");
  f = 0.0;
  std::fill(grad, grad + n(), 0.0);
  std::fill(hess, hess + hessian_nnz(), 0.0);
  Local L;
  double v;
  for (const auto& e : elements_) {
    gather(e, x, L);
    e.derivs(L.x.data(), v, L.g.data(), L.h.data());
    const int K = static_cast<int>(e.vars.size());
    double w;
    if (e.row < 0) {
      f += v;
      for (int i = 0; i < K; ++i) grad[e.vars[i]] += L.g[i];
      w = obj_factor;
    } else {
      g[e.row] = v;
      double* jr = jac + jac_offset_[e.row];
      for (int i = 0; i < K; ++i) jr[i] = L.g[i];
      w = lambda[e.row];
    }
    if (w == 0.0) continue;
    const int P = K * (K + 1) / 2;
    for (int k = 0; k < P; ++k) hess[e.hess_slot[k]] += w * L.h[k];
  }
}

}  // namespace hvac::nlp
