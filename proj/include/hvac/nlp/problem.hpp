#pragma once

#include <array>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "hvac/nlp/dual.hpp"

namespace hvac::nlp {

inline constexpr double kInf = 1e20;

inline bool finite_bound(double b) { return b > -1e19 && b < 1e19; }

/// Sparse NLP assembled from small dense elements:
///
///   min  sum_e f_e(x_e)   s.t.   lo_r <= g_r(x_r) <= hi_r,   xl <= x <= xu
///
/// Each element is a generic callable taking `const S*` over its own local
/// variable list, where S is either double or Dual2<K>; exact first and second
/// derivatives follow from one forward pass.
class Problem {
 public:
  struct Element {
    std::vector<int> vars;
    std::function<double(const double*)> value;
    std::function<void(const double*, double&, double*, double*)> derivs;  // v, g[K], packed h
    int row = -1;  // -1 for objective terms
    std::vector<int> hess_slot;  // packed local index -> global Hessian nonzero
  };

  int add_variable(double lo, double hi, double x0, int stage = 0) {
    if (lo > hi) throw std::invalid_argument("variable bounds crossed");
    xl_.push_back(lo);
    xu_.push_back(hi);
    x0_.push_back(x0);
    var_stage_.push_back(stage);
    finalized_ = false;
    return static_cast<int>(xl_.size()) - 1;
  }

  template <int K, typename F>
  void add_objective(const std::array<int, K>& vars, F f) {
    elements_.push_back(make_element<K>(vars, std::move(f), -1));
    finalized_ = false;
  }

  /// Adds lo <= g(x) <= hi. lo == hi makes an equality row.
  template <int K, typename F>
  int add_constraint(const std::array<int, K>& vars, double lo, double hi, F f, int stage = 0,
                     std::string tag = {}) {
    if (lo > hi) throw std::invalid_argument("constraint bounds crossed");
    const int r = static_cast<int>(gl_.size());
    gl_.push_back(lo);
    gu_.push_back(hi);
    row_stage_.push_back(stage);
    row_tag_.push_back(std::move(tag));
    row_element_.push_back(static_cast<int>(elements_.size()));
    elements_.push_back(make_element<K>(vars, std::move(f), r));
    finalized_ = false;
    return r;
  }

  int n() const { return static_cast<int>(xl_.size()); }
  int m() const { return static_cast<int>(gl_.size()); }

  const std::vector<double>& x_lower() const { return xl_; }
  const std::vector<double>& x_upper() const { return xu_; }
  const std::vector<double>& x_init() const { return x0_; }
  std::vector<double>& x_init() { return x0_; }
  std::vector<double>& x_lower() { return xl_; }
  std::vector<double>& x_upper() { return xu_; }
  const std::vector<double>& g_lower() const { return gl_; }
  const std::vector<double>& g_upper() const { return gu_; }
  const std::vector<int>& var_stage() const { return var_stage_; }
  const std::vector<int>& row_stage() const { return row_stage_; }
  const std::string& row_tag(int r) const { return row_tag_[r]; }
  const std::vector<int>& row_vars(int r) const { return elements_[row_element_[r]].vars; }

  double objective(const double* x) const;
  void constraints(const double* x, double* g) const;
  void gradient(const double* x, double* grad) const;

  /// Jacobian nonzeros are stored row by row in the order of each row's variable list.
  int jacobian_nnz() const;
  void jacobian(const double* x, double* values) const;
  void jacobian_structure(std::vector<int>& rows, std::vector<int>& cols) const;

  /// Lower triangle (row >= col) of  obj_factor * Hess f + sum_r lambda_r Hess g_r.
  void finalize();
  int hessian_nnz() const { return static_cast<int>(hess_rows_.size()); }
  const std::vector<int>& hessian_rows() const { return hess_rows_; }
  const std::vector<int>& hessian_cols() const { return hess_cols_; }
  void hessian(const double* x, double obj_factor, const double* lambda, double* values) const;

  /// One pass evaluating f, grad f, g, Jacobian and the Lagrangian Hessian.
  void evaluate_all(const double* x, double obj_factor, const double* lambda, double& f, double* grad,
                    double* g, double* jac, double* hess) const;

 private:
  template <int K, typename F>
  static Element make_element(const std::array<int, K>& vars, F f, int row) {
    for (int a = 0; a < K; ++a) {
      for (int b = 0; b < a; ++b) {
        if (vars[a] == vars[b]) throw std::invalid_argument("element lists a variable twice");
      }
    }
    Element e;
    e.vars.assign(vars.begin(), vars.end());
    e.row = row;
    e.value = [f](const double* x) -> double { return static_cast<double>(f(x)); };
    e.derivs = [f](const double* x, double& v, double* g, double* h) {
      std::array<Dual2<K>, K> ad;
      for (int i = 0; i < K; ++i) ad[i] = Dual2<K>::variable(x[i], i);
      const Dual2<K> r = f(static_cast<const Dual2<K>*>(ad.data()));
      v = r.v;
      for (int i = 0; i < K; ++i) g[i] = r.g[i];
      for (int i = 0; i < Dual2<K>::kPacked; ++i) h[i] = r.h[i];
    };
    return e;
  }

  std::vector<double> xl_, xu_, x0_;
  std::vector<int> var_stage_;
  std::vector<double> gl_, gu_;
  std::vector<int> row_stage_;
  std::vector<std::string> row_tag_;
  std::vector<int> row_element_;
  std::vector<Element> elements_;

  bool finalized_ = false;
  std::vector<int> hess_rows_, hess_cols_;
  std::vector<int> jac_offset_;  // per row
};

}  // namespace hvac::nlp
