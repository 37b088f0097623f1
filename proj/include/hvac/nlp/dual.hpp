#pragma once

#include <array>
#include <cmath>

namespace hvac::nlp {

/// Second-order forward-mode number over K local variables: value, gradient
/// and the packed lower triangle of the Hessian (entry (i, j), i >= j, at
/// i*(i+1)/2 + j). The four arithmetic operations and sqrt are provided.
template <int K>
struct Dual2 {
  static constexpr int kPacked = K * (K + 1) / 2;

  double v = 0.0;
  std::array<double, K> g{};
  std::array<double, kPacked> h{};

  Dual2() = default;
  Dual2(double c) : v(c) {}  // NOLINT(google-explicit-constructor)

  static Dual2 variable(double x, int i) {
    Dual2 d(x);
    d.g[i] = 1.0;
    return d;
  }

  static constexpr int packed(int i, int j) { return i >= j ? i * (i + 1) / 2 + j : j * (j + 1) / 2 + i; }

  Dual2& operator+=(const Dual2& o) {
    v += o.v;
    for (int i = 0; i < K; ++i) g[i] += o.g[i];
    for (int i = 0; i < kPacked; ++i) h[i] += o.h[i];
    return *this;
  }
  Dual2& operator-=(const Dual2& o) {
    v -= o.v;
    for (int i = 0; i < K; ++i) g[i] -= o.g[i];
    for (int i = 0; i < kPacked; ++i) h[i] -= o.h[i];
    return *this;
  }
  Dual2& operator*=(double c) {
    v *= c;
    for (int i = 0; i < K; ++i) g[i] *= c;
    for (int i = 0; i < kPacked; ++i) h[i] *= c;
    return *this;
  }
};

template <int K>
Dual2<K> operator-(Dual2<K> a) {
  a *= -1.0;
  return a;
}

template <int K>
Dual2<K> operator+(Dual2<K> a, const Dual2<K>& b) {
  a += b;
  return a;
}
template <int K>
Dual2<K> operator+(Dual2<K> a, double c) {
  a.v += c;
  return a;
}
template <int K>
Dual2<K> operator+(double c, Dual2<K> a) {
  a.v += c;
  return a;
}

template <int K>
Dual2<K> operator-(Dual2<K> a, const Dual2<K>& b) {
  a -= b;
  return a;
}
template <int K>
Dual2<K> operator-(Dual2<K> a, double c) {
  a.v -= c;
  return a;
}
template <int K>
Dual2<K> operator-(double c, Dual2<K> a) {
  a *= -1.0;
  a.v += c;
  return a;
}

template <int K>
Dual2<K> operator*(const Dual2<K>& a, const Dual2<K>& b) {
  Dual2<K> r;
  r.v = a.v * b.v;
  for (int i = 0; i < K; ++i) r.g[i] = a.v * b.g[i] + b.v * a.g[i];
  for (int i = 0, k = 0; i < K; ++i) {
    for (int j = 0; j <= i; ++j, ++k) {
      r.h[k] = a.v * b.h[k] + b.v * a.h[k] + a.g[i] * b.g[j] + a.g[j] * b.g[i];
    }
  }
  return r;
}
template <int K>
Dual2<K> operator*(Dual2<K> a, double c) {
  a *= c;
  return a;
}
template <int K>
Dual2<K> operator*(double c, Dual2<K> a) {
  a *= c;
  return a;
}

/// 1 / b
template <int K>
Dual2<K> reciprocal(const Dual2<K>& b) {
  Dual2<K> r;
  const double inv = 1.0 / b.v;
  const double inv2 = inv * inv;
  r.v = inv;
  for (int i = 0; i < K; ++i) r.g[i] = -b.g[i] * inv2;
  for (int i = 0, k = 0; i < K; ++i) {
    for (int j = 0; j <= i; ++j, ++k) {
      r.h[k] = -b.h[k] * inv2 + 2.0 * b.g[i] * b.g[j] * inv2 * inv;
    }
  }
  return r;
}

template <int K>
Dual2<K> operator/(const Dual2<K>& a, const Dual2<K>& b) {
  return a * reciprocal(b);
}
template <int K>
Dual2<K> operator/(Dual2<K> a, double c) {
  a *= 1.0 / c;
  return a;
}
template <int K>
Dual2<K> operator/(double c, const Dual2<K>& b) {
  return c * reciprocal(b);
}

/// f(a) given f, f' and f'' at a.v.
template <int K>
Dual2<K> chain(const Dual2<K>& a, double f, double f1, double f2) {
  Dual2<K> r;
  r.v = f;
  for (int i = 0; i < K; ++i) r.g[i] = f1 * a.g[i];
  for (int i = 0, k = 0; i < K; ++i) {
    for (int j = 0; j <= i; ++j, ++k) r.h[k] = f1 * a.h[k] + f2 * a.g[i] * a.g[j];
  }
  return r;
}

template <int K>
Dual2<K> sqrt(const Dual2<K>& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

}  // namespace hvac::nlp
