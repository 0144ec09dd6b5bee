#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace p3dvd {

// Forward-mode scalar carrying a value and its partial derivatives with
// respect to N seed variables. Arithmetic propagates exact derivatives, so
// any loss written against this type yields analytic gradients.
template <std::size_t N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // constant, zero derivative

  static Dual seed(double value, std::size_t index) {
    Dual r(value);
    r.d[index] = 1.0;
    return r;
  }

  Dual operator-() const {
    Dual r(-v);
    for (std::size_t i = 0; i < N; ++i) r.d[i] = -d[i];
    return r;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }

  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }

  friend Dual operator*(const Dual& a, const Dual& b) {
    Dual r(a.v * b.v);
    for (std::size_t i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
  }

  friend Dual operator/(const Dual& a, const Dual& b) {
    Dual r(a.v / b.v);
    const double inv2 = 1.0 / (b.v * b.v);
    for (std::size_t i = 0; i < N; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv2;
    return r;
  }

  friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
  friend bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
  friend bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
  friend bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
};

template <std::size_t N>
Dual<N> chain(double fv, double dfdx, const Dual<N>& x) {
  Dual<N> r(fv);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = dfdx * x.d[i];
  return r;
}

template <std::size_t N>
Dual<N> sin(const Dual<N>& x) { return chain(std::sin(x.v), std::cos(x.v), x); }
template <std::size_t N>
Dual<N> cos(const Dual<N>& x) { return chain(std::cos(x.v), -std::sin(x.v), x); }
template <std::size_t N>
Dual<N> tan(const Dual<N>& x) {
  const double c = std::cos(x.v);
  return chain(std::tan(x.v), 1.0 / (c * c), x);
}
template <std::size_t N>
Dual<N> exp(const Dual<N>& x) {
  const double e = std::exp(x.v);
  return chain(e, e, x);
}
template <std::size_t N>
Dual<N> log(const Dual<N>& x) { return chain(std::log(x.v), 1.0 / x.v, x); }
template <std::size_t N>
Dual<N> sqrt(const Dual<N>& x) {
  const double s = std::sqrt(x.v);
  return chain(s, 0.5 / s, x);
}
template <std::size_t N>
Dual<N> abs(const Dual<N>& x) { return x.v < 0.0 ? -x : x; }
template <std::size_t N>
Dual<N> hypot(const Dual<N>& a, const Dual<N>& b) { return sqrt(a * a + b * b); }
template <std::size_t N>
Dual<N> min(const Dual<N>& a, const Dual<N>& b) { return a.v <= b.v ? a : b; }
template <std::size_t N>
Dual<N> max(const Dual<N>& a, const Dual<N>& b) { return a.v >= b.v ? a : b; }

// Pass-through shims so templated kernels accept plain doubles too.
using std::abs;
using std::cos;
using std::exp;
using std::hypot;
using std::log;
using std::max;
using std::min;
using std::sin;
using std::sqrt;
using std::tan;

template <std::size_t N>
double value_of(const Dual<N>& x) { return x.v; }
inline double value_of(double x) { return x; }

}  // namespace p3dvd
