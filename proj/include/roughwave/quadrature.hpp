#pragma once

// Small wrappers over Boost.Math integrators used by frachilbert, noise and
// chaos. Every routine reports an error estimate alongside the value.

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace roughwave::quad {

struct Estimate {
  double value = 0.0;
  double error = 0.0;

  Estimate& operator+=(const Estimate& o) {
    value += o.value;
    error += o.error;
    return *this;
  }
};

inline Estimate operator+(Estimate a, const Estimate& b) { return a += b; }
inline Estimate operator*(double s, Estimate e) { return {s * e.value, std::abs(s) * e.error}; }

// Non-adaptive 15-point Kronrod rule on one panel (Gauss 7-point difference
// as the error).
template <class F>
Estimate gk15(F&& f, double a, double b) {
  double err = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, &err);
  return {v, err};
}

// Uniform panels no longer than max_len.
template <class F>
Estimate panels(F&& f, double a, double b, double max_len) {
  Estimate total;
  if (!(b > a)) return total;
  int n = std::max(1, static_cast<int>(std::ceil((b - a) / max_len)));
  double h = (b - a) / n;
  for (int i = 0; i < n; ++i) {
    double lo = a + i * h;
    double hi = (i + 1 == n) ? b : lo + h;
    total += gk15(f, lo, hi);
  }
  return total;
}

// Geometrically growing panels [a, a*ratio, a*ratio^2, ..., b]; a > 0.
template <class F>
Estimate geometric_panels(F&& f, double a, double b, double ratio = 2.0) {
  Estimate total;
  double lo = a;
  while (lo < b) {
    double hi = std::min(b, lo * ratio);
    total += gk15(f, lo, hi);
    lo = hi;
  }
  return total;
}

// Double-exponential rule for endpoint singularities. f may take (x) or
// (x, xc) where xc is Boost's complement distance to the nearer endpoint.
// Nested integrals must pass distinct depths: each depth owns its integrator.
template <class F>
Estimate tanh_sinh(F&& f, double a, double b, double tol = 1e-11, int depth = 0) {
  if (!(b > a)) return {};
  thread_local boost::math::quadrature::tanh_sinh<double> integrators[4] = {
      boost::math::quadrature::tanh_sinh<double>(15), boost::math::quadrature::tanh_sinh<double>(12),
      boost::math::quadrature::tanh_sinh<double>(10), boost::math::quadrature::tanh_sinh<double>(10)};
  double err = 0.0;
  double l1 = 0.0;
  double v = integrators[std::clamp(depth, 0, 3)].integrate(f, a, b, tol, &err, &l1);
  return {v, err};
}

}  // namespace roughwave::quad
