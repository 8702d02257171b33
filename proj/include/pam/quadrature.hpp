/**
 * @file quadrature.hpp
 * @brief Thin adapters over Boost.Math quadrature used by every module.
 *
 * Panel Gauss-Legendre rules are used for oscillatory integrands whose
 * oscillation scale is known in advance; adaptive Boost rules handle
 * endpoint singularities and semi-infinite ranges.
 */
#pragma once

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "pam/errors.hpp"

namespace pam::quad {

/// Fixed 20-point Gauss-Legendre rule on [a,b].
template <class F>
double gauss20(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
}

/// Fixed 30-point Gauss-Legendre rule on [a,b].
template <class F>
double gauss30(F&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 30>::integrate(f, a, b);
}

/// Sum of `panels` equal-width 20-point Gauss-Legendre panels on [a,b].
template <class F>
double panel_gauss(F&& f, double a, double b, int panels) {
  double s = 0.0;
  const double h = (b - a) / panels;
  for (int i = 0; i < panels; ++i) s += gauss20(f, a + i * h, a + (i + 1) * h);
  return s;
}

/// Integral over [0,b] of a function with an integrable power singularity
/// at 0: geometric panels [b 2^{-k-1}, b 2^{-k}], k < levels, each with 20
/// nodes.  The neglected piece [0, b 2^{-levels}] is below double precision
/// for singularities weaker than x^{-0.75} at the default depth.
template <class F>
double graded_from_zero(F&& f, double b, int levels = 120) {
  double s = 0.0;
  double hi = b;
  for (int k = 0; k < levels; ++k) {
    const double lo = 0.5 * hi;
    s += gauss20(f, lo, hi);
    hi = lo;
  }
  return s;
}

/// Adaptive Gauss-Kronrod on a finite interval; throws on failure.
template <class F>
double adaptive(F&& f, double a, double b, double rel_tol = 1e-10, const char* what = "quadrature") {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, rel_tol, &err);
  if (!std::isfinite(v)) throw NumericalError(std::string(what) + ": non-finite result");
  if (err > 1e3 * rel_tol * std::max(std::abs(v), 1e-300) && err > 1e-14)
    throw NumericalError(std::string(what) + ": error estimate " + std::to_string(err) +
                         " exceeds tolerance for value " + std::to_string(v));
  return v;
}

/// Tanh-sinh on a finite interval; tolerates endpoint singularities.
template <class F>
double tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-10, const char* what = "quadrature") {
  static thread_local boost::math::quadrature::tanh_sinh<double> integrator;
  double err = 0.0;
  const double v = integrator.integrate(f, a, b, rel_tol, &err);
  if (!std::isfinite(v)) throw NumericalError(std::string(what) + ": non-finite result");
  return v;
}

/// Exp-sinh on [a, infinity).
template <class F>
double half_line(F&& f, double a = 0.0, double rel_tol = 1e-10, const char* what = "quadrature") {
  static thread_local boost::math::quadrature::exp_sinh<double> integrator;
  double err = 0.0;
  const double v = integrator.integrate(f, a, std::numeric_limits<double>::infinity(), rel_tol, &err);
  if (!std::isfinite(v)) throw NumericalError(std::string(what) + ": non-finite result");
  return v;
}

}  // namespace pam::quad
