/**
 * @file kernels.hpp
 * @brief Gaussian heat kernel, Brownian-bridge kernel and the Fejer factor.
 *
 * The heat kernel is that of the generator Laplacian/2:
 *   p_t(x) = (2 pi t)^{-d/2} exp(-|x|^2 / (2t)).
 * All functions are pure and may be called concurrently.
 */
#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "pam/errors.hpp"

namespace pam {

/// A point of R^d, d in {1,2,3}.
using Point = std::vector<double>;

/// Squared Euclidean norm.
inline double norm2(const Point& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

inline double norm(const Point& x) { return std::sqrt(norm2(x)); }

namespace kernels {

/// log p_t at a point with squared norm r2 in dimension d.
inline double log_heat_kernel_r2(double t, double r2, int d) {
  if (!(t > 0.0)) throw DomainError("heat_kernel: time must be positive");
  return -0.5 * d * std::log(2.0 * std::numbers::pi * t) - r2 / (2.0 * t);
}

/// p_t at a point with squared norm r2 in dimension d.
inline double heat_kernel_r2(double t, double r2, int d) {
  return std::exp(log_heat_kernel_r2(t, r2, d));
}

/// log p_t(x).
inline double log_heat_kernel(double t, const Point& x) {
  return log_heat_kernel_r2(t, norm2(x), static_cast<int>(x.size()));
}

/// p_t(x) = (2 pi t)^{-d/2} exp(-|x|^2/(2t)), evaluated through its logarithm.
inline double heat_kernel(double t, const Point& x) { return std::exp(log_heat_kernel(t, x)); }

/// Bridge kernel p_{s(t-s)/t}(y - (s/t) x) for 0 < s < t.
inline double bridge_kernel(double s, double t, const Point& x, const Point& y) {
  if (!(s > 0.0 && s < t)) throw DomainError("bridge_kernel: requires 0 < s < t");
  if (x.size() != y.size()) throw DomainError("bridge_kernel: dimension mismatch");
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = y[i] - (s / t) * x[i];
    r2 += z * z;
  }
  return heat_kernel_r2(s * (t - s) / t, r2, static_cast<int>(x.size()));
}

/// Fejer factor phi(y) = (1 - cos y)/y^2 with phi(0) = 1/2.
inline double fejer_factor(double y) {
  const double a = std::abs(y);
  if (a < 1e-4) {
    const double y2 = y * y;
    return 0.5 - y2 / 24.0 + y2 * y2 / 720.0;
  }
  // 1 - cos y = 2 sin^2(y/2) avoids cancellation for moderate y.
  const double s = std::sin(0.5 * y);
  return 2.0 * s * s / (y * y);
}

}  // namespace kernels
}  // namespace pam
