/**
 * @file fejer.hpp
 * @brief Spherical integrals of the Fejer product prod_j phi(w theta_j).
 *
 * Phi_d(w) = int_{S^{d-1}} prod_j phi(w theta_j) dOmega is the angular
 * reduction of every isotropic spectral integral of the form
 * int f^(dz) h(|z|) prod_j phi(c z_j).  Large-w values come from the axis
 * asymptote 2d pi^{d-1} phi(w) / w^{d-1}, which is exact for d = 1.
 */
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <mutex>
#include <numbers>
#include <vector>

#include "pam/kernels.hpp"
#include "pam/quadrature.hpp"

namespace pam::fejer {

/// Surface area of the unit sphere S^{d-1}.
inline double sphere_area(int d) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

/// Axis asymptote of Phi_d(w) for large w.
inline double sphere_asymptote(double w, int d) {
  using kernels::fejer_factor;
  return 2.0 * d * std::pow(std::numbers::pi, d - 1) * fejer_factor(w) / std::pow(w, d - 1);
}

/// Phi_d(w) by panel Gauss-Legendre quadrature over the sphere.
inline double sphere_product(double w, int d) {
  using kernels::fejer_factor;
  if (d == 1) return 2.0 * fejer_factor(w);
  if (d == 2) {
    // 8-fold symmetry: theta in [0, pi/4].
    const int panels = 2 + static_cast<int>(std::ceil(w / 4.0));
    auto g = [w](double th) { return fejer_factor(w * std::cos(th)) * fejer_factor(w * std::sin(th)); };
    return 8.0 * quad::panel_gauss(g, 0.0, 0.25 * std::numbers::pi, panels);
  }
  if (d == 3) {
    // Positive octant, polar angle th from the third axis, azimuth ph.
    const int panels = 2 + static_cast<int>(std::ceil(w / 2.0));
    auto inner = [w, panels](double ph) {
      const double cp = std::cos(ph), sp = std::sin(ph);
      auto g = [w, cp, sp](double th) {
        const double st = std::sin(th), ct = std::cos(th);
        return st * fejer_factor(w * st * cp) * fejer_factor(w * st * sp) * fejer_factor(w * ct);
      };
      return quad::panel_gauss(g, 0.0, 0.5 * std::numbers::pi, panels);
    };
    return 8.0 * quad::panel_gauss(inner, 0.0, 0.5 * std::numbers::pi, panels);
  }
  throw DomainError("sphere_product: dimension must be 1, 2 or 3");
}

/// Crossover point beyond which the asymptote replaces exact quadrature.
inline double exact_limit(int d) {
  switch (d) {
    case 1: return 0.0;
    case 2: return 256.0;
    default: return 48.0;
  }
}

/// Quadrature node set on [0, exact_limit(d)] carrying weight * Phi_d(w).
struct NodeTable {
  std::vector<double> w;
  std::vector<double> wphi;
};

namespace detail {
inline constexpr double kPanel = 0.5 * std::numbers::pi;

inline NodeTable build_table(int d) {
  NodeTable tab;
  const double w0 = exact_limit(d);
  if (w0 <= 0.0) return tab;
  const auto& xs = boost::math::quadrature::gauss<double, 20>::abscissa();
  const auto& ws = boost::math::quadrature::gauss<double, 20>::weights();
  auto add_panel = [&](double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double signs[2] = {1.0, -1.0};
      for (double sg : signs) {
        if (xs[i] == 0.0 && sg < 0) continue;
        const double x = c + sg * h * xs[i];
        tab.w.push_back(x);
        tab.wphi.push_back(h * ws[i] * sphere_product(x, d));
      }
    }
  };
  double hi = kPanel;
  for (int k = 0; k < 200; ++k) {
    add_panel(0.5 * hi, hi);
    hi *= 0.5;
  }
  const int n = static_cast<int>(std::ceil((w0 - kPanel) / kPanel));
  for (int i = 0; i < n; ++i) add_panel(kPanel * (1 + i), kPanel * (2 + i));
  return tab;
}
}  // namespace detail

/// Cached node table for dimension d (built once, thread-safe).
inline const NodeTable& table(int d) {
  static std::array<NodeTable, 4> tabs;
  static std::array<std::once_flag, 4> flags;
  if (d < 1 || d > 3) throw DomainError("fejer table: dimension must be 1, 2 or 3");
  std::call_once(flags[d], [d] { tabs[d] = detail::build_table(d); });
  return tabs[d];
}

/// int_0^infty H(w) Phi_d(w) dw.  H may carry an integrable power
/// singularity at w = 0 and must be negligible beyond w_max.
inline double integrate_against(const std::function<double(double)>& H, int d, double w_max) {
  using kernels::fejer_factor;
  const NodeTable& tab = table(d);
  double s = 0.0;
  for (std::size_t i = 0; i < tab.w.size(); ++i) s += tab.wphi[i] * H(tab.w[i]);
  double a = exact_limit(d);
  if (a == 0.0) {
    auto g = [&](double w) { return H(w) * sphere_asymptote(w, d); };
    s += quad::graded_from_zero(g, detail::kPanel, 200);
    a = detail::kPanel;
  }
  if (w_max > a) {
    auto g = [&](double w) { return H(w) * sphere_asymptote(w, d); };
    const int n = static_cast<int>(std::ceil((w_max - a) / detail::kPanel));
    for (int i = 0; i < n; ++i) s += quad::gauss20(g, a + i * detail::kPanel, a + (i + 1) * detail::kPanel);
  }
  return s;
}

/// Fejer moment int_0^infty w^alpha Phi_d(w) dw for -1 < alpha < d.
inline double moment(double alpha, int d) {
  if (!(alpha > -1.0 && alpha < d)) throw DomainError("fejer moment: need -1 < alpha < d");
  const double w_max = 2.0e5;
  const double v = integrate_against([alpha](double w) { return std::pow(w, alpha); }, d, w_max);
  // Non-oscillating part of the asymptote beyond w_max.
  const double c = 2.0 * d * std::pow(std::numbers::pi, d - 1);
  return v + c * std::pow(w_max, alpha - d) / (d - alpha);
}

}  // namespace pam::fejer
