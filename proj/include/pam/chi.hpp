/**
 * @file chi.hpp
 * @brief Monte-Carlo-free engine for the two-point covariance
 *        chi_t(x) = Cov[U(t,0), U(t,x)] and the variance of the box average.
 *
 * chi solves the renewal equation
 *   chi_t(x) = int_0^t A_t(s, x) ds + int_0^t ds int f(dy) p_{v}(y - (s/t) x) chi_s(y),
 * with v = 2 s (t - s)/t and A_t(s, x) = (p_v * f)((s/t) x).  Writing the
 * second integrand as A_t(s, x) R_t(s, x), R is an average of chi_s under
 * the probability measure f(dy) p_v(y - (s/t) x) / A_t(s, x).  R is smooth in
 * s while A carries the endpoint singularities, so the s-integral uses
 * product integration: A is integrated exactly against piecewise-linear hat
 * functions on a time grid graded towards s = 0, and R is interpolated
 * linearly between nodes.  The last node is implicit and solved in closed
 * form.  Isotropic models store chi on a radial grid.
 *
 * The spectral part V^(1) of Var(S_{N,t}) is reduced to one radial integral
 * int_0^infty H(w) Phi_d(w) dw against the Fejer spherical function.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/expint.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "pam/constants.hpp"
#include "pam/covariance.hpp"
#include "pam/fejer.hpp"
#include "pam/kernels.hpp"
#include "pam/parallel.hpp"
#include "pam/philox.hpp"
#include "pam/quadrature.hpp"

namespace pam {

/// The box-average overlap (I_N * I~_N)(x) = N^{-d} prod_j (1 - |x_j|/N)^+.
struct WindowFunction {
  int d = 1;
  double N = 1.0;

  WindowFunction(int dim, double size) : d(dim), N(size) {
    if (d < 1 || d > 3) throw DomainError("WindowFunction: dimension must be 1, 2 or 3");
    if (!(N > 0.0)) throw DomainError("WindowFunction: N must be positive");
  }
  double operator()(const Point& x) const {
    double v = std::pow(N, -d);
    for (double xi : x) v *= std::max(0.0, 1.0 - std::abs(xi) / N);
    return v;
  }
  double peak() const { return std::pow(N, -d); }
};

/// Discretization of the chi solve.
struct ChiGrid {
  int n_time = 48;       ///< Time levels s_i = t (i/n)^2, i = 1..n.
  int n_space = 96;      ///< Radial nodes r_k = core sinh(k h), k = 0..n_space-1.
  double r_max = 0.0;    ///< Truncation radius; 0 selects 8 sqrt(t).
  double core = 0.0;     ///< Resolution scale near r = 0; 0 selects sqrt(t)/2.
  int threads = parallel::default_threads();
};

/// chi_{s_i}(r_k) on a graded time grid and a radial space grid.
struct ChiTable {
  CovarianceModel model;
  double t = 0.0;
  std::vector<double> times;               ///< s_0 = 0 < s_1 < ... < s_n = t.
  std::vector<double> radii;               ///< r_0 = 0 < ... < r_max.
  std::vector<std::vector<double>> values;  ///< values[i][k] = chi_{s_i}(r_k).
  double core = 1.0;
  double step = 1.0;           ///< h in r_k = core sinh(k h).
  double decay_exponent = 1.0;  ///< Power-law extrapolation exponent beyond r_max.
  double reliable_radius = 0.0; ///< Radius up to which truncation leaves chi unaffected.
  double tail_fraction = 0.0;   ///< Largest extrapolated weight share inside reliable_radius.

  int dimension() const { return model.dimension; }
  double r_max() const { return radii.back(); }

  /// chi_{s_i}(r): linear interpolation in r, power-law decay beyond r_max.
  double at_level(std::size_t i, double r) const {
    const auto& v = values[i];
    r = std::abs(r);
    if (r >= radii.back()) return v.back() * std::pow(radii.back() / r, decay_exponent);
    const double u = std::asinh(r / core) / step;
    std::size_t k = std::min(static_cast<std::size_t>(u), radii.size() - 2);
    while (k > 0 && radii[k] > r) --k;
    while (k + 2 < radii.size() && radii[k + 1] < r) ++k;
    const double w = (r - radii[k]) / (radii[k + 1] - radii[k]);
    return (1.0 - w) * v[k] + w * v[k + 1];
  }

  /// chi_t(r) at the final time.
  double operator()(double r) const { return at_level(times.size() - 1, r); }

  /// chi_s(r) for an off-node time: linear interpolation between levels.
  double interpolate(double s, double r) const {
    if (!(s >= 0.0 && s <= t)) throw DomainError("ChiTable::interpolate: time outside [0, t]");
    const auto it = std::upper_bound(times.begin(), times.end(), s);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(it - times.begin()), times.size() - 1);
    if (i == 0) return at_level(0, r);
    const double w = (s - times[i - 1]) / (times[i] - times[i - 1]);
    return (1.0 - w) * at_level(i - 1, r) + w * at_level(i, r);
  }
};

namespace chi {

namespace detail {

constexpr double kPi = std::numbers::pi;

/// e^{-z} I_0(z) for z >= 0.
inline double bessel_i0_scaled(double z) {
  if (z < 600.0) return boost::math::cyl_bessel_i(0, z) * std::exp(-z);
  // Hankel expansion: (2 pi z)^{-1/2} sum_k ((2k-1)!!)^2 / (k! (8z)^k).
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 8; ++k) {
    term *= (2.0 * k - 1.0) * (2.0 * k - 1.0) / (k * 8.0 * z);
    sum += term;
  }
  return sum / std::sqrt(2.0 * kPi * z);
}

/**
 * Radial kernel K with int_{R^d} g(|y|) p_v(y - c e) dy = int_0^infty g(r) K(r) dr
 * for a unit vector e; it includes the Jacobian r^{d-1}.
 */
inline double radial_bridge_kernel(int d, double r, double c, double v) {
  const double g = std::exp(-(r - c) * (r - c) / (2.0 * v));
  if (d == 1) return (g + std::exp(-(r + c) * (r + c) / (2.0 * v))) / std::sqrt(2.0 * kPi * v);
  const double z = r * c / v;
  if (d == 2) return r / v * g * bessel_i0_scaled(z);
  const double sh = z < 1e-8 ? 1.0 - z : -std::expm1(-2.0 * z) / (2.0 * z);
  return r * r * 4.0 * kPi * std::pow(2.0 * kPi * v, -1.5) * g * sh;
}

/// A_t(s, rho) = (p_v * f)((s/t) rho) with v = 2 s (t - s)/t.
inline double source_density(const CovarianceModel& m, double t, double s, double rho) {
  const double v = 2.0 * s * (t - s) / t;
  if (!(v > 0.0)) return 0.0;
  return covariance::smoothed_covariance_radial(m, v, (s / t) * rho);
}

/// Result of one radial average: the f p_v mass, the chi-weighted mass and
/// the share of the mass lying beyond the table radius.
struct RadialAverage {
  double mass = 0.0;
  double weighted = 0.0;
  double tail = 0.0;
};

/// int f(r) K(r) {1, chi_{s_j}(r)} dr by panel Gauss-Legendre around the bump of K.
inline RadialAverage radial_average(const CovarianceModel& m, const ChiTable& tab, std::size_t j, double c,
                                    double v) {
  const int d = m.dimension;
  const double sd = std::sqrt(v);
  RadialAverage out;
  const double r_max = tab.r_max();
  auto add = [&](double r, double w) {
    const double fk = w * covariance::radial_density(m, r) * radial_bridge_kernel(d, r, c, v);
    out.mass += fk;
    out.weighted += fk * tab.at_level(j, r);
    if (r > r_max) out.tail += fk;
  };
  const auto& gl = boost::math::quadrature::gauss<double, 20>::abscissa();
  const auto& gw = boost::math::quadrature::gauss<double, 20>::weights();
  auto panel = [&](auto&& map, double a, double b) {
    const double h = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (std::size_t q = 0; q < gl.size(); ++q) {
      const double w = gw[q] * h;
      map(mid + h * gl[q], w);
      if (gl[q] != 0.0) map(mid - h * gl[q], w);
    }
  };
  if (c > 12.0 * sd) {
    auto direct = [&](double r, double w) { add(r, w); };
    const double e[4] = {c - 12.0 * sd, c - 4.0 * sd, c + 4.0 * sd, c + 12.0 * sd};
    for (int p = 0; p < 3; ++p) panel(direct, e[p], e[p + 1]);
  } else {
    // r = B y^q removes the r^{d-1-beta} behaviour of f K at the origin.
    const double B = c + 12.0 * sd;
    const double q = m.kind == CovarianceKind::RieszKernel ? 1.0 / (d - m.riesz_exponent) : 1.0;
    auto mapped = [&](double y, double w) {
      if (y <= 0.0) return;
      add(B * std::pow(y, q), w * B * q * std::pow(y, q - 1.0));
    };
    for (int p = 0; p < 4; ++p) panel(mapped, 0.25 * p, 0.25 * (p + 1));
  }
  out.tail = out.mass > 0.0 ? out.tail / out.mass : 0.0;
  return out;
}

/// Hat-function weights W_j = int_0^{t_i} A(s) hat_j(s) ds on nodes s_0..s_i.
inline std::vector<double> product_weights(const CovarianceModel& m, const std::vector<double>& s, std::size_t i,
                                           double rho) {
  const double ti = s[i];
  std::vector<double> W(i + 1, 0.0);
  auto A = [&](double x) { return source_density(m, ti, x, rho); };
  const auto& gl = boost::math::quadrature::gauss<double, 20>::abscissa();
  const auto& gw = boost::math::quadrature::gauss<double, 20>::weights();
  for (std::size_t p = 0; p < i; ++p) {
    const double a = s[p], b = s[p + 1], h = b - a;
    double I0 = 0.0, I1 = 0.0;
    if (p == 0 || p + 1 == i) {
      I0 = quad::tanh_sinh(A, a, b, 1e-10, "chi product weight");
      I1 = quad::tanh_sinh([&](double x) { return A(x) * (x - a) / h; }, a, b, 1e-10, "chi product weight");
    } else {
      const double hh = 0.5 * h, mid = 0.5 * (a + b);
      for (std::size_t q = 0; q < gl.size(); ++q) {
        for (int sg : {1, -1}) {
          if (sg < 0 && gl[q] == 0.0) continue;
          const double x = mid + sg * hh * gl[q];
          const double val = gw[q] * hh * A(x);
          I0 += val;
          I1 += val * (x - a) / h;
        }
      }
    }
    W[p] += I0 - I1;
    W[p + 1] += I1;
  }
  return W;
}

}  // namespace detail

/**
 * Solves the chi renewal equation on [0, t] and returns chi_{s_i}(r_k).
 * Requires Dalang's condition and either white noise (d = 1) or an x-space
 * density for f.  Throws NumericalError with node diagnostics when the
 * implicit end-point coefficient leaves (0, 1).
 */
inline ChiTable solve_chi(const CovarianceModel& m, double t, ChiGrid grid = {}) {
  if (!(t > 0.0)) throw DomainError("solve_chi: t must be positive");
  if (!covariance::dalang_satisfied(m))
    throw UnsupportedRegimeError("solve_chi: Dalang's condition Upsilon(1) < infinity fails");
  const bool white = m.kind == CovarianceKind::WhiteNoise;
  if (m.kind == CovarianceKind::TabulatedFinite && !m.radial_density)
    throw DomainError("solve_chi: tabulated model needs an x-space density for the f(dy) integral");
  if (grid.n_time < 2 || grid.n_space < 4) throw DomainError("solve_chi: need n_time >= 2 and n_space >= 4");
  if (m.spectral_atom_at_zero > 0.0)
    throw DomainError("solve_chi: a spectral atom at zero has no x-space density");

  ChiTable tab;
  tab.model = m;
  tab.t = t;
  tab.core = grid.core > 0.0 ? grid.core : 0.5 * std::sqrt(t);
  const double r_max = grid.r_max > 0.0 ? grid.r_max : 8.0 * std::sqrt(t);
  tab.step = std::asinh(r_max / tab.core) / (grid.n_space - 1);
  for (int k = 0; k < grid.n_space; ++k) tab.radii.push_back(tab.core * std::sinh(k * tab.step));
  tab.radii.back() = r_max;
  for (int i = 0; i <= grid.n_time; ++i) tab.times.push_back(t * std::pow(static_cast<double>(i) / grid.n_time, 2));
  tab.decay_exponent = m.kind == CovarianceKind::RieszKernel ? std::min(1.0, m.riesz_exponent) : 1.0;
  tab.reliable_radius = white ? r_max : std::max(0.0, r_max - 12.0 * std::sqrt(0.5 * t));
  tab.values.assign(1, std::vector<double>(grid.n_space, 0.0));

  const std::size_t K = tab.radii.size();
  std::vector<double> tail(K, 0.0);
  for (std::size_t i = 1; i < tab.times.size(); ++i) {
    const double ti = tab.times[i];
    std::vector<double> level(K, 0.0);
    auto solve_node = [&](std::size_t k, double chi_origin) {
      const double rho = tab.radii[k];
      const auto W = detail::product_weights(m, tab.times, i, rho);
      double src = 0.0;
      for (double w : W) src += w;
      double acc = src;
      for (std::size_t j = 1; j < i; ++j) {
        double R;
        if (white) {
          R = tab.values[j][0];
        } else {
          const double sj = tab.times[j];
          const auto avg = detail::radial_average(m, tab, j, (sj / ti) * rho, 2.0 * sj * (ti - sj) / ti);
          R = avg.mass > 0.0 ? avg.weighted / avg.mass : tab.at_level(j, (sj / ti) * rho);
          if (rho <= tab.reliable_radius) tail[k] = std::max(tail[k], avg.tail);
        }
        acc += W[j] * R;
      }
      if (white && k > 0) return acc + W[i] * chi_origin;
      const double denom = 1.0 - W[i];
      if (!(denom > 0.0))
        throw NumericalError("solve_chi: implicit end-point weight " + std::to_string(W[i]) + " >= 1 at level " +
                             std::to_string(i) + " (s = " + std::to_string(ti) + "), radius " +
                             std::to_string(rho) + "; refine n_time");
      return acc / denom;
    };
    std::size_t first = 0;
    if (white) {
      level[0] = solve_node(0, 0.0);
      first = 1;
    }
    const double origin = level[0];
    parallel::for_each_index(K - first, grid.threads,
                             [&](std::size_t idx) { level[idx + first] = solve_node(idx + first, origin); });
    for (double v : level)
      if (!std::isfinite(v)) throw NumericalError("solve_chi: non-finite value at level " + std::to_string(i));
    tab.values.push_back(std::move(level));
  }
  tab.tail_fraction = *std::max_element(tail.begin(), tail.end());
  return tab;
}

/// Doubles n_time and n_space until chi_t(0) changes by less than rel_tol.
inline ChiTable solve_chi_refined(const CovarianceModel& m, double t, ChiGrid grid = {}, double rel_tol = 0.005,
                                  int max_doublings = 3) {
  ChiTable prev = solve_chi(m, t, grid);
  for (int it = 0; it < max_doublings; ++it) {
    grid.n_time *= 2;
    grid.n_space *= 2;
    ChiTable next = solve_chi(m, t, grid);
    const double change = std::abs(next(0.0) - prev(0.0)) / std::max(next(0.0), 1e-300);
    prev = std::move(next);
    if (change < rel_tol) break;
  }
  return prev;
}

/// The source term int_0^t (p_{2s(t-s)/t} * f)((s/t) rho) ds, a lower bound for chi_t(rho).
inline double source_term(const CovarianceModel& m, double t, double rho) {
  auto A = [&](double s) { return detail::source_density(m, t, s, rho); };
  return quad::tanh_sinh(A, 0.0, 0.5 * t, 1e-11, "chi source term") +
         quad::tanh_sinh(A, 0.5 * t, t, 1e-11, "chi source term");
}

/**
 * Var(S_{N,t}) = int (I_N * I~_N)(x) chi_t(|x|) dx by tensor Gauss-Legendre
 * over the positive orthant of [0, N]^d.  Requires N sqrt(d) <= the table's
 * reliable radius.
 */
inline double variance_from_chi(const ChiTable& tab, double N) {
  if (!(N > 0.0)) throw DomainError("variance_from_chi: N must be positive");
  const int d = tab.dimension();
  if (N * std::sqrt(static_cast<double>(d)) > tab.reliable_radius * (1.0 + 1e-12))
    throw DomainError("variance_from_chi: window N = " + std::to_string(N) + " exceeds the table radius " +
                      std::to_string(tab.reliable_radius));
  // Panels follow the table's node spacing so linear interpolation is integrated accurately.
  std::vector<double> edges{0.0};
  for (double r : tab.radii)
    if (r > 0.0 && r < N) edges.push_back(r);
  edges.push_back(N);
  const auto& gl = boost::math::quadrature::gauss<double, 20>::abscissa();
  const auto& gw = boost::math::quadrature::gauss<double, 20>::weights();
  std::vector<double> x, w;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double h = 0.5 * (edges[p + 1] - edges[p]), mid = 0.5 * (edges[p] + edges[p + 1]);
    for (std::size_t q = 0; q < gl.size(); ++q) {
      x.push_back(mid + h * gl[q]);
      w.push_back(gw[q] * h);
      if (gl[q] != 0.0) {
        x.push_back(mid - h * gl[q]);
        w.push_back(gw[q] * h);
      }
    }
  }
  std::vector<double> tri(x.size());
  for (std::size_t a = 0; a < x.size(); ++a) tri[a] = w[a] * (1.0 - x[a] / N) / N;
  double s = 0.0;
  if (d == 1) {
    for (std::size_t a = 0; a < x.size(); ++a) s += tri[a] * tab(x[a]);
    return 2.0 * s;
  }
  if (d == 2) {
    for (std::size_t a = 0; a < x.size(); ++a)
      for (std::size_t b = 0; b < x.size(); ++b) s += tri[a] * tri[b] * tab(std::hypot(x[a], x[b]));
    return 4.0 * s;
  }
  for (std::size_t a = 0; a < x.size(); ++a)
    for (std::size_t b = 0; b < x.size(); ++b)
      for (std::size_t c = 0; c < x.size(); ++c)
        s += tri[a] * tri[b] * tri[c] * tab(std::sqrt(x[a] * x[a] + x[b] * x[b] + x[c] * x[c]));
  return 8.0 * s;
}

namespace detail {

/**
 * G_beta(c) = int_0^1 u^{-beta} exp(-c (1-u)/u) du = e^c c^{1-beta} Gamma(beta-1, c).
 * Small c uses incomplete-gamma closed forms; large c the asymptotic series
 * (1/c) sum_k (beta-2)(beta-3)...(beta-1-k) c^{-k}.
 */
inline double power_time_factor(double beta, double c) {
  if (c > 40.0) {
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 60; ++k) {
      const double next = term * (beta - 1.0 - k) / c;
      if (std::abs(next) >= std::abs(term)) break;
      term = next;
      sum += term;
      if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum / c;
  }
  if (c <= 0.0) {
    if (beta < 1.0) return 1.0 / (1.0 - beta);
    return std::numeric_limits<double>::infinity();
  }
  if (beta == 1.0) return std::exp(c) * boost::math::expint(1, c);
  if (beta < 1.0)
    return (1.0 - std::exp(c) * std::pow(c, 1.0 - beta) * boost::math::tgamma(beta, c)) / (1.0 - beta);
  return std::exp(c) * std::pow(c, 1.0 - beta) * boost::math::tgamma(beta - 1.0, c);
}

}  // namespace detail

/**
 * H(w) with V^(1)_N(t) = int_0^infty H(w) Phi_d(w) dw, obtained from
 *   V^(1) = (t/(N pi^d)) int_0^N ds int f^(dz) e^{-t|z|^2 (1-s/N) s/N} prod phi(z_j s)
 * by the substitution w = s z, u = s/N:
 *   H(w) = (t/pi^d) w^{d-1} N^{-d} int_0^1 u^{-d} g(w/(N u)) e^{-c(1-u)/u} du,  c = t w^2/N^2,
 * where g is the radial spectral density.  Power-law densities kappa rho^{beta-d}
 * (Riesz, and white noise in d = 1 with beta = 1) give the closed form
 *   H(w) = (t kappa/pi^d) N^{-beta} w^{beta-1} G_beta(c).
 */
inline std::function<double(double)> v1_radial_integrand(const CovarianceModel& m, double t, double N) {
  const int d = m.dimension;
  const double pid = std::pow(std::numbers::pi, d);
  if (m.kind == CovarianceKind::RieszKernel || (m.kind == CovarianceKind::WhiteNoise && d == 1)) {
    const double beta = m.kind == CovarianceKind::RieszKernel ? m.riesz_exponent : 1.0;
    const double kappa = m.kind == CovarianceKind::RieszKernel ? m.riesz_constant : m.mass;
    const double pre = t * kappa / pid * std::pow(N, -beta);
    return [=](double w) {
      if (!(w > 0.0)) return 0.0;
      return pre * std::pow(w, beta - 1.0) * detail::power_time_factor(beta, t * w * w / (N * N));
    };
  }
  if (m.kind == CovarianceKind::WhiteNoise)
    throw UnsupportedRegimeError("v1_spectral: white noise violates Dalang's condition for d >= 2");
  const double pre = t / pid * std::pow(N, -d);
  if (m.kind == CovarianceKind::GaussianKernel) {
    // u = e^{-y}: int_0^infty e^{(d-1) y} exp(-a^2 e^{2y}/2 - t a^2 (e^y - 1)) dy, a = w/N.
    return [=](double w) {
      if (!(w > 0.0)) return 0.0;
      const double a = w / N;
      auto f = [&](double y) {
        const double e = std::exp(y);
        return std::exp((d - 1) * y - 0.5 * a * a * e * e - t * a * a * (e - 1.0));
      };
      const double y_hi = std::max(0.0, -std::log(a)) + 4.0;
      const int panels = static_cast<int>(std::ceil(y_hi / 0.5));
      return pre * std::pow(w, d - 1) * quad::panel_gauss(f, 0.0, y_hi, panels);
    };
  }
  return [=](double w) {
    if (!(w > 0.0)) return 0.0;
    const double a = w / N;
    auto f = [&](double y) {
      const double e = std::exp(y);
      const double g = m.radial_spectral(a * e);
      return g == 0.0 ? 0.0 : std::exp((d - 1) * y - t * a * a * (e - 1.0)) * g;
    };
    return pre * std::pow(w, d - 1) * quad::half_line(f, 0.0, 1e-10, "v1 radial integrand");
  };
}

/**
 * int_0^infty H(w) Phi_d(w) dw for H smooth beyond the exact Fejer range.
 * Beyond w_a the asymptote 2d pi^{d-1} (1 - cos w)/w^{d+1} splits into a
 * non-oscillating part, integrated on a logarithmic scale to infinity, and an
 * oscillating part integrated by panels of width pi over 2000 periods.
 */
inline double fejer_integral(const std::function<double(double)>& H, int d) {
  const double w_a = d == 1 ? 0.5 * std::numbers::pi : fejer::exact_limit(d);
  double s = fejer::integrate_against(H, d, 0.0);
  const double C = 2.0 * d * std::pow(std::numbers::pi, d - 1);
  auto smooth = [&](double y) {
    const double w = w_a * std::exp(y);
    if (!std::isfinite(w) || w > 1e250) return 0.0;
    return H(w) * std::pow(w, -d);
  };
  s += C * quad::half_line(smooth, 0.0, 1e-11, "fejer tail");
  auto osc = [&](double w) { return H(w) * std::cos(w) * std::pow(w, -(d + 1)); };
  const int panels = 4000;
  for (int i = 0; i < panels; ++i)
    s -= C * quad::gauss20(osc, w_a + i * std::numbers::pi, w_a + (i + 1) * std::numbers::pi);
  return s;
}

/// V^(1)_N(t), the dominant spectral part of Var(S_{N,t}).
inline double v1_spectral(const CovarianceModel& m, double t, double N) {
  if (!(t > 0.0 && N > 0.0)) throw DomainError("v1_spectral: t and N must be positive");
  if (!covariance::dalang_satisfied(m))
    throw UnsupportedRegimeError("v1_spectral: Dalang's condition Upsilon(1) < infinity fails");
  const double v = fejer_integral(v1_radial_integrand(m, t, N), m.dimension);
  // An atom of f^ at 0 contributes (t/(N pi^d)) N atom 2^{-d}.
  const double atom = t * m.spectral_atom_at_zero / std::pow(2.0 * std::numbers::pi, m.dimension);
  if (!std::isfinite(v) || v < 0.0) throw NumericalError("v1_spectral: quadrature failed");
  return v + atom;
}

/// One row of the asymptotic comparison.
struct AsymptoticRow {
  double N = 0.0;
  double v1 = 0.0;             ///< v1_spectral.
  double full = std::numeric_limits<double>::quiet_NaN();  ///< variance_from_chi when a table covers N.
  double rescaled = 0.0;       ///< v1 / (N^{-exponent} (log N)^{log_power}).
  double predicted = 0.0;      ///< Predicted limit constant.
  double relative_gap = 0.0;   ///< rescaled / predicted - 1.
  std::string rate;
  std::string regime;
};

/// Rescaled V^(1) (and chi-based variance when `table` covers N) against the predicted constant.
inline std::vector<AsymptoticRow> asymptotic_check(const CovarianceModel& m, double t, const std::vector<double>& Ns,
                                                   const ChiTable* table = nullptr) {
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    if (!(Ns[i] >= std::numbers::e)) throw DomainError("asymptotic_check: every N must be at least e");
    if (i > 0 && !(Ns[i] > Ns[i - 1])) throw DomainError("asymptotic_check: N list must be increasing");
  }
  std::vector<AsymptoticRow> rows;
  for (double N : Ns) {
    const auto p = constants::predicted_variance(m, t, N);
    AsymptoticRow r;
    r.N = N;
    r.v1 = v1_spectral(m, t, N);
    if (table && N * std::sqrt(1.0 * m.dimension) <= table->reliable_radius) r.full = variance_from_chi(*table, N);
    const double scale = std::pow(N, -p.exponent) * (p.log_power ? std::log(N) : 1.0);
    r.rescaled = r.v1 / scale;
    r.predicted = p.constant();
    r.relative_gap = r.rescaled / r.predicted - 1.0;
    r.rate = constants::rate_name(p.leading_rate);
    r.regime = p.regime;
    rows.push_back(r);
  }
  return rows;
}

/**
 * x-space side of the window identity:
 *   int (I_N * I~_N)(x) (f * p_{2s(t-s)/t})((s/t) x + w) dx.
 */
inline double window_overlap_xspace(const CovarianceModel& m, double s, double t, double N, const Point& w) {
  const int d = m.dimension;
  if (!(s > 0.0 && s < t && N > 0.0)) throw DomainError("window_overlap_xspace: need 0 < s < t and N > 0");
  if (static_cast<int>(w.size()) != d || d > 2) throw DomainError("window_overlap_xspace: d must be 1 or 2");
  const double v = 2.0 * s * (t - s) / t;
  const double scale = std::sqrt(v) * t / s;  // Variation length of the smoothed covariance in x.
  const int panels = std::clamp(static_cast<int>(std::ceil(2.0 * N / scale)), 2, 400);
  const double h = N / panels;
  const auto& gl = boost::math::quadrature::gauss<double, 20>::abscissa();
  const auto& gw = boost::math::quadrature::gauss<double, 20>::weights();
  std::vector<double> x, wt;
  for (int side : {-1, 1})
    for (int p = 0; p < panels; ++p) {
      const double mid = side * (p + 0.5) * h;
      for (std::size_t q = 0; q < gl.size(); ++q)
        for (int sg : {1, -1}) {
          if (sg < 0 && gl[q] == 0.0) continue;
          const double xi = mid + sg * 0.5 * h * gl[q];
          x.push_back(xi);
          wt.push_back(gw[q] * 0.5 * h * (1.0 - std::abs(xi) / N) / N);
        }
    }
  double acc = 0.0;
  if (d == 1) {
    for (std::size_t a = 0; a < x.size(); ++a)
      acc += wt[a] * covariance::smoothed_covariance_radial(m, v, std::abs(s / t * x[a] + w[0]));
    return acc;
  }
  for (std::size_t a = 0; a < x.size(); ++a)
    for (std::size_t b = 0; b < x.size(); ++b)
      acc += wt[a] * wt[b] *
             covariance::smoothed_covariance_radial(m, v, std::hypot(s / t * x[a] + w[0], s / t * x[b] + w[1]));
  return acc;
}

/**
 * Spectral side of the window identity:
 *   pi^{-d} int e^{-s(t-s)|z|^2/t} prod_j phi(N z_j s/t) e^{i z.w} f^(dz),
 * for models whose spectral density decays at least like a Gaussian.
 */
inline double window_overlap_spectral(const CovarianceModel& m, double s, double t, double N, const Point& w) {
  const int d = m.dimension;
  if (!(s > 0.0 && s < t && N > 0.0)) throw DomainError("window_overlap_spectral: need 0 < s < t and N > 0");
  if (static_cast<int>(w.size()) != d || d > 2) throw DomainError("window_overlap_spectral: d must be 1 or 2");
  if (m.kind != CovarianceKind::GaussianKernel)
    throw DomainError("window_overlap_spectral: implemented for the Gaussian kernel");
  const double a = s * (t - s) / t + 0.5;  // Gaussian exponent including f^ = e^{-|z|^2/2}.
  const double Z = std::sqrt(46.0 / a);
  double wmax = 0.0;
  for (double wi : w) wmax = std::max(wmax, std::abs(wi));
  const double osc = std::max(N * s / t, wmax);
  const int panels = std::clamp(static_cast<int>(std::ceil(Z * std::max(osc, 1.0) / 1.5)), 4, 4000);
  const double h = 2.0 * Z / panels;
  auto axis = [&](double z, double wi) {
    return std::exp(-a * z * z) * kernels::fejer_factor(N * z * s / t) * std::cos(z * wi);
  };
  if (d == 1) {
    double acc = 0.0;
    for (int p = 0; p < panels; ++p)
      acc += quad::gauss20([&](double z) { return axis(z, w[0]); }, -Z + p * h, -Z + (p + 1) * h);
    return acc / std::numbers::pi;
  }
  // Gaussian weight and Fejer factor separate; the odd sine parts cancel, leaving cos(z1 w1) cos(z2 w2).
  double I1 = 0.0, I2 = 0.0;
  for (int p = 0; p < panels; ++p) {
    I1 += quad::gauss20([&](double z) { return axis(z, w[0]); }, -Z + p * h, -Z + (p + 1) * h);
    I2 += quad::gauss20([&](double z) { return axis(z, w[1]); }, -Z + p * h, -Z + (p + 1) * h);
  }
  return I1 * I2 / (std::numbers::pi * std::numbers::pi);
}

/// Monte Carlo estimate of E|sqrt(s) Z + y|^{-beta} with its standard error.
struct MonteCarloValue {
  double mean = 0.0;
  double se = 0.0;
};

inline MonteCarloValue gaussian_riesz_moment_mc(int d, double beta, double s, double y_norm, int samples,
                                                std::uint64_t seed, std::uint32_t stream = 0) {
  if (samples < 2) throw DomainError("gaussian_riesz_moment_mc: need at least two samples");
  rng::NormalStream g(seed, stream, 0, rng::Purpose::Calibration);
  const double rs = std::sqrt(s);
  double mean = 0.0, m2 = 0.0;
  for (int n = 1; n <= samples; ++n) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double c = rs * g.normal() + (a == 0 ? y_norm : 0.0);
      r2 += c * c;
    }
    const double x = std::pow(r2, -0.5 * beta);
    const double delta = x - mean;
    mean += delta / n;
    m2 += delta * (x - mean);
  }
  return {mean, std::sqrt(m2 / (samples - 1) / samples)};
}

/// The comparison scale min(s^{-beta/2}, |y|^{-beta}) of the Gaussian Riesz moment.
inline double gaussian_riesz_scale(double beta, double s, double y_norm) {
  return std::min(std::pow(s, -0.5 * beta), y_norm > 0.0 ? std::pow(y_norm, -beta) : std::numeric_limits<double>::infinity());
}

/// int_0^1 lambda^{-beta/2} min(alpha^beta (1-lambda)^{-beta/2}, lambda^{-beta/2}) d lambda.
inline double lambda_min_integral(double alpha, double beta) {
  if (!(alpha > 0.0 && beta >= 1.0 && beta < 2.0)) throw DomainError("lambda_min_integral: need alpha > 0, 1 <= beta < 2");
  const double cut = 1.0 / (1.0 + alpha * alpha);
  auto left = [&](double l) { return std::pow(alpha, beta) * std::pow(l * (1.0 - l), -0.5 * beta); };
  // Second piece in closed form: int_cut^1 lambda^{-beta} d lambda.
  const double right = beta == 1.0 ? -std::log(cut) : (std::pow(cut, 1.0 - beta) - 1.0) / (beta - 1.0);
  return quad::tanh_sinh(left, 0.0, cut, 1e-12, "lambda integral") + right;
}

/// The piecewise asymptote of lambda_min_integral: alpha (or alpha^beta) below 1,
/// log alpha (or alpha^{2 beta - 2}) from 1 on.
inline double lambda_min_asymptote(double alpha, double beta) {
  if (beta == 1.0) return alpha < 1.0 ? alpha : std::log(alpha);
  return alpha < 1.0 ? std::pow(alpha, beta) : std::pow(alpha, 2.0 * beta - 2.0);
}

}  // namespace chi
}  // namespace pam
