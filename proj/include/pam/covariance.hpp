/**
 * @file covariance.hpp
 * @brief Spatial covariance measures f, their spectral measures f^, and the
 *        functionals built from them (Upsilon, R(f), smoothed covariance).
 *
 * Fourier convention: f^(xi) = int exp(i xi.x) f(dx), so that
 *   (p_r * f)(x) = (2 pi)^{-d} int exp(-r|y|^2/2) exp(i x.y) f^(dy).
 * All supported models are isotropic, so spectral integrals reduce to a
 * radial integral against the angular average of exp(i x.y).
 */
#pragma once

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "pam/errors.hpp"
#include "pam/fejer.hpp"
#include "pam/kernels.hpp"
#include "pam/quadrature.hpp"

namespace pam {

enum class CovarianceKind { WhiteNoise, RieszKernel, GaussianKernel, TabulatedFinite };

inline const char* kind_name(CovarianceKind k) {
  switch (k) {
    case CovarianceKind::WhiteNoise: return "white_noise";
    case CovarianceKind::RieszKernel: return "riesz";
    case CovarianceKind::GaussianKernel: return "gaussian";
    case CovarianceKind::TabulatedFinite: return "tabulated";
  }
  return "unknown";
}

namespace covariance {
double riesz_constant(int d, double beta);
}

/**
 * Immutable description of a covariance measure f on R^d.
 *
 * TabulatedFinite models are isotropic: they carry the spectral density as a
 * function of |xi|, an optional x-space density as a function of |x|, the
 * total mass, an optional atom of f^ at zero and a declared Rajchman flag.
 */
struct CovarianceModel {
  int dimension = 1;
  CovarianceKind kind = CovarianceKind::WhiteNoise;
  double mass = 1.0;            ///< WhiteNoise weight a.
  double riesz_exponent = 0.0;  ///< RieszKernel exponent beta_r.
  double spectral_atom_at_zero = 0.0;
  double total_mass = 1.0;  ///< f(R^d), possibly +infinity.
  double riesz_constant = 0.0;
  bool rajchman = false;  ///< Declared decay of f^ at infinity.
  std::function<double(double)> radial_spectral;  ///< Tabulated f^ density in |xi|.
  std::function<double(double)> radial_density;   ///< Tabulated f density in |x| (optional).

  static CovarianceModel white_noise(int d, double a) {
    if (d < 1 || d > 3) throw DomainError("white_noise: dimension must be 1, 2 or 3");
    if (!(a > 0.0)) throw DomainError("white_noise: mass must be positive");
    CovarianceModel m;
    m.dimension = d;
    m.kind = CovarianceKind::WhiteNoise;
    m.mass = a;
    m.total_mass = a;
    m.rajchman = false;
    return m;
  }

  static CovarianceModel riesz(int d, double beta) {
    CovarianceModel m;
    m.dimension = d;
    m.kind = CovarianceKind::RieszKernel;
    m.riesz_exponent = beta;
    m.riesz_constant = covariance::riesz_constant(d, beta);
    m.total_mass = std::numeric_limits<double>::infinity();
    m.rajchman = true;
    return m;
  }

  static CovarianceModel gaussian(int d) {
    if (d < 1 || d > 3) throw DomainError("gaussian: dimension must be 1, 2 or 3");
    CovarianceModel m;
    m.dimension = d;
    m.kind = CovarianceKind::GaussianKernel;
    m.total_mass = 1.0;
    m.rajchman = true;
    return m;
  }

  static CovarianceModel tabulated(int d, std::function<double(double)> spectral, double total_mass,
                                   bool rajchman, double atom = 0.0,
                                   std::function<double(double)> density = {}) {
    if (d < 1 || d > 3) throw DomainError("tabulated: dimension must be 1, 2 or 3");
    if (!spectral) throw DomainError("tabulated: spectral density required");
    if (!(total_mass > 0.0)) throw DomainError("tabulated: total mass must be positive");
    if (atom < 0.0) throw DomainError("tabulated: atom must be nonnegative");
    CovarianceModel m;
    m.dimension = d;
    m.kind = CovarianceKind::TabulatedFinite;
    m.radial_spectral = std::move(spectral);
    m.radial_density = std::move(density);
    m.total_mass = atom > 0.0 ? std::numeric_limits<double>::infinity() : total_mass;
    m.spectral_atom_at_zero = atom;
    m.rajchman = rajchman;
    return m;
  }
};

namespace covariance {

/// kappa_{beta,d} = pi^{d/2} 2^{d-beta} Gamma((d-beta)/2) / Gamma(beta/2).
inline double riesz_constant(int d, double beta) {
  if (d < 1 || d > 3) throw DomainError("riesz_constant: dimension must be 1, 2 or 3");
  if (!(beta > 0.0 && beta < std::min(2.0, static_cast<double>(d))))
    throw DomainError("riesz_constant: exponent must lie in (0, min(2,d))");
  return std::pow(std::numbers::pi, 0.5 * d) * std::pow(2.0, d - beta) * std::tgamma(0.5 * (d - beta)) /
         std::tgamma(0.5 * beta);
}

/// Radial spectral density g(rho) of the absolutely continuous part of f^.
inline double radial_spectral(const CovarianceModel& m, double rho) {
  switch (m.kind) {
    case CovarianceKind::WhiteNoise: return m.mass;
    case CovarianceKind::GaussianKernel: return std::exp(-0.5 * rho * rho);
    case CovarianceKind::RieszKernel:
      if (rho == 0.0) throw SingularityError("spectral_density: Riesz density is singular at 0");
      return m.riesz_constant * std::pow(rho, m.riesz_exponent - m.dimension);
    case CovarianceKind::TabulatedFinite: return m.radial_spectral(rho);
  }
  return 0.0;
}

/// rho^{d-1} g(rho), the radial weight of f^, safe at extreme rho.
inline double radial_weight(const CovarianceModel& m, double rho) {
  if (!(rho > 0.0) || !std::isfinite(rho)) return 0.0;
  const int d = m.dimension;
  switch (m.kind) {
    case CovarianceKind::RieszKernel: return m.riesz_constant * std::pow(rho, m.riesz_exponent - 1.0);
    case CovarianceKind::GaussianKernel: return std::exp((d - 1) * std::log(rho) - 0.5 * rho * rho);
    default: {
      const double g = radial_spectral(m, rho);
      return g == 0.0 ? 0.0 : std::pow(rho, d - 1) * g;
    }
  }
}

/// Radon-Nikodym density of f^ at xi.
inline double spectral_density(const CovarianceModel& m, const Point& xi) {
  if (static_cast<int>(xi.size()) != m.dimension) throw DomainError("spectral_density: dimension mismatch");
  return radial_spectral(m, norm(xi));
}

/// x-space density of f as a function of |x|; throws for atomic models.
inline double radial_density(const CovarianceModel& m, double r) {
  switch (m.kind) {
    case CovarianceKind::WhiteNoise: throw DomainError("white noise covariance has no density");
    case CovarianceKind::GaussianKernel: return kernels::heat_kernel_r2(1.0, r * r, m.dimension);
    case CovarianceKind::RieszKernel: return std::pow(r, -m.riesz_exponent);
    case CovarianceKind::TabulatedFinite:
      if (!m.radial_density) throw DomainError("tabulated model carries no x-space density");
      return m.radial_density(r);
  }
  return 0.0;
}

/// Angular average of exp(i rho x.theta) over the unit sphere, z = rho |x|.
inline double angular_average(double z, int d) {
  if (d == 1) return std::cos(z);
  if (d == 2) return boost::math::cyl_bessel_j(0, z);
  return std::abs(z) < 1e-8 ? 1.0 - z * z / 6.0 : std::sin(z) / z;
}

/**
 * (p_r * f)(x) evaluated on the spectral side:
 * (2 pi)^{-d} [f^{0} + |S^{d-1}| int_0^infty rho^{d-1} g(rho) e^{-r rho^2/2} A_d(rho |x|) d rho].
 */
inline double smoothed_covariance(const CovarianceModel& m, double r, const Point& x) {
  if (!(r > 0.0)) throw DomainError("smoothed_covariance: r must be positive");
  if (static_cast<int>(x.size()) != m.dimension) throw DomainError("smoothed_covariance: dimension mismatch");
  const int d = m.dimension;
  const double ax = norm(x);
  const double rho_max = std::sqrt(2.0 * 46.0 / r);
  auto f = [&](double rho) {
    return radial_weight(m, rho) * std::exp(-0.5 * r * rho * rho) * angular_average(rho * ax, d);
  };
  const int n_smooth = static_cast<int>(std::ceil(rho_max * std::sqrt(r) / 2.0));
  const int n_osc = static_cast<int>(std::ceil(rho_max * ax / std::numbers::pi));
  const int panels = std::max({2, n_smooth, n_osc});
  const double h = rho_max / panels;
  double s = quad::graded_from_zero(f, h);
  for (int i = 1; i < panels; ++i) s += quad::gauss20(f, i * h, (i + 1) * h);
  s *= fejer::sphere_area(d);
  if (!std::isfinite(s)) throw NumericalError("smoothed_covariance: quadrature did not converge");
  return (s + m.spectral_atom_at_zero) / std::pow(2.0 * std::numbers::pi, d);
}

/**
 * (p_r * f)(x) as a function of rho = |x| using closed forms where they
 * exist: a p_r for white noise, p_{r+1} for the Gaussian kernel, and the
 * noncentral Riesz moment
 *   r^{-b/2} 2^{-b/2} Gamma((d-b)/2)/Gamma(d/2) 1F1(b/2; d/2; -rho^2/(2r)).
 * Tabulated models fall back to spectral quadrature.
 */
inline double smoothed_covariance_radial(const CovarianceModel& m, double r, double rho) {
  const int d = m.dimension;
  switch (m.kind) {
    case CovarianceKind::WhiteNoise: return m.mass * kernels::heat_kernel_r2(r, rho * rho, d);
    case CovarianceKind::GaussianKernel: return kernels::heat_kernel_r2(r + 1.0, rho * rho, d);
    case CovarianceKind::RieszKernel: {
      const double b = m.riesz_exponent;
      const double z = rho * rho / (2.0 * r);
      const double pre = std::pow(2.0 * r, -0.5 * b) * std::tgamma(0.5 * (d - b)) / std::tgamma(0.5 * d);
      // Kummer transform keeps the hypergeometric argument positive.
      double h;
      if (z < 40.0)
        h = std::exp(-z) * boost::math::hypergeometric_1F1(0.5 * (d - b), 0.5 * d, z);
      else {
        // Large-argument expansion of 1F1(a; c; -z), a = b/2, c = d/2:
        // Gamma(c)/Gamma(c-a) z^{-a} sum_k (a)_k (a-c+1)_k / (k! z^k).
        const double a = 0.5 * b, c = 0.5 * d;
        double term = 1.0, sum = 1.0;
        for (int k = 0; k < 30; ++k) {
          const double next = term * (a + k) * (a - c + 1 + k) / ((k + 1) * z);
          if (std::abs(next) > std::abs(term)) break;
          term = next;
          sum += term;
          if (std::abs(term) < 1e-17 * std::abs(sum)) break;
        }
        h = std::tgamma(c) / std::tgamma(c - a) * std::pow(z, -a) * sum;
      }
      return pre * h;
    }
    case CovarianceKind::TabulatedFinite: {
      Point x(d, 0.0);
      x[0] = rho;
      return smoothed_covariance(m, r, x);
    }
  }
  return 0.0;
}

/**
 * int_{R^d} h(|xi|) f^(d xi) = f^{0} h(0) + |S^{d-1}| int_0^infty rho^{d-1} g(rho) h(rho) d rho,
 * with the tail [1, infinity) mapped to (0, 1] by rho = 1/u.
 */
template <class H>
double radial_spectral_integral(const CovarianceModel& m, H&& h) {
  const int d = m.dimension;
  auto inner = [&](double rho) {
    const double w = radial_weight(m, rho);
    return w == 0.0 ? 0.0 : w * h(rho);
  };
  auto outer = [&](double u) {
    if (u <= 0.0) return 0.0;
    const double rho = 1.0 / u;
    const double v = inner(rho);
    return v == 0.0 ? 0.0 : (v * rho) * rho;
  };
  const double a = quad::tanh_sinh(inner, 0.0, 1.0, 1e-12, "spectral integral");
  const double b = quad::tanh_sinh(outer, 0.0, 1.0, 1e-12, "spectral integral");
  return m.spectral_atom_at_zero * h(0.0) + fejer::sphere_area(d) * (a + b);
}

/// Upsilon(lambda) = (2 pi)^{-d} int f^(dy) / (lambda + |y|^2), +infinity if divergent.
inline double upsilon(const CovarianceModel& m, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("upsilon: lambda must be positive");
  const int d = m.dimension;
  if (m.kind == CovarianceKind::WhiteNoise && d >= 2) return std::numeric_limits<double>::infinity();
  try {
    const double v = radial_spectral_integral(m, [lambda](double rho) { return 1.0 / (lambda + rho * rho); });
    return v / std::pow(2.0 * std::numbers::pi, d);
  } catch (const NumericalError&) {
    if (m.kind == CovarianceKind::TabulatedFinite) return std::numeric_limits<double>::infinity();
    throw;
  }
}

/// Dalang's condition Upsilon(1) < infinity.
inline bool dalang_satisfied(const CovarianceModel& m) {
  if (m.kind == CovarianceKind::RieszKernel) return true;
  return std::isfinite(upsilon(m, 1.0));
}

/// Ergodicity criterion: no atom of f^ at zero.
inline bool ergodic_condition(const CovarianceModel& m) { return m.spectral_atom_at_zero == 0.0; }

/// Finiteness of int |z|^{-1} f^(dz), the d >= 2 criterion for R(f) < infinity.
inline bool r_functional_finite(const CovarianceModel& m) {
  const int d = m.dimension;
  if (d == 1) return false;
  if (m.kind == CovarianceKind::RieszKernel || m.kind == CovarianceKind::WhiteNoise) return false;
  if (m.spectral_atom_at_zero > 0.0) return false;
  if (m.kind == CovarianceKind::GaussianKernel) return true;
  try {
    const double v = radial_spectral_integral(m, [](double rho) { return rho > 0.0 ? 1.0 / rho : 0.0; });
    return std::isfinite(v);
  } catch (const NumericalError&) {
    return false;
  }
}

/**
 * R(f) = pi^{-d} int_0^infty ds int f^(dz) prod_j phi(s z_j).
 * With z = rho theta and w = s rho this factorizes as
 *   R(f) = pi^{-d} [int_0^infty rho^{d-2} g(rho) d rho] [int_0^infty Phi_d(w) dw].
 */
inline double r_functional(const CovarianceModel& m) {
  if (!r_functional_finite(m)) return std::numeric_limits<double>::infinity();
  const int d = m.dimension;
  const double radial =
      radial_spectral_integral(m, [](double rho) { return rho > 0.0 ? 1.0 / rho : 0.0; }) / fejer::sphere_area(d);
  return radial * fejer::moment(0.0, d) / std::pow(std::numbers::pi, d);
}

}  // namespace covariance
}  // namespace pam
