/**
 * @file constants.hpp
 * @brief Closed-form constants: BDG constants, beta_{eps,k}, the moment
 *        bounds c_{t,k} and C_{t,k}, the Riesz limit constants sigma_0,
 *        sigma_1, sigma_2, and the predicted asymptotics of Var(S_{N,t}).
 */
#pragma once

#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "pam/covariance.hpp"
#include "pam/fejer.hpp"
#include "pam/quadrature.hpp"

namespace pam::constants {

/// z_k: exact for k = 2 and k = 4, otherwise the upper bound 2 sqrt(k).
inline double bdg_constant(double k) {
  if (!(k >= 2.0)) throw DomainError("bdg_constant: k must be at least 2");
  if (k == 2.0) return 1.0;
  if (k == 4.0) return std::sqrt(3.0 + std::sqrt(6.0));
  return 2.0 * std::sqrt(k);
}

/// Lower bound ||N(0,1)||_k = sqrt(2) [Gamma((k+1)/2)/sqrt(pi)]^{1/k}.
inline double bdg_lower_bound(double k) {
  if (!(k >= 2.0)) throw DomainError("bdg_lower_bound: k must be at least 2");
  return std::sqrt(2.0) * std::exp((std::lgamma(0.5 * (k + 1)) - 0.5 * std::log(std::numbers::pi)) / k);
}

/// Upsilon^{-1}(y): the lambda > 0 with Upsilon(lambda) = y.
inline double upsilon_inverse(const CovarianceModel& m, double y) {
  if (!covariance::dalang_satisfied(m)) throw DomainError("upsilon_inverse: Dalang condition fails");
  if (!(y > 0.0)) throw DomainError("upsilon_inverse: target must be positive");
  auto g = [&](double loglam) { return std::log(covariance::upsilon(m, std::exp(loglam))) - std::log(y); };
  double lo = 0.0, hi = 0.0;
  if (g(0.0) > 0.0) {
    lo = 0.0;
    hi = 1.0;
    while (g(hi) > 0.0) {
      lo = hi;
      hi *= 2.0;
      if (hi > 700.0) throw NoSolutionError("upsilon_inverse: bracket overflow");
    }
  } else {
    hi = 0.0;
    lo = -1.0;
    while (g(lo) < 0.0) {
      hi = lo;
      lo *= 2.0;
      if (lo < -60.0)
        throw NoSolutionError("upsilon_inverse: target exceeds sup Upsilon; no solution");
    }
  }
  boost::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(g, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return std::exp(0.5 * (r.first + r.second));
}

/// beta_{eps,k} = (1/2) Upsilon^{-1}((1-eps)/(4 z_k^2)).
inline double beta_eps_k(const CovarianceModel& m, double eps, double k) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("beta_eps_k: eps must lie in (0,1)");
  const double z = bdg_constant(k);
  return 0.5 * upsilon_inverse(m, (1.0 - eps) / (4.0 * z * z));
}

/// log c_{t,k} = k log(2/eps) + (t k/4) Upsilon^{-1}((1-eps)/(4 z_k^2)).
inline double log_moment_bound(const CovarianceModel& m, double t, double k, double eps = 0.5) {
  if (!(t > 0.0)) throw DomainError("moment_bound: t must be positive");
  return k * std::log(2.0 / eps) + 0.25 * t * k * 2.0 * beta_eps_k(m, eps, k);
}

/// c_{t,k} = (2/eps)^k exp{(t k/4) Upsilon^{-1}((1-eps)/(4 z_k^2))}; may
/// overflow to +infinity in double precision, use log_moment_bound then.
inline double moment_bound(const CovarianceModel& m, double t, double k, double eps = 0.5) {
  return std::exp(log_moment_bound(m, t, k, eps));
}

/// min_eps c_{t,k} over eps in {0.05, 0.10, ..., 0.95}, in log form.
inline double log_moment_bound_min(const CovarianceModel& m, double t, double k) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 19; ++i) best = std::min(best, log_moment_bound(m, t, k, 0.05 * i));
  return best;
}

inline double moment_bound_min(const CovarianceModel& m, double t, double k) {
  return std::exp(log_moment_bound_min(m, t, k));
}

/// log C_{t,k} with C_{t,k} = (64/7) exp{(t/2)[beta_{7/8,k} + (1/2) Upsilon^{-1}(1/(32 z_k^2))]}.
inline double log_malliavin_constant(const CovarianceModel& m, double t, double k) {
  if (!(t > 0.0)) throw DomainError("malliavin_constant: t must be positive");
  const double z = bdg_constant(k);
  const double b = beta_eps_k(m, 7.0 / 8.0, k);
  const double u = upsilon_inverse(m, 1.0 / (32.0 * z * z));
  return std::log(64.0 / 7.0) + 0.5 * t * (b + 0.5 * u);
}

inline double malliavin_constant(const CovarianceModel& m, double t, double k) {
  return std::exp(log_malliavin_constant(m, t, k));
}

/**
 * sigma_{0,beta,d} = (1/(1-beta)) int_{[-1,1]^d} |z|^{-beta} prod (1-|z_i|) dz.
 * In polar coordinates over the positive orthant the radial integral of
 * rho^{d-1-beta} prod(1 - rho u_i) up to 1/max(u_i) is a polynomial in closed
 * form, leaving a smooth angular quadrature split at the kinks of max(u_i).
 */
inline double sigma0(double beta, int d) {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("sigma0: exponent must lie in (0,1)");
  if (d < 1 || d > 3) throw DomainError("sigma0: dimension must be 1, 2 or 3");
  // int_0^R rho^{d-1-beta} sum_k (-1)^k e_k rho^k d rho
  auto radial = [beta, d](const double* u) {
    double R = 0.0;
    for (int i = 0; i < d; ++i) R = std::max(R, u[i]);
    R = 1.0 / R;
    double e[4] = {1.0, 0.0, 0.0, 0.0};
    for (int i = 0; i < d; ++i)
      for (int k = i + 1; k >= 1; --k) e[k] += e[k - 1] * u[i];
    double s = 0.0;
    for (int k = 0; k <= d; ++k) {
      const double p = d - beta + k;
      s += ((k % 2) ? -1.0 : 1.0) * e[k] * std::pow(R, p) / p;
    }
    return s;
  };
  double orthant = 0.0;
  const double pi = std::numbers::pi;
  if (d == 1) {
    const double u[1] = {1.0};
    orthant = radial(u);
  } else if (d == 2) {
    auto g = [&](double th) {
      const double u[2] = {std::cos(th), std::sin(th)};
      return radial(u);
    };
    orthant = 2.0 * quad::gauss30(g, 0.0, 0.25 * pi);
  } else {
    // Azimuth ph in [0, pi/4] (x <-> y symmetry), polar th from the z axis,
    // split where z stops being the largest coordinate.
    auto outer = [&](double ph) {
      const double cp = std::cos(ph), sp = std::sin(ph);
      auto inner = [&](double th) {
        const double st = std::sin(th);
        const double u[3] = {st * cp, st * sp, std::cos(th)};
        return st * radial(u);
      };
      const double thk = std::atan(1.0 / cp);
      return quad::gauss30(inner, 0.0, thk) + quad::gauss30(inner, thk, 0.5 * pi);
    };
    orthant = 2.0 * quad::gauss30(outer, 0.0, 0.25 * pi);
  }
  return std::pow(2.0, d) * orthant / (1.0 - beta);
}

/// sigma_{1,1,d} = (2 kappa_{1,d}/pi^d) int |z|^{1-d} prod phi(z_j) dz.
inline double sigma1(int d) {
  if (d < 2 || d > 3) throw DomainError("sigma1: requires d in {2,3}");
  return 2.0 * covariance::riesz_constant(d, 1.0) / std::pow(std::numbers::pi, d) * fejer::moment(0.0, d);
}

/// sigma_{2,beta,d} = (kappa_{beta,d}/pi^d) int |z|^{2-beta-d} prod phi(z_j) dz * Gamma(beta-1).
inline double sigma2(double beta, int d) {
  if (!(beta > 1.0 && beta < std::min(2.0, 1.0 * d))) throw DomainError("sigma2: exponent must lie in (1, min(2,d))");
  return covariance::riesz_constant(d, beta) / std::pow(std::numbers::pi, d) * fejer::moment(1.0 - beta, d) *
         std::tgamma(beta - 1.0);
}

/// Leading rate families of Var(S_{N,t}).
enum class Rate { InverseN, InverseNLogN, PowerBeta, PowerTwoMinusBeta };

inline const char* rate_name(Rate r) {
  switch (r) {
    case Rate::InverseN: return "N^-1";
    case Rate::InverseNLogN: return "N^-1 log N";
    case Rate::PowerBeta: return "N^-beta";
    case Rate::PowerTwoMinusBeta: return "N^-(2-beta)";
  }
  return "?";
}

/// Var(S_{N,t}) ~ constant * N^{-exponent} (log N)^{log_power}.
struct VariancePrediction {
  Rate leading_rate = Rate::InverseN;
  double exponent = 1.0;
  int log_power = 0;
  double constant_lo = 0.0;
  double constant_hi = 0.0;
  std::string regime;  ///< Label of the asymptotic regime.

  bool is_interval() const { return constant_lo != constant_hi; }
  double constant() const { return 0.5 * (constant_lo + constant_hi); }
  /// Predicted variance (midpoint of the interval when bracketed).
  double at(double N) const {
    return constant() * std::pow(N, -exponent) * (log_power ? std::log(N) : 1.0);
  }
};

/// Dispatch of the variance asymptotics by regime.
inline VariancePrediction predicted_variance(const CovarianceModel& m, double t, double N = std::numbers::e) {
  if (!(t > 0.0)) throw DomainError("predicted_variance: t must be positive");
  if (!(N >= std::numbers::e)) throw DomainError("predicted_variance: N must be at least e");
  if (!covariance::dalang_satisfied(m))
    throw UnsupportedRegimeError("predicted_variance: Dalang's condition Upsilon(1) < infinity fails");
  const int d = m.dimension;
  VariancePrediction p;
  if (m.kind == CovarianceKind::RieszKernel) {
    const double b = m.riesz_exponent;
    if (b < 1.0) {
      p.leading_rate = Rate::PowerBeta;
      p.exponent = b;
      p.constant_lo = p.constant_hi = t * sigma0(b, d);
      p.regime = "riesz-subcritical";
    } else if (b == 1.0) {
      p.leading_rate = Rate::InverseNLogN;
      p.exponent = 1.0;
      p.log_power = 1;
      p.constant_lo = p.constant_hi = t * sigma1(d);
      p.regime = "riesz-critical";
    } else {
      p.leading_rate = Rate::PowerTwoMinusBeta;
      p.exponent = 2.0 - b;
      p.constant_lo = p.constant_hi = std::pow(t, 2.0 - b) * sigma2(b, d);
      p.regime = "riesz-supercritical";
    }
    return p;
  }
  if (d >= 2) {
    const double R = covariance::r_functional(m);
    if (!std::isfinite(R))
      throw UnsupportedRegimeError("predicted_variance: d >= 2 requires R(f) < infinity (finite-R regime hypothesis)");
    p.leading_rate = Rate::InverseN;
    p.exponent = 1.0;
    p.constant_lo = p.constant_hi = t * R;
    p.regime = "finite-R";
    return p;
  }
  if (!std::isfinite(m.total_mass))
    throw UnsupportedRegimeError("predicted_variance: d = 1 requires a finite measure f (d = 1 regime hypothesis)");
  const double mass = m.total_mass;
  p.leading_rate = Rate::InverseNLogN;
  p.exponent = 1.0;
  p.log_power = 1;
  if (m.kind == CovarianceKind::WhiteNoise) {
    p.constant_lo = p.constant_hi = 2.0 * t * mass;
    p.regime = "d1-atomic";
  } else if (m.rajchman) {
    p.constant_lo = p.constant_hi = t * mass;
    p.regime = "d1-rajchman";
  } else {
    p.constant_lo = t * mass;
    p.constant_hi = 2.0 * t * mass;
    p.regime = "d1-bracket";
  }
  return p;
}

}  // namespace pam::constants
