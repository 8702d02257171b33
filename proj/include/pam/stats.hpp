/**
 * @file stats.hpp
 * @brief Replica statistics: spatial window averages S_{N,t}, variance
 *        scaling fits with log-correction detection, normality tests,
 *        the ergodicity functional V_N(t) and the end-to-end CLT report.
 *
 * Windows for different N are nested inside one simulation domain, so all
 * N values share the same replicas; standard errors are jackknifed over
 * replicas.  Normality is judged by Kolmogorov-Smirnov and Anderson-Darling
 * distances because total variation is not estimable from samples.
 */
#pragma once

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/statistics/anderson_darling.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "pam/constants.hpp"
#include "pam/covariance.hpp"
#include "pam/errors.hpp"
#include "pam/noise.hpp"
#include "pam/parallel.hpp"
#include "pam/philox.hpp"
#include "pam/solver.hpp"

namespace pam::stats {

// ---------------------------------------------------------------------------
// Moments
// ---------------------------------------------------------------------------

/// Running mean and centered second moment; merge() combines partial
/// aggregates exactly (pairwise update), so reductions are order-independent
/// up to rounding.
struct RunningMoments {
  double n = 0.0, mean = 0.0, m2 = 0.0;

  void add(double x) {
    n += 1.0;
    const double delta = x - mean;
    mean += delta / n;
    m2 += delta * (x - mean);
  }
  void merge(const RunningMoments& o) {
    if (o.n == 0.0) return;
    const double tot = n + o.n, delta = o.mean - mean;
    mean += delta * o.n / tot;
    m2 += o.m2 + delta * delta * n * o.n / tot;
    n = tot;
  }
  /// Unbiased sample variance.
  double variance() const { return n > 1.0 ? m2 / (n - 1.0) : 0.0; }
  double standard_error() const { return n > 1.0 ? std::sqrt(variance() / n) : 0.0; }
};

/// Unbiased sample variance of x.
inline double sample_variance(const std::vector<double>& x) {
  RunningMoments m;
  for (double v : x) m.add(v);
  return m.variance();
}

/// Sample variance with its delete-one jackknife standard error.
struct VarianceEstimate {
  double variance = 0.0;
  double se = 0.0;
};

/**
 * Jackknife over replicas: the leave-one-out variances follow in closed form
 * from the centered sums, so the cost is O(n).
 */
inline VarianceEstimate jackknife_variance(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 3) throw InsufficientDataError("jackknife_variance: need at least 3 samples");
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double s2 = 0.0;
  for (double v : x) s2 += (v - mean) * (v - mean);
  const double nn = static_cast<double>(n);
  VarianceEstimate out;
  out.variance = s2 / (nn - 1.0);
  // Leaving out x_i: the centered sum of squares drops by (x_i - mean)^2 n/(n-1).
  std::vector<double> loo(n);
  double loo_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = x[i] - mean;
    loo[i] = (s2 - e * e * nn / (nn - 1.0)) / (nn - 2.0);
    loo_mean += loo[i];
  }
  loo_mean /= nn;
  double acc = 0.0;
  for (double v : loo) acc += (v - loo_mean) * (v - loo_mean);
  out.se = std::sqrt((nn - 1.0) / nn * acc);
  return out;
}

// ---------------------------------------------------------------------------
// Spatial averages
// ---------------------------------------------------------------------------

/// Cells of one axis covering [0, N] with their fractional weights.  Cell n
/// spans [x_n, x_n + dx) with x_n = -L/2 + n dx, so the window starts at the
/// origin cell M/2.
inline std::vector<std::pair<int, double>> window_axis(const GridSpec& g, double N) {
  const double dx = g.dx();
  const double cells = N / dx;
  const int full = static_cast<int>(std::floor(cells + 1e-9));
  const double frac = cells - full;
  std::vector<std::pair<int, double>> out;
  for (int i = 0; i < full; ++i) out.emplace_back(g.M / 2 + i, 1.0);
  if (frac > 1e-9) out.emplace_back(g.M / 2 + full, frac);
  return out;
}

/// Throws unless the window [0, N]^d lies inside the domain and the reliable
/// region of a field with the given reliable radius.
inline void check_window(const GridSpec& g, double N, double reliable_radius) {
  if (!(N > 0.0)) throw DomainError("spatial_average: N must be positive");
  if (N > 0.5 * g.L - g.dx())
    throw DomainError("spatial_average: window [0, N]^d exceeds the simulation domain (need N <= L/2 - dx)");
  if (N * std::sqrt(static_cast<double>(g.d)) > reliable_radius)
    throw DomainError("spatial_average: window corner at distance N sqrt(d) lies beyond the reliable radius " +
                      std::to_string(reliable_radius));
}

/**
 * N^{-d} times the Riemann sum of G(x) dx^d over [0, N]^d, with
 * G(x) = prod_j g_j(U(x + shift_j)).  Shifts are lattice offsets in cells
 * along each axis and wrap periodically.
 */
inline double window_functional(const std::vector<double>& U, const GridSpec& g, double N,
                                const std::vector<std::function<double(double)>>& fns,
                                const std::vector<std::vector<int>>& shifts) {
  const auto axis = window_axis(g, N);
  const int d = g.d, M = g.M;
  const double cell = std::pow(g.dx() / N, d);
  auto value_at = [&](const std::vector<int>& idx) {
    double prod = 1.0;
    for (std::size_t j = 0; j < fns.size(); ++j) {
      std::size_t flat = 0;
      for (int a = 0; a < d; ++a) {
        const int off = j < shifts.size() && static_cast<int>(shifts[j].size()) > a ? shifts[j][a] : 0;
        flat = flat * M + static_cast<std::size_t>(((idx[a] + off) % M + M) % M);
      }
      const double u = U[flat];
      if (std::isnan(u)) throw DomainError("spatial_average: window touches cells outside the reliable region");
      prod *= fns[j](u);
    }
    return prod;
  };
  std::vector<int> idx(d);
  std::vector<std::size_t> pos(d, 0);
  double acc = 0.0;
  for (;;) {
    double w = 1.0;
    for (int a = 0; a < d; ++a) {
      idx[a] = axis[pos[a]].first;
      w *= axis[pos[a]].second;
    }
    acc += w * value_at(idx);
    int a = d - 1;
    while (a >= 0 && ++pos[a] == axis.size()) pos[a--] = 0;
    if (a < 0) break;
  }
  return acc * cell;
}

/// S_{N,t} = N^{-d} int_{[0,N]^d} (U(t,x) - 1) dx as a Riemann sum over the
/// grid cells, with the window anchored at the domain center.
inline double spatial_average(const SolutionField& f, double N) {
  check_window(f.grid, N, f.reliable_radius);
  return window_functional(f.U, f.grid, N, {[](double u) { return u - 1.0; }}, {});
}

// ---------------------------------------------------------------------------
// Ensembles
// ---------------------------------------------------------------------------

/// Simulation scheme used to produce replicas.
enum class Scheme { Physical, Volterra, CoMoving };

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Physical: return "physical";
    case Scheme::Volterra: return "volterra";
    case Scheme::CoMoving: return "comoving";
  }
  return "?";
}

/// A replica ensemble: model, grid, count, scheme and worker threads.
struct EnsembleSpec {
  CovarianceModel model = CovarianceModel::white_noise(1, 1.0);
  GridSpec grid;
  int replicas = 2000;
  Scheme scheme = Scheme::CoMoving;
  int threads = 1;
  std::uint32_t first_replica = 0;
  double noise_scale = 1.0;  ///< Passed to the scheme; 0 gives U = 1.
};

/// Calls observe(i, field) for replicas first_replica + i, i < replicas.
/// Observers run concurrently on distinct i and must only write slot i.
template <class F>
void for_each_replica(const EnsembleSpec& spec, F&& observe) {
  if (spec.replicas < 1) throw InsufficientDataError("ensemble: need at least one replica");
  const auto n = static_cast<std::size_t>(spec.replicas);
  solver::Options opt;
  opt.noise_scale = spec.noise_scale;
  auto run = [&](const auto& solver) {
    parallel::for_each_index(n, spec.threads, [&](std::size_t i) {
      const auto f = solver.solve(spec.first_replica + static_cast<std::uint32_t>(i), opt);
      observe(i, f);
    });
  };
  switch (spec.scheme) {
    case Scheme::Physical: run(solver::PhysicalSolver(spec.model, spec.grid)); break;
    case Scheme::Volterra: run(solver::VolterraSolver(spec.model, spec.grid)); break;
    case Scheme::CoMoving: run(solver::CoMovingSolver(spec.model, spec.grid)); break;
  }
}

/// S_{N,t} for every N in Ns (outer index) and replica (inner index).
inline std::vector<std::vector<double>> window_samples(const EnsembleSpec& spec, const std::vector<double>& Ns) {
  std::vector<std::vector<double>> out(Ns.size(), std::vector<double>(spec.replicas));
  for_each_replica(spec, [&](std::size_t r, const SolutionField& f) {
    for (std::size_t k = 0; k < Ns.size(); ++k) out[k][r] = spatial_average(f, Ns[k]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Normality tests
// ---------------------------------------------------------------------------

/// Limit distribution of sqrt(n) D_n: Q(lambda) = 2 sum_k (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

/// sup |F_n - Phi| of already standardized, sorted data.
inline double ks_statistic_sorted(const std::vector<double>& z) {
  const double n = static_cast<double>(z.size());
  double D = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double F = 0.5 * std::erfc(-z[i] / std::numbers::sqrt2);
    D = std::max({D, (i + 1) / n - F, F - i / n});
  }
  return D;
}

/// Standardizes by sample mean and SD (n - 1 denominator) and sorts.
inline std::vector<double> standardize_sorted(const std::vector<double>& x) {
  RunningMoments m;
  for (double v : x) m.add(v);
  const double sd = std::sqrt(m.variance());
  if (!(sd > 0.0) || !std::isfinite(sd)) throw DegenerateInputError("normality_test: sample has zero variance");
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - m.mean) / sd;
  std::sort(z.begin(), z.end());
  return z;
}

/// Null distribution (sorted) of the KS statistic with estimated mean and
/// SD, by simulation of `draws` normal samples of size n.  Cached per n.
inline const std::vector<double>& ks_null_distribution(std::size_t n, int draws = 2000) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, int>, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{n, draws}];
  if (slot.empty()) {
    slot.resize(draws);
    std::vector<double> x(n);
    for (int k = 0; k < draws; ++k) {
      rng::NormalStream rng(0x4b53u, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(n),
                            rng::Purpose::Calibration);
      for (auto& v : x) v = rng.normal();
      slot[k] = ks_statistic_sorted(standardize_sorted(x));
    }
    std::sort(slot.begin(), slot.end());
  }
  return slot;
}

/// Asymptotic p-value of the Anderson-Darling statistic when both normal
/// parameters are estimated (modified statistic A* = A^2 (1 + 0.75/n + 2.25/n^2)).
inline double anderson_darling_p(double A2, std::size_t n) {
  const double nn = static_cast<double>(n);
  const double a = A2 * (1.0 + 0.75 / nn + 2.25 / (nn * nn));
  double p;
  // The fitted exponent turns upward past A* = 153; p is below 1e-180 there.
  if (a >= 150.0)
    p = 0.0;
  else if (a >= 0.6)
    p = std::exp(1.2937 - 5.709 * a + 0.0186 * a * a);
  else if (a >= 0.34)
    p = std::exp(0.9177 - 4.279 * a - 1.38 * a * a);
  else if (a >= 0.2)
    p = 1.0 - std::exp(-8.318 + 42.796 * a - 59.938 * a * a);
  else
    p = 1.0 - std::exp(-13.436 + 101.14 * a - 223.73 * a * a);
  return std::clamp(p, 0.0, 1.0);
}

/// Distances of a standardized sample from N(0,1).
struct NormalityStats {
  std::size_t n = 0;
  double mean = 0.0, sd = 0.0;
  double ks = 0.0;             ///< sup |F_n - Phi| after standardization.
  double ks_p = 1.0;           ///< Monte Carlo calibrated for estimated mean and SD.
  double ks_p_asymptotic = 1.0;///< Kolmogorov limit law; conservative under estimation.
  double ad = 0.0;             ///< Anderson-Darling A^2.
  double ad_p = 1.0;           ///< Asymptotic p-value, estimated mean and SD.
};

/// KS and AD tests of normality; requires at least min_samples values.
inline NormalityStats normality_test(const std::vector<double>& x, std::size_t min_samples = 500) {
  if (x.size() < min_samples)
    throw InsufficientDataError("normality_test: need at least " + std::to_string(min_samples) + " samples, got " +
                                std::to_string(x.size()));
  NormalityStats s;
  s.n = x.size();
  RunningMoments m;
  for (double v : x) m.add(v);
  s.mean = m.mean;
  s.sd = std::sqrt(m.variance());
  const auto z = standardize_sorted(x);
  s.ks = ks_statistic_sorted(z);
  const double rn = std::sqrt(static_cast<double>(s.n));
  s.ks_p_asymptotic = kolmogorov_survival((rn + 0.12 + 0.11 / rn) * s.ks);
  const auto& null = ks_null_distribution(s.n);
  const auto above = null.end() - std::lower_bound(null.begin(), null.end(), s.ks);
  s.ks_p = (1.0 + static_cast<double>(above)) / (1.0 + static_cast<double>(null.size()));
  s.ad = boost::math::statistics::anderson_darling_normality_statistic(z, 0.0, 1.0);
  s.ad_p = anderson_darling_p(s.ad, s.n);
  return s;
}

/// Two-sample Kolmogorov-Smirnov statistic and its asymptotic p-value.
struct TwoSampleKs {
  double D = 0.0;
  double p = 1.0;
};

inline TwoSampleKs ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.size() < 2 || b.size() < 2) throw InsufficientDataError("ks_two_sample: need at least 2 samples per side");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double D = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    D = std::max(D, std::abs(i / na - j / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return {D, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * D)};
}

// ---------------------------------------------------------------------------
// Variance scaling
// ---------------------------------------------------------------------------

/// Weighted least-squares fit of log V = log C - gamma log N + delta log log N
/// with delta held at 0 or 1.
struct PowerFit {
  int delta = 0;
  double gamma = 0.0, gamma_se = 0.0;
  double C = 0.0;
  double rss = 0.0;  ///< Weighted residual sum of squares.
};

inline PowerFit fit_power_law(const std::vector<double>& Ns, const std::vector<double>& V,
                              const std::vector<double>& w, int delta) {
  double S = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
  std::vector<double> x(Ns.size()), y(Ns.size());
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    x[i] = std::log(Ns[i]);
    y[i] = std::log(V[i]) - delta * std::log(std::log(Ns[i]));
    S += w[i];
    Sx += w[i] * x[i];
    Sy += w[i] * y[i];
    Sxx += w[i] * x[i] * x[i];
    Sxy += w[i] * x[i] * y[i];
  }
  const double det = S * Sxx - Sx * Sx;
  if (!(det > 0.0)) throw DegenerateInputError("variance_scaling: N values do not span a range");
  const double b = (S * Sxy - Sx * Sy) / det, a = (Sy - b * Sx) / S;
  PowerFit f;
  f.delta = delta;
  f.gamma = -b;
  f.C = std::exp(a);
  for (std::size_t i = 0; i < Ns.size(); ++i) f.rss += w[i] * std::pow(y[i] - a - b * x[i], 2);
  // Weights are inverse variances of log V, so S/det is the slope variance.
  f.gamma_se = std::sqrt(S / det);
  return f;
}

/// Result of variance_scaling.
struct ScalingReport {
  std::vector<double> Ns;
  std::vector<double> variances;
  std::vector<double> ses;
  double gamma = 0.0, gamma_se = 0.0;
  int delta = 0;
  double C = 0.0;
  PowerFit plain, corrected;  ///< Fits with delta = 0 and delta = 1.
  double margin = 0.0;        ///< 1 - RSS(delta=1)/RSS(delta=0); delta = 1 needs >= 0.1.
  std::vector<NormalityStats> normality;
  std::size_t replicas = 0;
};

/// Minimum relative RSS improvement for selecting the log correction.
inline constexpr double kLogCorrectionMargin = 0.10;

/**
 * Fits Var ~ C N^{-gamma} (log N)^delta to given variances and standard
 * errors (WLS on log V with weights (V/se)^2; equal weights when every se is
 * zero).  delta = 1 is selected when its weighted RSS improves on delta = 0
 * by at least 10%.
 */
inline ScalingReport fit_scaling(const std::vector<double>& Ns, const std::vector<double>& V,
                                 const std::vector<double>& se) {
  if (Ns.size() < 4 || V.size() != Ns.size() || se.size() != Ns.size())
    throw InsufficientDataError("variance_scaling: need at least 4 N values with matching variances");
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    if (!(Ns[i] > 1.0)) throw DomainError("variance_scaling: N values must exceed 1 (log log N regressor)");
    if (i && !(Ns[i] > Ns[i - 1])) throw DomainError("variance_scaling: N values must increase");
    if (!(V[i] > 0.0)) throw DegenerateInputError("variance_scaling: variances must be positive");
  }
  const bool unweighted = std::all_of(se.begin(), se.end(), [](double s) { return s == 0.0; });
  std::vector<double> w(Ns.size(), 1.0);
  if (!unweighted)
    for (std::size_t i = 0; i < Ns.size(); ++i) {
      if (!(se[i] > 0.0)) throw DegenerateInputError("variance_scaling: standard errors must be positive");
      w[i] = std::pow(V[i] / se[i], 2);
    }
  ScalingReport r;
  r.Ns = Ns;
  r.variances = V;
  r.ses = se;
  r.plain = fit_power_law(Ns, V, w, 0);
  r.corrected = fit_power_law(Ns, V, w, 1);
  r.margin = r.plain.rss > 0.0 ? 1.0 - r.corrected.rss / r.plain.rss : 0.0;
  const PowerFit& best = r.margin >= kLogCorrectionMargin ? r.corrected : r.plain;
  r.delta = best.delta;
  r.gamma = best.gamma;
  r.gamma_se = best.gamma_se;
  r.C = best.C;
  return r;
}

/**
 * Variance scaling of an ensemble: samples[k][r] is S_{N_k,t} of replica r.
 * Requires at least min_replicas replicas and 4 N values.  Normality
 * statistics are attached for every N with at least 500 samples.
 */
inline ScalingReport variance_scaling(const std::vector<std::vector<double>>& samples, const std::vector<double>& Ns,
                                      std::size_t min_replicas = 200) {
  if (samples.size() != Ns.size()) throw DomainError("variance_scaling: one sample vector per N is required");
  for (const auto& s : samples)
    if (s.size() < min_replicas)
      throw InsufficientDataError("variance_scaling: need at least " + std::to_string(min_replicas) +
                                  " replicas, got " + std::to_string(s.size()));
  std::vector<double> V, se;
  for (const auto& s : samples) {
    const auto e = jackknife_variance(s);
    V.push_back(e.variance);
    se.push_back(e.se);
  }
  auto r = fit_scaling(Ns, V, se);
  r.replicas = samples.front().size();
  for (const auto& s : samples)
    if (s.size() >= 500) r.normality.push_back(normality_test(s));
  return r;
}

// ---------------------------------------------------------------------------
// Ergodicity functional
// ---------------------------------------------------------------------------

/// A bounded Lipschitz test function g with g(0) = 0.
struct TestFunction {
  std::string name;
  std::function<double(double)> g;
  double lipschitz = 1.0;
};

/// g(x) = min(x, K) - min(0, x): 0 below 0, x on [0, K], K above.
inline TestFunction clipped_identity(double K) {
  if (!(K > 0.0)) throw ConfigError("test_functions", "clip level K must be positive");
  return {"clip:" + std::to_string(K), [K](double x) { return std::min(x, K) - std::min(0.0, x); }, 1.0};
}

/**
 * Checks g(0) = 0, boundedness and the declared Lipschitz constant on a
 * dense sample of [-50, 50] and growth at 1e9 versus 1e12; throws ConfigError.
 */
inline void validate_test_function(const TestFunction& f) {
  if (!f.g) throw ConfigError("test_functions." + f.name, "empty");
  if (std::abs(f.g(0.0)) > 1e-12) throw ConfigError("test_functions." + f.name, "g(0) must be 0");
  const double h = 1e-3;
  double prev = f.g(-50.0), bound = std::abs(prev);
  for (double x = -50.0 + h; x <= 50.0; x += h) {
    const double v = f.g(x);
    if (!std::isfinite(v)) throw ConfigError("test_functions." + f.name, "non-finite value");
    if (std::abs(v - prev) > f.lipschitz * h * (1.0 + 1e-9) + 1e-12)
      throw ConfigError("test_functions." + f.name, "not Lipschitz with the declared constant");
    prev = v;
    bound = std::max(bound, std::abs(v));
  }
  // Growth between 1e9 and 1e12 in either direction marks an unbounded g.
  for (double sgn : {-1.0, 1.0})
    if (!(std::abs(f.g(sgn * 1e12)) <= std::max(bound, std::abs(f.g(sgn * 1e9))) * (1.0 + 1e-9) + 1e-9))
      throw ConfigError("test_functions." + f.name, "not bounded");
}

/// V_N(t) = Var(N^{-d} int_{[0,N]^d} prod_j g_j(U(t, x + zeta_j)) dx) per N.
struct ErgodicityTable {
  std::vector<double> Ns;
  std::vector<double> V, se;
  std::vector<double> mean_abs_S;  ///< E|S_{N,t}|, the law of large numbers check.
  std::vector<double> mean_abs_S_se;
  double decay_ratio = 0.0;        ///< V(N_max) / V(N_min).
  bool strictly_decreasing = false;
  std::size_t replicas = 0;
};

/**
 * Estimates V_N(t) for G(t,x) = prod_j g_j(U(t, x + zeta_j)) over the
 * ensemble.  Shifts are lattice offsets in cells; the default is one
 * clipped identity at zero shift and one at a one-cell offset.
 */
inline ErgodicityTable ergodicity_check(const EnsembleSpec& spec, const std::vector<double>& Ns,
                                        std::vector<TestFunction> fns = {},
                                        std::vector<std::vector<int>> shifts = {}) {
  if (!covariance::ergodic_condition(spec.model))
    throw UnsupportedRegimeError("ergodicity_check: the spectral measure has an atom at 0 (ergodicity hypothesis fails)");
  if (Ns.size() < 2) throw InsufficientDataError("ergodicity_check: need at least 2 N values");
  if (fns.empty()) {
    fns = {clipped_identity(2.0), clipped_identity(2.0)};
    std::vector<int> one(spec.grid.d, 0);
    one[0] = 1;
    shifts = {std::vector<int>(spec.grid.d, 0), one};
  }
  for (const auto& f : fns) validate_test_function(f);
  std::vector<std::function<double(double)>> gs;
  for (const auto& f : fns) gs.push_back(f.g);
  const auto R = static_cast<std::size_t>(spec.replicas);
  std::vector<std::vector<double>> G(Ns.size(), std::vector<double>(R)), S(Ns.size(), std::vector<double>(R));
  for_each_replica(spec, [&](std::size_t r, const SolutionField& f) {
    for (std::size_t k = 0; k < Ns.size(); ++k) {
      check_window(f.grid, Ns[k], f.reliable_radius);
      G[k][r] = window_functional(f.U, f.grid, Ns[k], gs, shifts);
      S[k][r] = spatial_average(f, Ns[k]);
    }
  });
  ErgodicityTable t;
  t.Ns = Ns;
  t.replicas = R;
  for (std::size_t k = 0; k < Ns.size(); ++k) {
    const auto e = jackknife_variance(G[k]);
    t.V.push_back(e.variance);
    t.se.push_back(e.se);
    RunningMoments a;
    for (double v : S[k]) a.add(std::abs(v));
    t.mean_abs_S.push_back(a.mean);
    t.mean_abs_S_se.push_back(a.standard_error());
  }
  t.decay_ratio = t.V.front() > 0.0 ? t.V.back() / t.V.front() : 0.0;
  t.strictly_decreasing = true;
  for (std::size_t k = 1; k < t.V.size(); ++k) t.strictly_decreasing = t.strictly_decreasing && t.V[k] < t.V[k - 1];
  return t;
}

// ---------------------------------------------------------------------------
// CLT report
// ---------------------------------------------------------------------------

/// Configuration of clt_report.
struct CltConfig {
  std::vector<double> Ns;
  int replicas = 2000;
  int threads = 1;
  std::uint64_t seed = 1;
  GridSpec grid;          ///< Used when use_grid is true; otherwise default_window_grid.
  bool use_grid = false;
  double rate_tolerance = 0.15;      ///< |gamma - exponent| bound.
  double constant_tolerance = 0.40;  ///< Relative bound on the rescaled constant at N_max.
  double normality_level = 0.01;     ///< AD p-value threshold at N_max.
};

/**
 * Co-moving grid for window averages up to N_max: L = 8 (N_max + sqrt t) (the
 * domain rule), M the smallest power of two with L/M at most 1.25 times the
 * nominal spacing 0.125 (d = 1) or 1 (d >= 2), geometric time nodes from
 * (t/L)^2 with J = 150 (d = 1) or 40 (d >= 2).
 */
inline GridSpec default_window_grid(int d, double t, double N_max, std::uint64_t seed) {
  const double L = 8.0 * (N_max + std::sqrt(t));
  const double dx = 1.25 * (d == 1 ? 0.125 : 1.0);
  int M = 16;
  while (L / M > dx) M *= 2;
  return GridSpec::geometric_box_matched(d, L, M, t, d == 1 ? 150 : 40, seed);
}

/// Verdict for one asymptotic regime: target rate and constant against fits.
struct CltReport {
  std::string regime;              ///< Descriptive regime label.
  std::string target_rate;         ///< e.g. "N^-1 log N".
  double variance_exponent = 0.0;  ///< Target gamma in Var ~ N^{-gamma}.
  double prefactor_exponent = 0.0; ///< gamma / 2: the normalizing power of N for S_{N,t}.
  int target_delta = 0;
  double target_constant_lo = 0.0, target_constant_hi = 0.0;
  ScalingReport scaling;
  std::vector<double> rescaled;    ///< V N^{gamma} / (log N)^{delta} at each N.
  bool rate_pass = false, log_pass = false, constant_pass = false, normality_pass = false;
  bool pass() const { return rate_pass && log_pass && constant_pass && normality_pass; }
};

/// Fills the target fields and verdicts from a prediction and a fit.
inline CltReport make_clt_report(const constants::VariancePrediction& p, ScalingReport sc, const CltConfig& cfg) {
  CltReport r;
  r.regime = p.regime;
  r.target_rate = constants::rate_name(p.leading_rate);
  r.variance_exponent = p.exponent;
  r.prefactor_exponent = 0.5 * p.exponent;
  r.target_delta = p.log_power;
  r.target_constant_lo = p.constant_lo;
  r.target_constant_hi = p.constant_hi;
  for (std::size_t k = 0; k < sc.Ns.size(); ++k)
    r.rescaled.push_back(sc.variances[k] * std::pow(sc.Ns[k], p.exponent) /
                         (p.log_power ? std::log(sc.Ns[k]) : 1.0));
  r.rate_pass = std::abs(sc.gamma - p.exponent) <= cfg.rate_tolerance;
  r.log_pass = sc.delta == p.log_power;
  const double last = r.rescaled.back();
  r.constant_pass = last >= (1.0 - cfg.constant_tolerance) * p.constant_lo &&
                    last <= (1.0 + cfg.constant_tolerance) * p.constant_hi;
  r.normality_pass = !sc.normality.empty() && sc.normality.back().ad_p > cfg.normality_level;
  r.scaling = std::move(sc);
  return r;
}

/**
 * End to end: simulate the co-moving ensemble, average over nested windows,
 * fit the scaling law, test normality and compare against the predicted
 * rate and constant.  Errors from the stages propagate with their messages
 * prefixed by the stage name.
 */
inline CltReport clt_report(const CovarianceModel& m, double t, const CltConfig& cfg) {
  constants::VariancePrediction p;
  try {
    p = constants::predicted_variance(m, t);
  } catch (const Error& e) {
    throw UnsupportedRegimeError(std::string("clt_report [prediction]: ") + e.what());
  }
  if (cfg.Ns.empty()) throw InsufficientDataError("clt_report [config]: empty N list");
  EnsembleSpec spec;
  spec.model = m;
  spec.grid = cfg.use_grid ? cfg.grid : default_window_grid(m.dimension, t, cfg.Ns.back(), cfg.seed);
  spec.grid.t_end = t;
  spec.replicas = cfg.replicas;
  spec.threads = cfg.threads;
  std::vector<std::vector<double>> samples;
  try {
    samples = window_samples(spec, cfg.Ns);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("clt_report [simulate]: ") + e.what());
  } catch (const DomainError& e) {
    throw DomainError(std::string("clt_report [spatial average]: ") + e.what());
  }
  return make_clt_report(p, variance_scaling(samples, cfg.Ns), cfg);
}

}  // namespace pam::stats
