/**
 * @file solver.hpp
 * @brief Monte Carlo schemes for u(t,.) and the normalized field U = u / p_t.
 *
 * Four schemes share the noise stream contract of noise.hpp:
 *  - PhysicalSolver marches u_{j+1} = P_dt[u_j (1 + dW_j)] from p_{t0} with
 *    exact spectral heat steps and reports U = u / p_t inside the radius where
 *    p_t(x) / p_t(0) stays above the spectral ripple floor (reliable_ratio);
 *  - VolterraSolver marches U(t_j,.) = 1 + sum_{i<j} K_ij[U(t_i,.) dW_i] with
 *    the bridge kernel applied by a chirp-z (Bluestein) evaluation at the
 *    contracted points (t_i/t_j) x;
 *  - CoMovingSolver evolves V(s, xi) = U(s, (s/t) xi), which satisfies a
 *    heat equation in the clock T(s) = -t^2/s driven by noise with spatial
 *    covariance f((s/t) .), so V(t,.) = U(t,.) on the whole periodic box;
 *  - feynman_kac_estimate averages the compensated exponential of the
 *    mollified noise along Brownian bridges.
 * Grid points are x_n = -L/2 + n dx in each coordinate, so the origin is cell
 * M/2 along every axis.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pam/covariance.hpp"
#include "pam/fft.hpp"
#include "pam/kernels.hpp"
#include "pam/noise.hpp"
#include "pam/philox.hpp"
#include "pam/quadrature.hpp"

namespace pam {

/// Normalized field U(t,.) on the grid, with optional raw field u.
struct SolutionField {
  GridSpec grid;
  std::vector<double> U;  ///< NaN outside the reliable region.
  std::vector<double> u;  ///< Physical-frame field, empty for other schemes.
  double t = 0.0;
  std::uint32_t replica = 0;
  std::string scheme;
  double reliable_radius = std::numeric_limits<double>::infinity();
  double negative_fraction = 0.0;  ///< Fraction of reliable cells with U < 0.
};

namespace solver {

using fft::Complex;

/// Options shared by the grid schemes.
struct Options {
  double abort_bound = 1e6;  ///< Abort a replica once max |U| exceeds this.
  double noise_scale = 1.0;  ///< Multiplies every increment; 0 disables noise.
  /// Called after each step with (step index j+1, time, U on the grid).
  std::function<void(int, double, const std::vector<double>&)> observer;
};

/// Coordinate of index n along one axis.
inline double coordinate(const GridSpec& g, int n) { return -0.5 * g.L + n * g.dx(); }

/// Squared distance from the origin of every grid cell (row-major order).
inline std::vector<double> cell_r2(const GridSpec& g) {
  std::vector<double> r2(g.cells(), 0.0);
  for (std::size_t idx = 0; idx < r2.size(); ++idx) {
    std::size_t rem = idx;
    double s = 0.0;
    for (int a = 0; a < g.d; ++a) {
      const double x = coordinate(g, static_cast<int>(rem % g.M));
      rem /= g.M;
      s += x * x;
    }
    r2[idx] = s;
  }
  return r2;
}

/// Linear index of the cell whose coordinates are the given grid indices.
inline std::size_t cell_index(const GridSpec& g, const std::vector<int>& n) {
  std::size_t idx = 0;
  for (int a = 0; a < g.d; ++a) idx = idx * g.M + static_cast<std::size_t>(n[a]);
  return idx;
}

/// Radius where p_t(x)/p_t(0) falls to `ratio`.
inline double reliable_radius(double t, double ratio = 1e-10) { return std::sqrt(-2.0 * t * std::log(ratio)); }

/// Threshold on p_t(x)/p_t(0) above which u / p_t is trusted in the physical
/// frame: 1e-10, raised to 100 times the relative ripple floor
/// exp(-dt kappa_N^2 / 2) that a truncated spectral heat step leaves behind.
inline double reliable_ratio(const GridSpec& g) {
  const double kn = std::numbers::pi / g.dx();
  return std::min(1e-2, std::max(1e-10, 1e2 * std::exp(-0.5 * g.dt() * kn * kn)));
}

/// Heat multipliers exp(-tau kappa^2 / 2) / M^d on the half spectrum.
inline std::vector<double> heat_multiplier(const fft::RealFft& plan, double L, double tau) {
  auto k2 = plan.half_k2();
  const double c = std::pow(2.0 * std::numbers::pi / L, 2);
  const double norm = 1.0 / static_cast<double>(plan.real_size());
  for (auto& v : k2) v = std::exp(-0.5 * tau * c * v) * norm;
  return k2;
}

inline void check_model(const CovarianceModel& m, const GridSpec& g) {
  g.validate();
  if (m.dimension != g.d) throw DomainError("solver: model and grid dimensions differ");
  if (!covariance::dalang_satisfied(m)) throw DomainError("solver: Dalang condition fails for this model");
}

/// Exponential Euler on the mild equation in the physical frame.
class PhysicalSolver {
 public:
  PhysicalSolver(const CovarianceModel& m, const GridSpec& g) : model_(m), grid_(g), sampler_(m, g) {
    check_model(m, g);
    if (!(g.t0 > 0.0)) throw DomainError("solve_u: the initial offset t0 must be positive");
    heat_ = heat_multiplier(sampler_.plan(), g.L, g.dt());
    r2_ = cell_r2(g);
  }

  const GridSpec& grid() const { return grid_; }

  SolutionField solve(std::uint32_t replica, const Options& opt = {}) const {
    const GridSpec& g = grid_;
    const std::size_t n = g.cells();
    std::vector<double> u(n), w, buf(n), U(n);
    std::vector<Complex> spec, work;
    initial_condition(u);
    for (int j = 0; j < g.J; ++j) {
      if (opt.noise_scale != 0.0) {
        sampler_.sample_into(replica, j, work, w);
        for (std::size_t i = 0; i < n; ++i) buf[i] = u[i] * (1.0 + opt.noise_scale * w[i]);
      } else {
        buf = u;
      }
      sampler_.plan().forward(buf, spec);
      for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= heat_[k];
      sampler_.plan().inverse(spec, u);
      const double tj = g.time(j + 1);
      const double mx = normalize(u, tj, U);
      if (mx > opt.abort_bound)
        throw AbortedReplicaError("solve_u: max |U| exceeded the instability bound", j + 1);
      if (opt.observer) opt.observer(j + 1, tj, U);
    }
    SolutionField f;
    f.grid = g;
    f.t = g.t_end;
    f.replica = replica;
    f.scheme = "physical";
    f.reliable_radius = reliable_radius(g.t_end, reliable_ratio(g));
    f.U = std::move(U);
    f.u = std::move(u);
    f.negative_fraction = negative_fraction(f.U);
    return f;
  }

 private:
  /// Band-limited periodic p_{t0}: coefficients (-1)^{sum k} e^{-t0 kappa^2/2} / L^d.
  /// Sampling p_{t0} instead would alias when t0 is not resolved by the grid.
  void initial_condition(std::vector<double>& u) const {
    const GridSpec& g = grid_;
    const fft::RealFft& plan = sampler_.plan();
    std::vector<Complex> spec(plan.half_size());
    const double c = std::pow(2.0 * std::numbers::pi / g.L, 2);
    const double vol = std::pow(g.L, g.d);
    const std::size_t H = g.M / 2 + 1;
    for (std::size_t idx = 0; idx < spec.size(); ++idx) {
      std::size_t rem = idx / H;
      long parity = static_cast<long>(idx % H);
      double k2 = std::pow(static_cast<double>(idx % H), 2);
      for (int a = 1; a < g.d; ++a) {
        const int k = plan.frequency(static_cast<int>(rem % g.M));
        rem /= g.M;
        parity += k;
        k2 += static_cast<double>(k) * k;
      }
      const double sign = (parity % 2 == 0) ? 1.0 : -1.0;
      spec[idx] = sign * std::exp(-0.5 * g.t0 * c * k2) / vol;
    }
    plan.inverse(spec, u);
  }

  /// U = u exp(-log p_t) inside the reliable radius, NaN outside; returns max |U|.
  double normalize(const std::vector<double>& u, double t, std::vector<double>& U) const {
    const double R2 = std::pow(reliable_radius(t, reliable_ratio(grid_)), 2);
    double mx = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (r2_[i] <= R2) {
        U[i] = u[i] * std::exp(-kernels::log_heat_kernel_r2(t, r2_[i], grid_.d));
        mx = std::max(mx, std::abs(U[i]));
      } else {
        U[i] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    return mx;
  }

  static double negative_fraction(const std::vector<double>& U) {
    std::size_t neg = 0, tot = 0;
    for (double v : U)
      if (!std::isnan(v)) {
        ++tot;
        if (v < 0.0) ++neg;
      }
    return tot ? static_cast<double>(neg) / tot : 0.0;
  }

  CovarianceModel model_;
  GridSpec grid_;
  noise::NoiseSampler sampler_;
  std::vector<double> heat_;
  std::vector<double> r2_;
};

inline SolutionField solve_u(const CovarianceModel& m, const GridSpec& g, std::uint32_t replica,
                             const Options& opt = {}) {
  return PhysicalSolver(m, g).solve(replica, opt);
}

/**
 * Chirp-z evaluation along one axis: maps FFT-ordered coefficients c_k of a
 * periodic grid function to G(alpha x_n) convolved with p_sigma, i.e.
 * G_n = sum_{|k| <= M/2} c_k (-1)^k e^{-i pi k alpha} e^{-sigma kappa_k^2/2} w^{kn} / M
 * with w = e^{2 pi i alpha / M} and the Nyquist coefficient split evenly
 * between k = +-M/2.
 */
class AxisChirp {
 public:
  AxisChirp(int M, double L, double alpha, double sigma, const fft::ComplexFft& big) : M_(M) {
    const int P = 2 * M;
    const double pi = std::numbers::pi;
    const double dk = 2.0 * pi / L;
    pre_.resize(M + 1);
    for (int kp = 0; kp <= M; ++kp) {
      const int k = kp - M / 2;
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      const double damp = std::exp(-0.5 * sigma * dk * dk * k * k);
      const double phase = -pi * k * alpha + pi * alpha * static_cast<double>(k) * k / M;
      pre_[kp] = sign * damp / M * Complex(std::cos(phase), std::sin(phase));
    }
    std::vector<Complex> h(P);
    for (int m = -M / 2; m < 3 * M / 2; ++m) {
      const double ph = -pi * alpha * static_cast<double>(m) * m / M;
      h[(m + P) % P] = Complex(std::cos(ph), std::sin(ph));
    }
    big.forward(h, hfft_);
    post_.resize(M);
    for (int n = 0; n < M; ++n) {
      const double ph = pi * alpha * static_cast<double>(n) * n / M;
      post_[n] = Complex(std::cos(ph), std::sin(ph)) / static_cast<double>(P);
    }
  }

  /// in: M coefficients in FFT order (stride `is`); out: M values (stride `os`).
  void apply(const Complex* in, std::size_t is, Complex* out, std::size_t os, const fft::ComplexFft& big,
             std::vector<Complex>& a, std::vector<Complex>& z) const {
    const int M = M_, P = 2 * M;
    a.assign(P, Complex(0.0, 0.0));
    for (int kp = 0; kp <= M; ++kp) {
      const int k = kp - M / 2;
      const int fi = (k + M) % M;
      Complex c = in[fi * is];
      if (kp == 0 || kp == M) c *= 0.5;
      a[kp] = c * pre_[kp];
    }
    big.forward(a, z);
    for (int p = 0; p < P; ++p) z[p] *= hfft_[p];
    big.backward(z, a);
    for (int n = 0; n < M; ++n) out[n * os] = post_[n] * a[n + M / 2];
  }

 private:
  int M_;
  std::vector<Complex> pre_, hfft_, post_;
};

/// Direct Volterra marching of U with cached chirp-z kernels per time pair.
class VolterraSolver {
 public:
  VolterraSolver(const CovarianceModel& m, const GridSpec& g) : model_(m), grid_(g), sampler_(m, g), big_(2 * g.M) {
    check_model(m, g);
    if (!(g.t0 > 0.0)) throw DomainError("solve_U_volterra: the initial offset t0 must be positive");
    const std::size_t pairs = static_cast<std::size_t>(g.J) * (g.J + 1) / 2;
    const double bytes = static_cast<double>(pairs) * (4.0 * g.M + 1.0) * sizeof(Complex);
    cache_ = bytes < 1.5e9;
    if (cache_) {
      chirps_.reserve(pairs);
      for (int j = 1; j <= g.J; ++j)
        for (int i = 0; i < j; ++i) chirps_.push_back(make_chirp(i, j));
    }
  }

  const GridSpec& grid() const { return grid_; }

  /// Spectrum of U_i dW_i (half spectrum of the real product field).
  std::vector<Complex> source_spectrum(const std::vector<double>& Ui, std::uint32_t replica, int i,
                                       double noise_scale) const {
    std::vector<double> w, prod(grid_.cells());
    std::vector<Complex> work, spec;
    sampler_.sample_into(replica, i, work, w);
    for (std::size_t n = 0; n < prod.size(); ++n) prod[n] = Ui[n] * noise_scale * w[n];
    sampler_.plan().forward(prod, spec);
    return spec;
  }

  /// Work buffers reused across add_pair calls within one solve.
  struct PairScratch {
    std::vector<Complex> a, z, full, out;
  };

  /// Adds Re K_ij[g] to `acc`, where `ghat` is the half spectrum of g on the grid.
  void add_pair(int i, int j, const std::vector<Complex>& ghat, std::vector<double>& acc) const {
    PairScratch scratch;
    add_pair(i, j, ghat, acc, scratch);
  }

  void add_pair(int i, int j, const std::vector<Complex>& ghat, std::vector<double>& acc, PairScratch& s) const {
    const GridSpec& g = grid_;
    const int M = g.M, d = g.d;
    std::vector<Complex>& a = s.a;
    std::vector<Complex>& z = s.z;
    std::optional<AxisChirp> local;
    if (!cache_) local.emplace(make_chirp(i, j));
    const AxisChirp& ch = cache_ ? chirps_[pair_index(i, j)] : *local;
    if (d == 1) {
      std::vector<Complex>& full = s.full;
      std::vector<Complex>& out = s.out;
      full.resize(M);
      out.resize(M);
      for (int k = 0; k <= M / 2; ++k) full[k] = ghat[k];
      for (int k = M / 2 + 1; k < M; ++k) full[k] = std::conj(ghat[M - k]);
      ch.apply(full.data(), 1, out.data(), 1, big_, a, z);
      for (int n = 0; n < M; ++n) acc[n] += out[n].real();
      return;
    }
    std::vector<Complex> full = expand_hermitian(ghat);
    std::vector<Complex> line_in(M), line_out(M);
    for (int axis = d - 1; axis >= 0; --axis) {
      std::size_t stride = 1;
      for (int b = axis + 1; b < d; ++b) stride *= M;
      const std::size_t total = full.size();
      for (std::size_t base = 0; base < total; ++base) {
        if ((base / stride) % M != 0) continue;
        ch.apply(full.data() + base, stride, line_out.data(), 1, big_, a, z);
        for (int n = 0; n < M; ++n) full[base + n * stride] = line_out[n];
      }
    }
    for (std::size_t n = 0; n < acc.size(); ++n) acc[n] += full[n].real();
  }

  SolutionField solve(std::uint32_t replica, const Options& opt = {}) const {
    const GridSpec& g = grid_;
    const std::size_t n = g.cells();
    std::vector<std::vector<Complex>> sources;
    sources.reserve(g.J);
    std::vector<double> U(n, 1.0);
    sources.push_back(source_spectrum(U, replica, 0, opt.noise_scale));
    PairScratch scratch;
    for (int j = 1; j <= g.J; ++j) {
      std::fill(U.begin(), U.end(), 1.0);
      for (int i = 0; i < j; ++i) add_pair(i, j, sources[i], U, scratch);
      double mx = 0.0;
      for (double v : U) mx = std::max(mx, std::abs(v));
      if (!(mx <= opt.abort_bound))
        throw AbortedReplicaError("solve_U_volterra: max |U| exceeded the instability bound", j);
      if (opt.observer) opt.observer(j, g.time(j), U);
      if (j < g.J) sources.push_back(source_spectrum(U, replica, j, opt.noise_scale));
    }
    SolutionField f;
    f.grid = g;
    f.t = g.t_end;
    f.replica = replica;
    f.scheme = "volterra";
    f.U = std::move(U);
    std::size_t neg = 0;
    for (double v : f.U) neg += v < 0.0;
    f.negative_fraction = static_cast<double>(neg) / n;
    return f;
  }

  /// One Picard sweep: U_next(t_j) = 1 + sum_{i<j} K_ij[U_prev(t_i) dW_i] for all j.
  std::vector<std::vector<double>> picard_sweep(const std::vector<std::vector<double>>& prev,
                                                std::uint32_t replica) const {
    const GridSpec& g = grid_;
    std::vector<std::vector<Complex>> sources;
    for (int i = 0; i < g.J; ++i) sources.push_back(source_spectrum(prev[i], replica, i, 1.0));
    std::vector<std::vector<double>> next(g.J + 1, std::vector<double>(g.cells(), 1.0));
    for (int j = 1; j <= g.J; ++j)
      for (int i = 0; i < j; ++i) add_pair(i, j, sources[i], next[j]);
    return next;
  }

 private:
  std::size_t pair_index(int i, int j) const { return static_cast<std::size_t>(j - 1) * j / 2 + i; }

  AxisChirp make_chirp(int i, int j) const {
    const double ti = grid_.time(i), tj = grid_.time(j);
    return AxisChirp(grid_.M, grid_.L, ti / tj, ti * (tj - ti) / tj, big_);
  }

  std::vector<Complex> expand_hermitian(const std::vector<Complex>& half) const {
    const int M = grid_.M, d = grid_.d;
    const std::size_t H = M / 2 + 1;
    std::vector<Complex> full(grid_.cells());
    for (std::size_t idx = 0; idx < full.size(); ++idx) {
      const std::size_t c = idx % M;
      const std::size_t outer = idx / M;
      if (c < H) {
        full[idx] = half[outer * H + c];
      } else {
        std::size_t rem = outer, mo = 0, stride = 1;
        for (int a = 1; a < d; ++a) {
          mo += ((M - rem % M) % M) * stride;
          rem /= M;
          stride *= M;
        }
        full[idx] = std::conj(half[mo * H + (M - c)]);
      }
    }
    return full;
  }

  CovarianceModel model_;
  GridSpec grid_;
  noise::NoiseSampler sampler_;
  fft::ComplexFft big_;
  bool cache_ = false;
  std::vector<AxisChirp> chirps_;
};

inline SolutionField solve_U_volterra(const CovarianceModel& m, const GridSpec& g, std::uint32_t replica,
                                      const Options& opt = {}) {
  return VolterraSolver(m, g).solve(replica, opt);
}

/// U_0 = 1, U_1, ..., U_n at t_end for one noise realization.
inline std::vector<SolutionField> picard_iterates(const CovarianceModel& m, const GridSpec& g, std::uint32_t replica,
                                                  int n_iter) {
  if (n_iter < 1) throw DomainError("picard_iterates: need at least one iteration");
  VolterraSolver vs(m, g);
  std::vector<std::vector<double>> levels(g.J + 1, std::vector<double>(g.cells(), 1.0));
  std::vector<SolutionField> out;
  auto push = [&](const std::vector<double>& U) {
    SolutionField f;
    f.grid = g;
    f.t = g.t_end;
    f.replica = replica;
    f.scheme = "picard";
    f.U = U;
    out.push_back(std::move(f));
  };
  push(levels[g.J]);
  for (int it = 0; it < n_iter; ++it) {
    levels = vs.picard_sweep(levels, replica);
    push(levels[g.J]);
  }
  return out;
}

/**
 * Co-moving scheme: V(s, xi) = U(s, (s/t) xi) on the grid's s nodes (uniform
 * or geometric) starting at t0 with V = 1.  A geometric grid with
 * t0 of order (t/L)^2 reaches the long-range tail of U that window averages
 * over large N depend on; see GridSpec::geometric_box_matched.  Each step applies the heat flow over dT = t^2 (1/s_j - 1/s_{j+1})
 * and multiplies by 1 + Z_j, where Z_j is Gaussian with spectrum
 * S_j(k) = int_{s_j}^{s_{j+1}} e^{-kappa^2 (T_{j+1} - T(r))} (t/r)^d f^(t kappa / r) dr.
 * The integral uses v = t^2/r, on which T = -v.
 */
class CoMovingSolver {
 public:
  CoMovingSolver(const CovarianceModel& m, const GridSpec& g) : model_(m), grid_(g), plan_(g.d, g.M) {
    check_model(m, g);
    if (!(g.t0 > 0.0)) throw DomainError("co-moving scheme: the initial offset t0 must be positive");
    const double t = g.t_end;
    auto k2 = plan_.half_k2();
    std::vector<double> uniq = k2;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<std::size_t> slot(k2.size());
    for (std::size_t i = 0; i < k2.size(); ++i)
      slot[i] = std::lower_bound(uniq.begin(), uniq.end(), k2[i]) - uniq.begin();
    const double dk2 = std::pow(2.0 * std::numbers::pi / g.L, 2);
    const double norm = 1.0 / static_cast<double>(plan_.real_size());
    const double vol = std::pow(g.L, g.d);
    heat_.resize(g.J);
    amp_.resize(g.J);
    std::vector<double> S(uniq.size());
    for (int j = 0; j < g.J; ++j) {
      const double sj = g.time(j), sj1 = g.time(j + 1);
      const double vj = t * t / sj, vj1 = t * t / sj1;
      for (std::size_t q = 0; q < uniq.size(); ++q) S[q] = step_spectrum(sj, sj1, uniq[q] * dk2);
      heat_[j].resize(k2.size());
      amp_[j].resize(k2.size());
      for (std::size_t i = 0; i < k2.size(); ++i) {
        heat_[j][i] = std::exp(-0.5 * (vj - vj1) * dk2 * k2[i]) * norm;
        amp_[j][i] = std::sqrt(std::max(S[slot[i]], 0.0) / vol);
      }
    }
  }

  const GridSpec& grid() const { return grid_; }

  /// Variance of Z_j at a point: L^{-d} sum_k S_j(k), summed over all steps.
  double injected_variance() const {
    double s = 0.0;
    for (int j = 0; j < grid_.J; ++j) {
      const std::size_t H = grid_.M / 2 + 1;
      for (std::size_t i = 0; i < amp_[j].size(); ++i) {
        const std::size_t c = i % H;
        const double mult = (c == 0 || c == H - 1) ? 1.0 : 2.0;
        s += mult * amp_[j][i] * amp_[j][i];
      }
    }
    return s;
  }

  SolutionField solve(std::uint32_t replica, const Options& opt = {}) const {
    const GridSpec& g = grid_;
    const std::size_t n = g.cells();
    std::vector<double> V(n, 1.0), Z;
    std::vector<Complex> spec, work;
    for (int j = 0; j < g.J; ++j) {
      plan_.forward(V, spec);
      for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= heat_[j][k];
      plan_.inverse(spec, V);
      if (opt.noise_scale != 0.0) {
        rng::NormalStream rng(g.master_seed, replica, static_cast<std::uint32_t>(j));
        noise::synthesize(plan_, amp_[j], rng, work, Z);
        double mx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          V[i] *= 1.0 + opt.noise_scale * Z[i];
          mx = std::max(mx, std::abs(V[i]));
        }
        if (!(mx <= opt.abort_bound))
          throw AbortedReplicaError("co-moving scheme: max |U| exceeded the instability bound", j + 1);
      }
      if (opt.observer) opt.observer(j + 1, g.time(j + 1), V);
    }
    SolutionField f;
    f.grid = g;
    f.t = g.t_end;
    f.replica = replica;
    f.scheme = "comoving";
    std::size_t neg = 0;
    for (double v : V) neg += v < 0.0;
    f.negative_fraction = static_cast<double>(neg) / n;
    f.U = std::move(V);
    return f;
  }

 private:
  double step_spectrum(double s0, double s1, double kappa2) const {
    const double t = grid_.t_end;
    const int d = grid_.d;
    if (kappa2 == 0.0) {
      auto f0 = [&](double r) {
        return std::pow(t / r, d) * noise::zero_cell_average(model_, grid_.L * r / t);
      };
      return quad::gauss20(f0, s0, s1);
    }
    const double a = t * t / s1, b = t * t / s0;
    const double kappa = std::sqrt(kappa2);
    const double b_eff = std::min(b, a + 60.0 / kappa2);
    auto F = [&](double v) {
      const double rho = kappa * v / t;
      const double fh = covariance::radial_spectral(model_, rho);
      return std::exp(-kappa2 * (v - a)) * std::pow(v / t, d) * fh * t * t / (v * v);
    };
    const int panels = std::clamp(static_cast<int>(std::ceil(kappa2 * (b_eff - a) / 6.0)), 1, 16);
    return quad::panel_gauss(F, a, b_eff, panels);
  }

  CovarianceModel model_;
  GridSpec grid_;
  fft::RealFft plan_;
  std::vector<std::vector<double>> heat_, amp_;
};

/**
 * Feynman-Kac estimate of U^eps(t,x) for the noise realization of `replica`:
 * the average over n_bridges Brownian bridges B (pinned at 0 at times 0 and t)
 * of exp(sum_j (p_eps * dW_j)(x + B_{s_j}) dx^d-weighted - (1/2)(t - t0) f_eps(0)),
 * with f_eps(0) = smoothed_covariance(model, 2 eps, 0).  The compensator uses
 * the span t - t0 actually covered by the stored increments.  The bridges are
 * drawn from the stream (seed, replica, bridge_stream, Bridge).
 */
inline double feynman_kac_estimate(const CovarianceModel& m, double t, const Point& x, double eps, int n_bridges,
                                   const GridSpec& g, std::uint32_t replica, std::uint32_t bridge_stream = 0,
                                   double noise_scale = 1.0) {
  if (n_bridges < 1) throw DomainError("feynman_kac_estimate: need at least one bridge");
  if (!(eps > 0.0)) throw DomainError("feynman_kac_estimate: eps must be positive");
  check_model(m, g);
  if (static_cast<int>(x.size()) != g.d) throw DomainError("feynman_kac_estimate: point dimension mismatch");
  if (std::abs(t - g.t_end) > 1e-12 * t) throw DomainError("feynman_kac_estimate: t must equal the grid end time");
  const int d = g.d, M = g.M;
  const double dx = g.dx(), cell = std::pow(dx, d);
  const double sd_eps = std::sqrt(eps);
  const int reach = static_cast<int>(std::ceil(7.0 * sd_eps / dx)) + 1;
  noise::NoiseSampler sampler(m, g);
  rng::NormalStream br(g.master_seed, replica, bridge_stream, rng::Purpose::Bridge);
  std::vector<double> pos(static_cast<std::size_t>(n_bridges) * d, 0.0), expo(n_bridges, 0.0);
  double s_prev = 0.0;
  auto advance = [&](double s_next) {
    // Bridge pinned at 0 at times 0 and t: X(s') | X(s) has mean X(s)(t-s')/(t-s).
    const double ratio = (t - s_next) / (t - s_prev);
    const double var = (s_next - s_prev) * ratio;
    for (auto& p : pos) p = p * ratio + std::sqrt(var) * br.normal();
    s_prev = s_next;
  };
  std::vector<double> w;
  std::vector<Complex> work;
  std::vector<double> wgt1;
  for (int j = 0; j < g.J; ++j) {
    advance(g.time(j));
    sampler.sample_into(replica, j, work, w);
    for (int b = 0; b < n_bridges; ++b) {
      // Nearest-cell window around z = x + B, periodic wrap.
      std::vector<int> base(d);
      std::vector<std::vector<double>> wt(d);
      std::vector<std::vector<int>> ix(d);
      for (int a = 0; a < d; ++a) {
        const double z = x[a] + pos[static_cast<std::size_t>(b) * d + a];
        const double u = (z + 0.5 * g.L) / dx;
        const int c = static_cast<int>(std::floor(u));
        for (int o = -reach; o <= reach + 1; ++o) {
          const double y = (c + o) * dx - 0.5 * g.L;
          const double e = z - y;
          wt[a].push_back(std::exp(-0.5 * e * e / eps) / std::sqrt(2.0 * std::numbers::pi * eps));
          ix[a].push_back(((c + o) % M + M) % M);
        }
      }
      double acc = 0.0;
      const int span = 2 * reach + 2;
      if (d == 1) {
        for (int o = 0; o < span; ++o) acc += wt[0][o] * w[ix[0][o]];
      } else if (d == 2) {
        for (int o = 0; o < span; ++o)
          for (int q = 0; q < span; ++q) acc += wt[0][o] * wt[1][q] * w[static_cast<std::size_t>(ix[0][o]) * M + ix[1][q]];
      } else {
        for (int o = 0; o < span; ++o)
          for (int q = 0; q < span; ++q)
            for (int r = 0; r < span; ++r)
              acc += wt[0][o] * wt[1][q] * wt[2][r] *
                     w[(static_cast<std::size_t>(ix[0][o]) * M + ix[1][q]) * M + ix[2][r]];
      }
      expo[b] += noise_scale * acc * cell;
    }
  }
  const double comp = 0.5 * (g.t_end - g.t0) * covariance::smoothed_covariance(m, 2.0 * eps, Point(d, 0.0));
  double mean = 0.0;
  for (double e : expo) mean += std::exp(e);
  return std::exp(-comp) * (mean / n_bridges);
}

}  // namespace solver
}  // namespace pam
