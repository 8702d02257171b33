/**
 * @file noise.hpp
 * @brief Space-correlated, time-white Gaussian noise on a periodic grid.
 *
 * The periodized covariance of a field is (1/L^d) sum_k S_k e^{i 2 pi k x / L}
 * with S_k = f^(2 pi k / L) on the M^d lattice of retained frequencies.  A
 * step increment W_j has covariance dt * periodized f and is synthesized
 * directly in the Hermitian half spectrum, so the inverse transform is real
 * by construction.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "pam/covariance.hpp"
#include "pam/fft.hpp"
#include "pam/philox.hpp"
#include "pam/quadrature.hpp"

namespace pam {

/// Space-time discretization of (t0, t_end] x [-L/2, L/2)^d.
/// Placement of the J + 1 time nodes between t0 and t_end.
enum class TimeSpacing { Uniform, Geometric };

struct GridSpec {
  int d = 1;
  double L = 1.0;
  int M = 64;
  double t0 = 0.0;
  double t_end = 1.0;
  int J = 1;
  std::uint64_t master_seed = 0;
  /// Geometric nodes t0 (t_end/t0)^{j/J} are accepted by the co-moving scheme only.
  TimeSpacing spacing = TimeSpacing::Uniform;

  double dx() const { return L / M; }
  /// Uniform step (t_end - t0)/J; the mean step for geometric grids.
  double dt() const { return (t_end - t0) / J; }
  double time(int j) const {
    if (spacing == TimeSpacing::Geometric) return j == J ? t_end : t0 * std::pow(t_end / t0, static_cast<double>(j) / J);
    return t0 + j * dt();
  }
  /// Throws unless the time nodes are uniform.
  void require_uniform(const char* who) const {
    if (spacing != TimeSpacing::Uniform) throw DomainError(std::string(who) + ": requires a uniform time grid");
  }
  std::size_t cells() const {
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(M);
    return n;
  }

  /// Throws DomainError if any invariant fails.
  void validate() const {
    if (d < 1 || d > 3) throw DomainError("grid: dimension must be 1, 2 or 3");
    if (M < 2 || (M & (M - 1)) != 0) throw DomainError("grid: M must be a power of two");
    if (!(L > 0.0)) throw DomainError("grid: L must be positive");
    if (!(t0 >= 0.0 && t0 < t_end)) throw DomainError("grid: need 0 <= t0 < t_end");
    if (J < 1) throw DomainError("grid: J must be at least 1");
    if (spacing == TimeSpacing::Geometric && !(t0 > 0.0)) throw DomainError("grid: geometric time nodes need t0 > 0");
  }

  /// Grid whose initial offset is one step of the uniform partition of (0, t_end].
  static GridSpec with_step_offset(int d, double L, int M, double t_end, int J, std::uint64_t seed = 0) {
    GridSpec g{d, L, M, t_end / J, t_end, J, seed};
    g.validate();
    return g;
  }

  /// Grid with geometric time nodes from t0 to t_end (co-moving scheme).
  static GridSpec geometric(int d, double L, int M, double t0, double t_end, int J, std::uint64_t seed = 0) {
    GridSpec g{d, L, M, t0, t_end, J, seed, TimeSpacing::Geometric};
    g.validate();
    return g;
  }

  /// Geometric grid starting at t0 = (t_end / L)^2.  Noise injected before
  /// that time is correlated over co-moving distances beyond the box length
  /// and would be over-counted by the periodic lattice; dropping it loses a
  /// variance of order t_end / L.
  static GridSpec geometric_box_matched(int d, double L, int M, double t_end, int J, std::uint64_t seed = 0) {
    const double t0 = std::min((t_end / L) * (t_end / L), 0.5 * t_end);
    return geometric(d, L, M, t0, t_end, J, seed);
  }
};

/// One time-step noise increment on the grid.
struct NoiseIncrement {
  std::vector<double> values;  ///< Row-major M^d field, cell mass per step.
  int step = 0;
  std::uint32_t replica = 0;
  std::uint64_t seed = 0;
};

namespace noise {

/// int_{S^{d-1}} (max_j |theta_j|)^{-beta} dOmega, the angular factor of
/// int_{[-h,h]^d} |xi|^{beta-d} dxi = h^beta / beta * (this value).
inline double box_angular_factor(double beta, int d) {
  if (d == 1) return 2.0;
  if (d == 2) {
    auto g = [beta](double th) { return std::pow(std::cos(th), -beta); };
    return 8.0 * quad::gauss30(g, 0.0, 0.25 * std::numbers::pi);
  }
  // Octant: polar angle th from the third axis, azimuth ph in [0, pi/4] doubled.
  auto inner = [beta](double ph) {
    const double c = std::cos(ph);
    const double split = std::atan(1.0 / c);
    auto g_axis = [beta](double th) { return std::sin(th) * std::pow(std::cos(th), -beta); };
    auto g_side = [beta, c](double th) { return std::sin(th) * std::pow(std::sin(th) * c, -beta); };
    return quad::gauss30(g_axis, 0.0, split) + quad::gauss30(g_side, split, 0.5 * std::numbers::pi);
  };
  return 16.0 * quad::gauss30(inner, 0.0, 0.25 * std::numbers::pi);
}

/// Average of f^ over the fundamental frequency cell [-pi/L, pi/L]^d, including
/// any atom at zero.
inline double zero_cell_average(const CovarianceModel& m, double L) {
  const int d = m.dimension;
  const double h = std::numbers::pi / L;
  const double cell = std::pow(2.0 * h, d);
  double v = 0.0;
  if (m.kind == CovarianceKind::RieszKernel) {
    const double b = m.riesz_exponent;
    v = m.riesz_constant * std::pow(h, b) / b * box_angular_factor(b, d) / cell;
  } else {
    v = covariance::radial_spectral(m, 0.0);
  }
  return v + m.spectral_atom_at_zero / cell;
}

/// S_k = f^(2 pi k / L) over the full M^d lattice in FFT index order (index i
/// carries frequency i for i < M/2 and i - M otherwise); the k = 0 entry is
/// the cell average.
inline std::vector<double> periodized_spectrum(const CovarianceModel& m, const GridSpec& g) {
  g.validate();
  if (m.dimension != g.d) throw DomainError("periodized_spectrum: dimension mismatch");
  const std::size_t n = g.cells();
  std::vector<double> S(n);
  const double dk = 2.0 * std::numbers::pi / g.L;
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t r = idx;
    double k2 = 0.0;
    for (int j = 0; j < g.d; ++j) {
      const int i = static_cast<int>(r % g.M);
      r /= g.M;
      const int k = i < g.M / 2 ? i : i - g.M;
      k2 += static_cast<double>(k) * k;
    }
    S[idx] = idx == 0 ? zero_cell_average(m, g.L) : covariance::radial_spectral(m, dk * std::sqrt(k2));
  }
  return S;
}

/// Restriction of a full-lattice array (FFT order) to the r2c half spectrum.
inline std::vector<double> half_spectrum(const std::vector<double>& full, int d, int M) {
  const int H = M / 2 + 1;
  std::size_t outer = 1;
  for (int i = 1; i < d; ++i) outer *= static_cast<std::size_t>(M);
  std::vector<double> half(outer * H);
  for (std::size_t o = 0; o < outer; ++o)
    for (int c = 0; c < H; ++c) half[o * H + c] = full[o * M + c];
  return half;
}

/// Linear index of the Hermitian mirror of half-spectrum entry `idx`.
inline std::size_t hermitian_mirror(std::size_t idx, int d, int M) {
  const std::size_t H = M / 2 + 1;
  const std::size_t c = idx % H;
  std::size_t o = idx / H;
  std::size_t mirror_outer = 0, stride = 1;
  std::vector<std::size_t> digits;
  for (int j = 1; j < d; ++j) {
    digits.push_back(o % M);
    o /= M;
  }
  for (std::size_t j = 0; j < digits.size(); ++j) {
    mirror_outer += ((M - digits[j]) % M) * stride;
    stride *= M;
  }
  return mirror_outer * H + c;
}

/**
 * Fills `out` with a real Gaussian field whose covariance is
 * sum_k amp_k^2 e^{i 2 pi k (x - y)/L}; `amp` lives on the half spectrum.
 * Consumes normals from `rng` in half-spectrum order.
 */
inline void synthesize(const fft::RealFft& plan, const std::vector<double>& amp, rng::NormalStream& rng,
                       std::vector<fft::Complex>& work, std::vector<double>& out) {
  const int d = plan.dimension(), M = plan.points();
  const std::size_t H = M / 2 + 1;
  work.assign(plan.half_size(), fft::Complex(0.0, 0.0));
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  for (std::size_t idx = 0; idx < work.size(); ++idx) {
    const std::size_t c = idx % H;
    const bool edge = c == 0 || c == H - 1;
    if (!edge) {
      const double re = rng.normal(), im = rng.normal();
      work[idx] = amp[idx] * kInvSqrt2 * fft::Complex(re, im);
      continue;
    }
    const std::size_t mir = hermitian_mirror(idx, d, M);
    if (mir == idx) {
      work[idx] = amp[idx] * rng.normal();
    } else if (mir > idx) {
      const double re = rng.normal(), im = rng.normal();
      work[idx] = amp[idx] * kInvSqrt2 * fft::Complex(re, im);
    } else {
      work[idx] = std::conj(work[mir]);
    }
  }
  plan.inverse(work, out);
}

/// Reusable generator of noise increments for one model and grid.
class NoiseSampler {
 public:
  NoiseSampler(const CovarianceModel& m, const GridSpec& g) : model_(m), grid_(g), plan_(g.d, g.M) {
    if (!covariance::dalang_satisfied(m)) throw DomainError("noise: Dalang condition fails for this model");
    g.require_uniform("noise sampler");
    const double scale = g.dt() / std::pow(g.L, g.d);
    auto S = half_spectrum(periodized_spectrum(m, g), g.d, g.M);
    amp_.resize(S.size());
    for (std::size_t i = 0; i < S.size(); ++i) amp_[i] = std::sqrt(std::max(S[i], 0.0) * scale);
  }

  const GridSpec& grid() const { return grid_; }
  const fft::RealFft& plan() const { return plan_; }

  /// Increment for (replica, step) under the grid master seed.
  NoiseIncrement sample(std::uint32_t replica, int step) const {
    NoiseIncrement inc;
    inc.step = step;
    inc.replica = replica;
    inc.seed = grid_.master_seed;
    std::vector<fft::Complex> work;
    sample_into(replica, step, work, inc.values);
    return inc;
  }

  /// Same draw as sample(), written into caller-owned buffers.
  void sample_into(std::uint32_t replica, int step, std::vector<fft::Complex>& work, std::vector<double>& out) const {
    rng::NormalStream rng(grid_.master_seed, replica, static_cast<std::uint32_t>(step));
    if (model_.kind == CovarianceKind::WhiteNoise) {
      const double sd = std::sqrt(model_.mass * grid_.dt() / std::pow(grid_.dx(), grid_.d));
      out.resize(grid_.cells());
      for (auto& v : out) v = sd * rng.normal();
      return;
    }
    synthesize(plan_, amp_, rng, work, out);
  }

 private:
  CovarianceModel model_;
  GridSpec grid_;
  fft::RealFft plan_;
  std::vector<double> amp_;
};

/// Single increment; builds a sampler per call, prefer NoiseSampler in loops.
inline NoiseIncrement sample_increment(const CovarianceModel& m, const GridSpec& g, std::uint32_t replica, int step) {
  return NoiseSampler(m, g).sample(replica, step);
}

}  // namespace noise
}  // namespace pam
