/**
 * @file fft.hpp
 * @brief FFTW plan wrappers for real fields on an M^d periodic grid.
 *
 * Plans are created with FFTW_ESTIMATE under a global mutex (the FFTW
 * planner is not thread-safe) and executed through the new-array interface,
 * so one plan object may serve any number of threads and buffers.
 */
#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

#include "pam/errors.hpp"

namespace pam::fft {

using Complex = std::complex<double>;

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// Real-to-complex and complex-to-real transforms of an M^d real array.
class RealFft {
 public:
  RealFft(int d, int M) : d_(d), M_(M) {
    if (d < 1 || d > 3) throw DomainError("RealFft: dimension must be 1, 2 or 3");
    if (M < 2 || (M & (M - 1)) != 0) throw DomainError("RealFft: M must be a power of two");
    std::vector<int> n(d, M);
    real_size_ = 1;
    for (int i = 0; i < d; ++i) real_size_ *= M;
    half_size_ = real_size_ / M * (M / 2 + 1);
    std::vector<double> r(real_size_);
    std::vector<Complex> c(half_size_);
    std::lock_guard<std::mutex> lock(planner_mutex());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft_r2c(d, n.data(), r.data(), reinterpret_cast<fftw_complex*>(c.data()), flags);
    inv_ = fftw_plan_dft_c2r(d, n.data(), reinterpret_cast<fftw_complex*>(c.data()), r.data(),
                             flags | FFTW_DESTROY_INPUT);
    if (!fwd_ || !inv_) throw NumericalError("RealFft: plan creation failed");
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }

  int dimension() const { return d_; }
  int points() const { return M_; }
  std::size_t real_size() const { return real_size_; }
  /// Number of complex coefficients in the Hermitian half spectrum.
  std::size_t half_size() const { return half_size_; }

  /// Unnormalized forward transform sum_n x_n e^{-2 pi i k n / M}.
  void forward(std::vector<double>& in, std::vector<Complex>& out) const {
    out.resize(half_size_);
    fftw_execute_dft_r2c(fwd_, in.data(), reinterpret_cast<fftw_complex*>(out.data()));
  }

  /// Unnormalized inverse transform sum_k X_k e^{+2 pi i k n / M}; destroys `in`.
  void inverse(std::vector<Complex>& in, std::vector<double>& out) const {
    out.resize(real_size_);
    fftw_execute_dft_c2r(inv_, reinterpret_cast<fftw_complex*>(in.data()), out.data());
  }

  /// Signed integer frequency of FFT index i.
  int frequency(int i) const { return i < M_ / 2 ? i : i - M_; }

  /// Squared integer wavenumber |k|^2 for each half-spectrum entry.
  std::vector<double> half_k2() const {
    std::vector<double> k2(half_size_);
    const int H = M_ / 2 + 1;
    std::size_t idx = 0;
    if (d_ == 1) {
      for (int a = 0; a < H; ++a) k2[idx++] = static_cast<double>(a) * a;
    } else if (d_ == 2) {
      for (int a = 0; a < M_; ++a)
        for (int b = 0; b < H; ++b) {
          const double ka = frequency(a);
          k2[idx++] = ka * ka + static_cast<double>(b) * b;
        }
    } else {
      for (int a = 0; a < M_; ++a)
        for (int b = 0; b < M_; ++b)
          for (int c = 0; c < H; ++c) {
            const double ka = frequency(a), kb = frequency(b);
            k2[idx++] = ka * ka + kb * kb + static_cast<double>(c) * c;
          }
    }
    return k2;
  }

 private:
  int d_, M_;
  std::size_t real_size_ = 0, half_size_ = 0;
  fftw_plan fwd_ = nullptr, inv_ = nullptr;
};

/// One-dimensional complex transforms of fixed length n.
class ComplexFft {
 public:
  explicit ComplexFft(int n) : n_(n) {
    std::vector<Complex> a(n), b(n);
    std::lock_guard<std::mutex> lock(planner_mutex());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    auto* pa = reinterpret_cast<fftw_complex*>(a.data());
    auto* pb = reinterpret_cast<fftw_complex*>(b.data());
    fwd_ = fftw_plan_dft_1d(n, pa, pb, FFTW_FORWARD, flags);
    inv_ = fftw_plan_dft_1d(n, pa, pb, FFTW_BACKWARD, flags);
    if (!fwd_ || !inv_) throw NumericalError("ComplexFft: plan creation failed");
  }
  ComplexFft(const ComplexFft&) = delete;
  ComplexFft& operator=(const ComplexFft&) = delete;
  ~ComplexFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  int size() const { return n_; }
  void forward(const std::vector<Complex>& in, std::vector<Complex>& out) const { run(fwd_, in, out); }
  void backward(const std::vector<Complex>& in, std::vector<Complex>& out) const { run(inv_, in, out); }

 private:
  void run(fftw_plan p, const std::vector<Complex>& in, std::vector<Complex>& out) const {
    out.resize(n_);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
  }
  int n_;
  fftw_plan fwd_ = nullptr, inv_ = nullptr;
};

}  // namespace pam::fft
