/**
 * @file test_covariance.cpp
 * @brief Unit tests for covariance models, Upsilon, R(f) and smoothed
 *        covariances.
 */
#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "pam/covariance.hpp"

using namespace pam;
using namespace pam::covariance;
using Catch::Approx;
constexpr double kPi = std::numbers::pi;

TEST_CASE("spectral density examples") {
  CHECK(spectral_density(CovarianceModel::white_noise(1, 2.0), {3.7}) == 2.0);
  CHECK(spectral_density(CovarianceModel::gaussian(2), {0.0, 0.0}) == 1.0);
  const auto rz = CovarianceModel::riesz(2, 1.0);
  CHECK(spectral_density(rz, {2.0, 0.0}) == Approx(rz.riesz_constant / 2.0).epsilon(1e-15));
  CHECK_THROWS_AS(spectral_density(rz, {0.0, 0.0}), SingularityError);
}

TEST_CASE("Riesz constant: positivity, range and x-space/spectral consistency") {
  CHECK_THROWS_AS(riesz_constant(1, 1.0), DomainError);
  CHECK_THROWS_AS(riesz_constant(2, 2.0), DomainError);
  CHECK_THROWS_AS(riesz_constant(3, 0.0), DomainError);
  for (int d = 1; d <= 3; ++d)
    for (double b = 0.1; b < std::min(2.0, 1.0 * d); b += 0.2) CHECK(riesz_constant(d, b) > 0.0);
  struct Case { int d; double beta; double r; };
  for (const Case c : {Case{1, 0.5, 1.0}, Case{2, 1.0, 0.5}, Case{2, 1.0, 2.0}, Case{2, 1.5, 1.0}, Case{3, 1.2, 0.7}}) {
    const auto m = CovarianceModel::riesz(c.d, c.beta);
    const double spectral = smoothed_covariance(m, c.r, Point(c.d, 0.0));
    const double xspace = oracle::riesz_smoothed_xspace(c.d, c.beta, c.r);
    CHECK(std::abs(spectral / xspace - 1.0) <= 1e-6);
  }
}

TEST_CASE("smoothed covariance examples") {
  const auto w = CovarianceModel::white_noise(1, 1.5);
  CHECK(smoothed_covariance(w, 0.4, {0.3}) == Approx(1.5 * kernels::heat_kernel(0.4, {0.3})).epsilon(1e-9));
  CHECK(smoothed_covariance(CovarianceModel::gaussian(1), 0.5, {0.0}) ==
        Approx(1.0 / std::sqrt(3.0 * kPi)).epsilon(1e-10));
  const auto rz = CovarianceModel::riesz(2, 1.0);
  CHECK(smoothed_covariance(rz, 1.0, {0.0, 0.0}) ==
        Approx(rz.riesz_constant * std::sqrt(kPi / 2.0) / (2.0 * kPi)).epsilon(1e-9));
  CHECK_THROWS_AS(smoothed_covariance(rz, 0.0, {0.0, 0.0}), DomainError);
}

TEST_CASE("smoothed covariance is maximal at the origin and matches closed forms") {
  const CovarianceModel models[] = {CovarianceModel::gaussian(2), CovarianceModel::riesz(2, 0.5),
                                    CovarianceModel::riesz(1, 0.5), CovarianceModel::riesz(3, 1.5),
                                    CovarianceModel::white_noise(1, 1.0)};
  for (const auto& m : models) {
    const int d = m.dimension;
    const double r = 0.8;
    const double c0 = smoothed_covariance(m, r, Point(d, 0.0));
    for (double rho : {0.1, 0.9, 2.5, 7.0, 20.0}) {
      Point x(d, 0.0);
      x[0] = rho;
      const double v = smoothed_covariance(m, r, x);
      CHECK(v <= c0 * (1 + 1e-12));
      INFO(kind_name(m.kind) << " d=" << d << " rho=" << rho);
      CHECK(smoothed_covariance_radial(m, r, rho) == Approx(v).epsilon(1e-6).margin(1e-14));
    }
  }
}

TEST_CASE("Upsilon closed forms and monotonicity") {
  const auto w1 = CovarianceModel::white_noise(1, 1.0);
  for (double lam : {0.25, 1.0, 4.0}) CHECK(std::abs(upsilon(w1, lam) * 2.0 * std::sqrt(lam) - 1.0) <= 1e-8);
  CHECK(upsilon(w1, 1.0) == Approx(0.5).epsilon(1e-10));
  CHECK(std::isinf(upsilon(CovarianceModel::white_noise(2, 1.0), 1.0)));
  const auto rz = CovarianceModel::riesz(2, 1.0);
  CHECK(upsilon(rz, 1.0) == Approx(rz.riesz_constant / 4.0).epsilon(1e-9));
  for (const auto& m : {CovarianceModel::riesz(3, 1.5), CovarianceModel::riesz(1, 0.3)}) {
    const double b = m.riesz_exponent;
    const int d = m.dimension;
    const double lam = 2.3;
    const double closed = m.riesz_constant * fejer::sphere_area(d) / std::pow(2 * kPi, d) *
                          std::pow(lam, 0.5 * b - 1.0) * kPi / (2.0 * std::sin(kPi * b / 2.0));
    CHECK(upsilon(m, lam) == Approx(closed).epsilon(1e-9));
  }
  const auto g = CovarianceModel::gaussian(2);
  double prev = upsilon(g, 0.01);
  for (double lam = 0.02; lam < 1e4; lam *= 2.0) {
    const double v = upsilon(g, lam);
    CHECK(v <= prev);
    prev = v;
  }
  CHECK(prev < 1e-3);
  CHECK_THROWS_AS(upsilon(g, 0.0), DomainError);
}

TEST_CASE("Dalang and ergodicity predicates") {
  CHECK(dalang_satisfied(CovarianceModel::white_noise(1, 1.0)));
  CHECK_FALSE(dalang_satisfied(CovarianceModel::white_noise(2, 1.0)));
  CHECK(dalang_satisfied(CovarianceModel::riesz(3, 1.5)));
  CHECK(dalang_satisfied(CovarianceModel::gaussian(3)));
  CHECK(ergodic_condition(CovarianceModel::white_noise(1, 1.0)));
  CHECK(ergodic_condition(CovarianceModel::riesz(2, 0.5)));
  const auto constant_field = CovarianceModel::tabulated(
      1, [](double) { return 0.0; }, 1.0, false, 2.0 * kPi);
  CHECK_FALSE(ergodic_condition(constant_field));
}

TEST_CASE("R(f) finiteness criteria and Gaussian value") {
  CHECK(std::isinf(r_functional(CovarianceModel::gaussian(1))));
  CHECK(std::isinf(r_functional(CovarianceModel::white_noise(1, 1.0))));
  CHECK(std::isinf(r_functional(CovarianceModel::riesz(2, 0.5))));
  CHECK(std::isinf(r_functional(CovarianceModel::riesz(2, 1.5))));
  CHECK(std::isinf(r_functional(CovarianceModel::riesz(3, 1.0))));
  const double R = r_functional(CovarianceModel::gaussian(2));
  const double oracle_R = oracle::r_functional_gaussian_2d();
  CHECK(R == Approx(oracle_R).epsilon(1e-6));
  // Regression constant from the brute-force separable oracle.
  CHECK(R == Approx(0.593070).epsilon(1e-5));
  const auto tab = CovarianceModel::tabulated(
      2, [](double rho) { return std::exp(-0.5 * rho * rho); }, 1.0, true);
  CHECK(r_functional(tab) == Approx(R).epsilon(1e-8));
}

TEST_CASE("box-mass sandwich bounds R(f) for the Gaussian kernel in d=2") {
  const double R = r_functional(CovarianceModel::gaussian(2));
  const double upper = oracle::box_mass_integral_gaussian_2d();
  CHECK(R < upper);
  CHECK(std::pow(2.0, 1 - 2 * 2) * upper < R);
}

TEST_CASE("sinc-product integral is comparable to 1/|z|") {
  std::mt19937_64 gen(11);
  std::normal_distribution<double> Z;
  for (int d = 1; d <= 3; ++d) {
    for (double nz = 1e-2; nz <= 1e2 * 1.0001; nz *= std::sqrt(10.0)) {
      Point z(d);
      double n2 = 0;
      for (auto& v : z) { v = Z(gen); n2 += v * v; }
      for (auto& v : z) v *= nz / std::sqrt(n2);
      const double ratio = oracle::sinc_product_integral(z) * nz;
      CHECK(ratio > 0.1);
      CHECK(ratio < 10.0);
    }
  }
}
