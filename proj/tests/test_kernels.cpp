#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "helpers.hpp"
#include "ppnet/errors.hpp"
#include "ppnet/kernels.hpp"

using namespace ppnet;

namespace {

constexpr double kPi = std::numbers::pi;

double energy(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

// Signed frequency (cpd) of the largest naive-DFT coefficient, scanning every bin.
std::pair<double, double> naive_peak(const std::vector<double>& taps, int n, double fs) {
  double best = -1.0;
  std::pair<double, double> at{0, 0};
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      std::complex<double> s = 0.0;
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
          s += taps[r * n + c] * std::polar(1.0, -2.0 * kPi * (double(u) * r + double(v) * c) / n);
      const double m = std::abs(s);
      if (m > best + 1e-12) {
        best = m;
        const int su = u > n / 2 ? u - n : u;
        const int sv = v > n / 2 ? v - n : v;
        at = {sv * fs / n, su * fs / n};  // (fx, fy)
      }
    }
  return at;
}

}  // namespace

TEST_CASE("isotropic Gaussian has 4-fold symmetry and unit energy") {
  for (int size : {1, 5, 21, 40 + 1}) {
    const auto k = gaussian_kernel({7.0, 7.0}, size, 1.0 / 32.0);
    const auto s = k.slice(0, 0);
    CHECK(energy(s) == doctest::Approx(1.0).epsilon(1e-12));
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        const double v = s[r * size + c];
        CHECK(v == doctest::Approx(s[c * size + (size - 1 - r)]).epsilon(1e-12));
        CHECK(v == doctest::Approx(s[(size - 1 - r) * size + (size - 1 - c)]).epsilon(1e-12));
      }
  }
  CHECK(gaussian_kernel({3.0, 9.0}, 1, 0.1).slice(0, 0)[0] == 1.0);
}

TEST_CASE("Gaussian taps match pointwise evaluation") {
  const int n = 21;
  const double h = 1.0 / 32.0;
  const auto k = gaussian_kernel({25.0, 25.0}, n, h);
  std::vector<double> ref(n * n);
  double e = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double x = (c - 10) * h, y = (r - 10) * h;
      ref[r * n + c] = std::exp(-0.5 * 625.0 * (x * x + y * y));
      e += ref[r * n + c] * ref[r * n + c];
    }
  for (int i = 0; i < n * n; ++i) CHECK(k.slice(0, 0)[i] == doctest::Approx(ref[i] / std::sqrt(e)).epsilon(1e-12));
}

TEST_CASE("DoG: zero DC, unit energy and rejection near K = 1") {
  const double h = 1.0 / 96.0;
  for (int size : {17, 21, 41}) {
    for (double K : {1.1, 2.0, 5.0}) {
      const auto k = dog_kernel({1.0 / std::exp(-1.9), K}, ChannelMix::single(), size, h);
      const auto s = k.slice(0, 0);
      double sum = 0.0, asum = 0.0;
      for (double v : s) {
        sum += v;
        asum += std::abs(v);
      }
      CHECK(energy(s) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(sum) <= 1e-9 * asum);
    }
  }
  CHECK_THROWS_AS(dog_profile({10.0, 1.0 + 1e-7}, 11, 0.01), ParameterError);
  CHECK_THROWS_AS(dog_profile({10.0, 0.9}, 11, 0.01), ParameterError);
  CHECK_THROWS_AS(dog_profile({-1.0, 2.0}, 11, 0.01), ParameterError);
}

TEST_CASE("DoG magnitude vanishes as K approaches 1") {
  const auto far = dog_profile({10.0, 2.0}, 21, 0.01);
  const auto near = dog_profile({10.0, 1.0 + 1e-4}, 21, 0.01);
  CHECK(std::sqrt(energy(near)) < 1e-3 * std::sqrt(energy(far)));
}

TEST_CASE("Gabor: zero-frequency limit, odd phase and spectral peak") {
  const double h = 1.0 / 16.0;
  GaborParams g;
  g.gamma_x = 3.0;
  g.gamma_y = 5.0;
  g.theta_env = 0.4;
  g.f = 1e-9;
  const auto lim = gabor_profile(g, 21, h);
  // Rotated Gaussian evaluated directly.
  for (int r = 0; r < 21; ++r)
    for (int c = 0; c < 21; ++c) {
      const double x = (c - 10) * h, y = (r - 10) * h;
      const double xr = x * std::cos(0.4) + y * std::sin(0.4);
      const double yr = -x * std::sin(0.4) + y * std::cos(0.4);
      CHECK(lim[r * 21 + c] == doctest::Approx(std::exp(-0.5 * (9 * xr * xr + 25 * yr * yr))).epsilon(1e-9));
    }

  g.f = 4.0;
  g.phase = kPi / 2;
  CHECK(std::abs(gabor_unit_profile(g, 41, h)[20 * 41 + 20]) < 1e-12);

  g.phase = 0.0;
  g.theta_f = 0.0;
  g.theta_env = 0.0;
  g.gamma_x = g.gamma_y = 2.0;
  const auto taps = gabor_unit_profile(g, 41, h);
  const auto [fx, fy] = naive_peak(taps, 41, 16.0);
  const double bin = 16.0 / 41.0;
  CHECK(std::abs(std::abs(fx) - 4.0) <= bin);
  CHECK(std::abs(fy) <= bin);

  g.f = 9.0;  // beyond Nyquist of 8 cpd
  CHECK_THROWS_AS(gabor_profile(g, 41, h), ParameterError);
}

TEST_CASE("orientation distance is axial") {
  CHECK(orientation_distance(0.9 * kPi, 0.0) == doctest::Approx(0.1 * kPi));
  CHECK(orientation_distance(0.0, kPi) == doctest::Approx(0.0));
  CHECK(orientation_distance(0.25 * kPi, 0.75 * kPi) == doctest::Approx(0.5 * kPi));
  CHECK(orientation_distance(-0.1 * kPi, 0.1 * kPi) == doctest::Approx(0.2 * kPi));
}

TEST_CASE("feature coupling") {
  DnNeighborhoodParams p;
  p.channel_meta = {{2.0, 0.0, ChromaticClass::A}, {4.0, 0.0, ChromaticClass::A},
                    {2.0, 0.0, ChromaticClass::T}};
  const double H = 0.8;
  p.amplitude.assign(3, H);
  p.gamma_s.assign(3, 5.0);
  p.gamma_f.assign(3, 1.25);
  p.sigma_o.assign(3, 0.11 * kPi);
  const auto w = dn_feature_coupling(p);
  CHECK(w[0] == doctest::Approx(H));  // same channel
  CHECK(w[1] == doctest::Approx(H * std::exp(-0.5 * (2 * 1.25) * (2 * 1.25))).epsilon(1e-14));
  CHECK(w[2] == 0.0);  // no cross-class pooling by default

  p.class_coupling[0][1] = 0.5;
  CHECK(dn_feature_coupling(p)[2] == doctest::Approx(0.5 * H));

  const auto k = dn_neighborhood_kernel(p, 5, 0.1);
  const auto t = dn_spatial_taps(5.0, 5, 0.1);
  CHECK(t[2] == 1.0);
  const auto s = k.slice(1, 0);  // neighbor 1 into center 0
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) CHECK(s[r * 5 + c] == doctest::Approx(w[1] * t[r] * t[c]).epsilon(1e-14));

  p.gamma_f.pop_back();
  CHECK_THROWS_AS(dn_feature_coupling(p), ConfigError);
}

TEST_CASE("mix scales replicated slices") {
  ChannelMix mix;
  mix.in_channels = 2;
  mix.out_channels = 2;
  mix.A = {1.0, 0.0, -2.0, 0.5};
  const auto k = dog_kernel({20.0, 3.0}, mix, 9, 0.01);
  const auto base = k.slice(0, 0);
  CHECK(energy(k.slice(1, 0)) == doctest::Approx(4.0));
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(k.slice(0, 1)[i] == 0.0);
    CHECK(k.slice(1, 0)[i] == doctest::Approx(-2.0 * base[i]));
    CHECK(k.slice(1, 1)[i] == doctest::Approx(0.5 * base[i]));
  }
}
