#include <doctest.h>

#include <cmath>

#include "fft_conv.hpp"
#include "helpers.hpp"
#include "ppnet/errors.hpp"
#include "ppnet/kernels.hpp"
#include "ppnet/tensor.hpp"

using namespace ppnet;

namespace {

// Straight summation with explicit half-sample reflection, written without
// mirror_index so it checks that helper too.
double reflect_at(const ImageTensor& x, int r, int c, int ch) {
  auto fold = [](int i, int n) {
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
  };
  return x.at(fold(r, x.height()), fold(c, x.width()), ch);
}

ImageTensor naive_conv(const ImageTensor& x, const KernelTensor& k) {
  const int h = x.height(), w = x.width();
  const int ry = k.k_height() / 2, rx = k.k_width() / 2;
  std::vector<double> out(static_cast<std::size_t>(h) * w * k.out_channels(), 0.0);
  for (int z = 0; z < k.out_channels(); ++z)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        double s = 0.0;
        for (int i = 0; i < k.in_channels(); ++i)
          for (int y = 0; y < k.k_height(); ++y)
            for (int xx = 0; xx < k.k_width(); ++xx)
              s += k.at(xx, y, i, z) * reflect_at(x, r + y - ry, c + xx - rx, i);
        out[(static_cast<std::size_t>(r) * w + c) * k.out_channels() + z] = s;
      }
  return ImageTensor(h, w, k.out_channels(), x.sampling_frequency(), std::move(out));
}

double max_abs_diff(const ImageTensor& a, const ImageTensor& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

KernelTensor random_kernel(int kh, int kw, int in, int out, std::uint64_t seed, double spacing = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(static_cast<std::size_t>(kh) * kw * in * out);
  for (auto& x : v) x = g(rng);
  return KernelTensor(kh, kw, in, out, spacing, std::move(v));
}

}  // namespace

TEST_CASE("tensor construction rejects bad shapes and values") {
  CHECK_THROWS_AS(ImageTensor(0, 3, 1, 1.0, {}), ConfigError);
  CHECK_THROWS_AS(ImageTensor(2, 2, 1, 1.0, {1, 2, 3}), ConfigError);
  CHECK_THROWS_AS(ImageTensor(1, 1, 1, 0.0, {1}), ConfigError);
  CHECK_THROWS_AS(ImageTensor(1, 1, 1, 1.0, {std::nan("")}), ConfigError);
  CHECK_THROWS_AS(KernelTensor(2, 3, 1, 1, 1.0, std::vector<double>(6)), ConfigError);
}

TEST_CASE("mirror_index reflects half-sample symmetric") {
  CHECK(mirror_index(-1, 5) == 0);
  CHECK(mirror_index(-2, 5) == 1);
  CHECK(mirror_index(5, 5) == 4);
  CHECK(mirror_index(6, 5) == 3);
  CHECK(mirror_index(12, 5) == 2);  // past one full reflection
  CHECK(mirror_index(-7, 3) == 0);
  for (int i = 0; i < 5; ++i) CHECK(mirror_index(i, 5) == i);
}

TEST_CASE("identity and zero kernels") {
  const auto x = testutil::random_tensor(7, 9, 1, 32.0, 1);
  const auto id = KernelTensor(1, 1, 1, 1, 1.0 / 32.0, {1.0});
  const auto y = conv2d(x, id);
  CHECK(max_abs_diff(x, y) == 0.0);

  const auto zero = KernelTensor::zeros(3, 3, 1, 1, 1.0 / 32.0);
  const auto z = conv2d(x, zero);
  CHECK(z.height() == x.height());
  CHECK(z.width() == x.width());
  CHECK(z.max_value() == 0.0);
  CHECK(z.min_value() == 0.0);
}

TEST_CASE("DoG on a constant 5x5 image is zero by direct summation") {
  const double c = 0.7;
  const auto x = ImageTensor::filled(5, 5, 1, 32.0, c);
  const auto k = dog_kernel(DoGParams{25.0, 2.0}, ChannelMix::single(), 5, 1.0 / 32.0);
  double taps = 0.0, abs_taps = 0.0;
  for (double v : k.data()) {
    taps += v;
    abs_taps += std::abs(v);
  }
  // Every output is c * sum(taps) once the border is reflected.
  CHECK(std::abs(taps) < 1e-12 * abs_taps);
  const auto y = conv2d(x, k, Padding::Symmetric, ConvMethod::Direct);
  for (double v : y.data()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("direct and FFT convolution agree with a naive oracle") {
  const auto x = testutil::random_tensor(23, 17, 2, 16.0, 7, -1.0, 1.0);
  for (int ks : {1, 3, 7, 31}) {
    CAPTURE(ks);
    const auto k = random_kernel(ks, ks, 2, 3, 100 + ks, 1.0 / 16.0);
    const auto ref = naive_conv(x, k);
    CHECK(max_abs_diff(conv2d(x, k, Padding::Symmetric, ConvMethod::Direct), ref) < 1e-10);
    CHECK(max_abs_diff(conv2d(x, k, Padding::Symmetric, ConvMethod::Fft), ref) < 1e-8);
  }
}

TEST_CASE("valid padding keeps fully overlapping positions only") {
  const auto x = testutil::random_tensor(10, 12, 1, 1.0, 3);
  const auto k = random_kernel(3, 5, 1, 1, 4);
  const auto d = conv2d(x, k, Padding::None, ConvMethod::Direct);
  const auto f = conv2d(x, k, Padding::None, ConvMethod::Fft);
  CHECK(d.height() == 8);
  CHECK(d.width() == 8);
  CHECK(max_abs_diff(d, f) < 1e-10);
  double s = 0.0;
  for (int y = 0; y < 3; ++y)
    for (int xx = 0; xx < 5; ++xx) s += k.at(xx, y, 0, 0) * x.at(2 + y, 3 + xx, 0);
  CHECK(d.at(2, 3, 0) == doctest::Approx(s).epsilon(1e-12));
}

TEST_CASE("channel mismatch is a configuration error") {
  const auto x = testutil::random_tensor(5, 5, 2, 1.0, 3);
  CHECK_THROWS_AS(conv2d(x, KernelTensor::zeros(3, 3, 3, 1, 1.0)), ConfigError);
}

TEST_CASE("separable correlation matches the outer-product kernel") {
  const auto x = testutil::random_tensor(19, 14, 1, 1.0, 9);
  const std::vector<double> t{0.1, 0.5, 1.0, 0.5, 0.1};
  std::vector<double> full(25);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c) full[r * 5 + c] = t[r] * t[c];
  const auto planes = to_planes(x);
  const auto a = correlate_separable(planes[0], t);
  const auto b = correlate_plane(planes[0], full, 5, 5, ConvMethod::Direct);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-12));
}

TEST_CASE("max pooling") {
  SUBCASE("single block") {
    const ImageTensor x(2, 2, 1, 8.0, {1, 2, 3, 4});
    const auto y = max_pool_2x2(x);
    CHECK(y.height() == 1);
    CHECK(y.width() == 1);
    CHECK(y.at(0, 0, 0) == 4.0);
    CHECK(y.sampling_frequency() == 4.0);
  }
  SUBCASE("constant image") {
    const auto y = max_pool_2x2(ImageTensor::filled(6, 8, 2, 8.0, 0.3));
    CHECK(y.height() == 3);
    CHECK(y.width() == 4);
    for (double v : y.data()) CHECK(v == 0.3);
  }
  SUBCASE("random 4x4 against per-block scan") {
    const auto x = testutil::random_tensor(4, 4, 2, 8.0, 11);
    const auto y = max_pool_2x2(x);
    for (int ch = 0; ch < 2; ++ch)
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
          double m = -1e300;
          for (int dr = 0; dr < 2; ++dr)
            for (int dc = 0; dc < 2; ++dc) m = std::max(m, x.at(2 * r + dr, 2 * c + dc, ch));
          CHECK(y.at(r, c, ch) == m);
        }
  }
  SUBCASE("odd extents round up") {
    const auto y = max_pool_2x2(testutil::random_tensor(5, 3, 1, 8.0, 12));
    CHECK(y.height() == 3);
    CHECK(y.width() == 2);
  }
}

TEST_CASE("dft_magnitude matches a naive DFT") {
  const auto x = testutil::random_tensor(6, 5, 1, 1.0, 21);
  const auto mag = detail::dft_magnitude(x.data(), 6, 5);
  for (int u = 0; u < 6; ++u)
    for (int v = 0; v < 5; ++v) {
      std::complex<double> s = 0.0;
      for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 5; ++c)
          s += x.at(r, c, 0) * std::polar(1.0, -2.0 * M_PI * (double(u * r) / 6 + double(v * c) / 5));
      CHECK(mag[u * 5 + v] == doctest::Approx(std::abs(s)).epsilon(1e-10));
    }
}
