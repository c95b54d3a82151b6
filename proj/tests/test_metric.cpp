#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ppnet/errors.hpp"
#include "ppnet/metric.hpp"

using namespace ppnet;

namespace {

ImageTensor perturbed(const ImageTensor& base, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> v(base.data().begin(), base.data().end());
  for (double& x : v) x = std::clamp(x + g(rng), 0.0, 1.0);
  return ImageTensor(base.height(), base.width(), base.channels(), base.sampling_frequency(), v);
}

// RMS over the explicitly scaled responses, independent of ChannelErrors.
double direct_distance(const CompiledModel& cm, const ImageTensor& a, const ImageTensor& b) {
  const auto ra = cm.responses(a);
  const auto rb = cm.responses(b);
  const auto& B = cm.scale();
  double s = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double d = B[i % ra.channels()] * (ra.data()[i] - rb.data()[i]);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(ra.size()));
}

}  // namespace

TEST_CASE("metric axioms") {
  const auto m = build_bio_model();
  const CompiledModel cm(m, 192.0);
  const auto x = testutil::natural_image(48, 192.0, 1);
  const auto y = perturbed(x, 0.05, 2);
  CHECK(perceptual_distance(cm, x, x) == 0.0);
  const double d = perceptual_distance(cm, x, y);
  CHECK(d > 0.0);
  CHECK(std::abs(d - perceptual_distance(cm, y, x)) <= 1e-12);
  CHECK(d == doctest::Approx(direct_distance(cm, x, y)).epsilon(1e-12));
  CHECK(d == doctest::Approx(perceptual_distance(m, x, y)).epsilon(1e-14));

  const auto e0 = channel_errors(cm, x, x);
  for (double v : e0.E) CHECK(v == 0.0);
}

TEST_CASE("doubling B doubles the distance") {
  auto m = build_bio_model();
  const auto x = testutil::natural_image(40, 192.0, 3);
  const auto y = perturbed(x, 0.03, 4);
  const double d1 = perceptual_distance(m, x, y);
  for (double& b : m.group(8, "B").values) b *= 2.0;
  const CompiledModel cm(m, 192.0);
  const double d2 = perceptual_distance(cm, x, y);
  CHECK(d2 == doctest::Approx(2.0 * d1).epsilon(1e-12));
  CHECK(d2 == doctest::Approx(direct_distance(cm, x, y)).epsilon(1e-12));
}

TEST_CASE("channel errors reconstruct the distance") {
  const auto m = build_bio_model();
  const CompiledModel cm(m, 192.0);
  const auto x = testutil::natural_image(40, 192.0, 5);
  const auto y = perturbed(x, 0.04, 6);
  const auto e = channel_errors(cm, x, y);
  CHECK(e.E.size() == 128);
  CHECK(e.N == 10.0 * 10.0 * 128.0);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<double> B(128);
  for (double& b : B) b = u(rng);
  double s = 0.0;
  for (int c = 0; c < 128; ++c) s += B[c] * B[c] * e.E[c];
  CHECK(distance_from_errors(e, B) == doctest::Approx(std::sqrt(s / e.N)).epsilon(1e-14));

  // Zeroing the chromatic channels leaves exactly the achromatic contribution.
  std::vector<double> mask(128, 1.0);
  for (int c = 64; c < 128; ++c) mask[c] = 0.0;
  double sa = 0.0;
  for (int c = 0; c < 64; ++c) sa += e.E[c];
  CHECK(distance_from_errors(e, mask) == doctest::Approx(std::sqrt(sa / e.N)).epsilon(1e-14));
  auto masked = m;
  masked.group(8, "B").values = mask;
  CHECK(perceptual_distance(masked, x, y) == doctest::Approx(distance_from_errors(e, mask)).epsilon(1e-12));

  CHECK_THROWS_AS(distance_from_errors(e, std::vector<double>(3, 1.0)), ConfigError);
}

TEST_CASE("mismatched inputs are rejected") {
  const auto m = build_bio_model();
  const auto x = testutil::natural_image(32, 192.0, 1);
  const auto y = testutil::natural_image(40, 192.0, 1);
  CHECK_THROWS_AS(perceptual_distance(m, x, y), InputError);
  CHECK_THROWS_AS(rms_difference(x, y), InputError);
  CHECK(rms_difference(x, x) == 0.0);
}
