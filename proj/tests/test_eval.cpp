#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "ppnet/errors.hpp"
#include "ppnet/eval.hpp"
#include "ppnet/stats.hpp"

using namespace ppnet;

namespace {

double two_pass_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= x.size();
  my /= y.size();
  long double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

Manifest mos_only(const std::vector<double>& mos, double std) {
  Manifest m;
  m.name = "mos";
  for (std::size_t i = 0; i < mos.size(); ++i) {
    IqaRecord r;
    r.ref = "r" + std::to_string(i);
    r.dist = "d" + std::to_string(i);
    r.mos = mos[i];
    r.mos_std = std;
    m.records.push_back(r);
  }
  return m;
}

// Pattern with mean 0.5: a checkerboard of smooth blobs.
ImageTensor pattern16() {
  std::vector<double> v(16 * 16 * 3);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) {
      const double s = 0.5 + 0.3 * std::sin(r * 0.9) * std::cos(c * 0.7);
      for (int k = 0; k < 3; ++k) v[(r * 16 + c) * 3 + k] = s;
    }
  return ImageTensor(16, 16, 3, 1.0, v);
}

// Mean SSIM over 11x11 windows, written as a direct weighted sum per window.
double ssim_oracle(const ImageTensor& a, const ImageTensor& b) {
  double g[11], gs = 0;
  for (int k = 0; k < 11; ++k) gs += g[k] = std::exp(-(k - 5) * (k - 5) / 4.5);
  auto lum = [](const ImageTensor& t, int r, int c) {
    return 0.299 * t.at(r, c, 0) + 0.587 * t.at(r, c, 1) + 0.114 * t.at(r, c, 2);
  };
  double total = 0;
  int count = 0;
  for (int r0 = 0; r0 + 11 <= a.height(); ++r0)
    for (int c0 = 0; c0 + 11 <= a.width(); ++c0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g[i] * g[j] / (gs * gs);
          mx += w * lum(a, r0 + i, c0 + j);
          my += w * lum(b, r0 + i, c0 + j);
        }
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double w = g[i] * g[j] / (gs * gs);
          const double dx = lum(a, r0 + i, c0 + j) - mx, dy = lum(b, r0 + i, c0 + j) - my;
          sxx += w * dx * dx;
          syy += w * dy * dy;
          sxy += w * dx * dy;
        }
      const double C1 = 1e-4, C2 = 9e-4;
      total += (2 * mx * my + C1) * (2 * sxy + C2) / ((mx * mx + my * my + C1) * (sxx + syy + C2));
      ++count;
    }
  return total / count;
}

}  // namespace

TEST_CASE("pearson basics") {
  const std::vector<double> x{1, 2, 3}, y{1, 2, 4}, neg{-1, -2, -3};
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(pearson(x, y) == doctest::Approx(9.0 / std::sqrt(84.0)).epsilon(1e-14));
  CHECK(pearson(x, y) == doctest::Approx(0.9820).epsilon(1e-4));
  const std::vector<double> one{1.0}, flat{2, 2, 2};
  CHECK_THROWS_AS(pearson(one, one), NumericalError);
  CHECK_THROWS_AS(pearson(x, flat), NumericalError);
  CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 2}), ConfigError);
}

TEST_CASE("pearson matches a two-pass computation") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(1000), y(1000);
    const double ox = u(rng), oy = u(rng);
    for (int i = 0; i < 1000; ++i) {
      x[i] = ox + g(rng);
      y[i] = oy + 0.3 * x[i] + g(rng);
    }
    CHECK(std::abs(pearson(x, y) - two_pass_pearson(x, y)) < 1e-12);
  }
}

TEST_CASE("pearson gradient matches finite differences") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::vector<double> x(12), y(12);
  for (int i = 0; i < 12; ++i) {
    x[i] = g(rng);
    y[i] = x[i] + g(rng);
  }
  const auto grad = pearson_gradient_x(x, y);
  for (int i = 0; i < 12; ++i) {
    auto xp = x, xm = x;
    xp[i] += 1e-6;
    xm[i] -= 1e-6;
    CHECK(grad[i] == doctest::Approx((pearson(xp, y) - pearson(xm, y)) / 2e-6).epsilon(1e-6));
  }
}

TEST_CASE("quantile and mean") {
  CHECK(quantile({3, 1, 2, 4}, 0.5) == 2.5);
  CHECK(quantile({5}, 0.95) == 5);
  CHECK(quantile({0, 10}, 0.95) == doctest::Approx(9.5));
  CHECK(mean(std::vector<double>{1, 2, 6}) == 3);
}

TEST_CASE("Monte Carlo consistency") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 9.0);
  std::vector<double> mos(100);
  for (double& v : mos) v = u(rng);

  SUBCASE("noiseless observers") {
    const auto r = monte_carlo_rho_max(mos_only(mos, 0.0), 50, 1);
    for (double s : r.samples) CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("seeded and thread independent") {
    const auto a = monte_carlo_rho_max(mos_only(mos, 1.0), 200, 9, 1);
    const auto b = monte_carlo_rho_max(mos_only(mos, 1.0), 200, 9, 4);
    CHECK(a.samples == b.samples);
    CHECK(a.rho_max == b.rho_max);
    const auto c = monte_carlo_rho_max(mos_only(mos, 1.0), 200, 10, 1);
    CHECK(a.samples != c.samples);
    CHECK(a.rho_max == a.p95);
    CHECK(a.rho_max <= a.max);
  }
  SUBCASE("independent re-simulation") {
    const auto r = monte_carlo_rho_max(mos_only(mos, 1.0), 1000, 2024);
    std::minstd_rand gen(77);
    std::uniform_real_distribution<double> uu(0.0, 1.0);
    auto normal = [&] {  // Box-Muller
      const double a = 1.0 - uu(gen), b = uu(gen);
      return std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * M_PI * b);
    };
    double acc = 0.0;
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> a(100), b(100);
      for (int i = 0; i < 100; ++i) a[i] = mos[i] + normal();
      for (int i = 0; i < 100; ++i) b[i] = mos[i] + normal();
      acc += two_pass_pearson(a, b);
    }
    CHECK(std::abs(r.mean - acc / 1000.0) < 0.01);
  }
  SUBCASE("more observer noise lowers the bound") {
    double prev = 2.0;
    for (double s : {1.0, 2.0, 4.0}) {
      const double rho = monte_carlo_rho_max(mos_only(mos, s), 300, 3).rho_max;
      CHECK(rho < prev);
      prev = rho;
    }
  }
  SUBCASE("invalid std") {
    auto m = mos_only(mos, 1.0);
    m.records[4].mos_std = -1.0;
    CHECK_THROWS_AS(monte_carlo_rho_max(m, 10, 1), InputError);
  }
}

TEST_CASE("dataset evaluation with oracle metrics") {
  const auto m = mos_only({1, 4, 2, 8, 5}, 0.5);
  const auto anti = evaluate_dataset(RecordMetric([](const IqaRecord& r, std::size_t) { return -r.mos; }), m, 3);
  CHECK(anti.pearson == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(anti.distances.size() == 5);
  CHECK_THROWS_AS(evaluate_dataset(RecordMetric([](const IqaRecord&, std::size_t) { return 1.0; }), m), NumericalError);

  // Decode failures list every failing record.
  try {
    evaluate_dataset(PairMetric([](const ImageTensor&, const ImageTensor&) { return 0.0; }), m, 192.0, 2);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("5 record(s)") != std::string::npos);
    CHECK(msg.find("d3") != std::string::npos);
  }
}

TEST_CASE("ppnet metric over a manifest is thread independent") {
  testutil::TempDir dir("eval");
  auto m = testutil::noisy_manifest(dir, 6, 40, 1);
  for (std::size_t i = 0; i < m.records.size(); ++i) m.records[i].mos = static_cast<double>(i % 4);
  const auto metric = ppnet_metric(build_bio_model());
  const auto a = evaluate_dataset(metric, m, 192.0, 1);
  const auto b = evaluate_dataset(metric, m, 192.0, 3);
  CHECK(a.distances == b.distances);
  CHECK(a.pearson == b.pearson);

  write_correlation_csv(a, m, dir / "r.csv");
  std::ifstream in(dir / "r.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "record,distance,mos");
  std::ostringstream os;
  print_summary(os, a, "test");
  CHECK(os.str().find("pearson") != std::string::npos);
}

TEST_CASE("SSIM") {
  const auto p = pattern16();
  CHECK(ssim(p, p) == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<double> inv(p.data().begin(), p.data().end());
  for (double& v : inv) v = 1.0 - v;
  const ImageTensor n(16, 16, 3, 1.0, inv);
  const double s = ssim(p, n);
  CHECK(s < 0.0);
  CHECK(s == doctest::Approx(ssim_oracle(p, n)).epsilon(1e-10));

  const auto a = testutil::random_tensor(20, 23, 3, 1.0, 1);
  const auto b = testutil::random_tensor(20, 23, 3, 1.0, 2);
  CHECK(ssim(a, b) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-10));
  CHECK(ssim_metric()(a, a) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(ssim(testutil::random_tensor(8, 8, 3, 1.0, 1), testutil::random_tensor(8, 8, 3, 1.0, 1)), InputError);
}
