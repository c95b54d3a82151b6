#include "ppnet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ppnet/errors.hpp"

namespace ppnet {
namespace {

void check_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw ConfigError("pearson: length mismatch " + std::to_string(x.size()) + " vs " +
                      std::to_string(y.size()));
  }
  if (x.size() < 2) throw NumericalError("pearson: undefined for fewer than 2 samples");
}

struct Moments {
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
};

// One-pass co-moment update (Welford), stable for large offsets.
Moments comoments(std::span<const double> x, std::span<const double> y) {
  Moments m;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    mx += dx / n;
    my += dy / n;
    m.sxx += dx * (x[i] - mx);
    m.syy += dy * (y[i] - my);
    m.sxy += dx * (y[i] - my);
  }
  return m;
}

}  // namespace

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double pearson(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto m = comoments(x, y);
  if (!(m.sxx > 0.0) || !(m.syy > 0.0)) {
    throw NumericalError("pearson: correlation undefined (zero variance)");
  }
  const double r = m.sxy / std::sqrt(m.sxx * m.syy);
  return std::clamp(r, -1.0, 1.0);
}

std::vector<double> pearson_gradient_x(std::span<const double> x, std::span<const double> y) {
  check_pair(x, y);
  const auto m = comoments(x, y);
  if (!(m.sxx > 0.0) || !(m.syy > 0.0)) {
    throw NumericalError("pearson: correlation undefined (zero variance)");
  }
  const double mx = mean(x);
  const double my = mean(y);
  const double norm = std::sqrt(m.sxx * m.syy);
  const double r = m.sxy / norm;
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    g[i] = (y[i] - my) / norm - r * (x[i] - mx) / m.sxx;
  }
  return g;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return v[lo] + t * (v[hi] - v[lo]);
}

}  // namespace ppnet
