#include "ppnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "ppnet/errors.hpp"

namespace ppnet {
namespace {

constexpr double kPi = std::numbers::pi;

void check_grid(int size, double spacing) {
  if (size < 1 || size % 2 == 0) {
    throw ConfigError("kernel size must be odd and positive, got " + std::to_string(size));
  }
  if (!(spacing > 0.0) || !std::isfinite(spacing)) {
    throw ParameterError("kernel grid spacing must be positive");
  }
}

void check_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream os;
    os << name << " must be positive and finite, got " << v;
    throw ParameterError(os.str());
  }
}

void normalize_energy(std::vector<double>& taps, const char* what) {
  double energy = 0.0;
  for (double v : taps) energy += v * v;
  if (!(energy > 0.0) || !std::isfinite(energy)) {
    throw ParameterError(std::string(what) + " has zero energy on this grid");
  }
  const double inv = 1.0 / std::sqrt(energy);
  for (double& v : taps) v *= inv;
}

void check_mix(const ChannelMix& mix) {
  if (mix.in_channels < 1 || mix.out_channels < 1 ||
      mix.A.size() != static_cast<std::size_t>(mix.in_channels) * mix.out_channels) {
    throw ConfigError("channel mix matrix does not match its declared shape");
  }
  for (double a : mix.A) {
    if (!std::isfinite(a)) throw ParameterError("channel mix contains a non-finite amplitude");
  }
}

KernelTensor replicate_by_mix(const std::vector<std::vector<double>>& shapes_per_z,
                              const ChannelMix& mix, int size, double spacing) {
  const std::size_t n = static_cast<std::size_t>(size) * size;
  std::vector<double> data(n * mix.in_channels * mix.out_channels);
  for (int z = 0; z < mix.out_channels; ++z) {
    const auto& shape = shapes_per_z[shapes_per_z.size() == 1 ? 0 : z];
    for (int i = 0; i < mix.in_channels; ++i) {
      const double a = mix(i, z);
      double* dst = &data[(static_cast<std::size_t>(z) * mix.in_channels + i) * n];
      for (std::size_t k = 0; k < n; ++k) dst[k] = a * shape[k];
    }
  }
  return KernelTensor(size, size, mix.in_channels, mix.out_channels, spacing, std::move(data));
}

}  // namespace

ChannelMix ChannelMix::identity(int n) {
  ChannelMix m;
  m.in_channels = n;
  m.out_channels = n;
  m.A.assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int k = 0; k < n; ++k) m.A[static_cast<std::size_t>(k) * n + k] = 1.0;
  return m;
}

double orientation_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), kPi);
  return std::min(d, kPi - d);
}

KernelTensor gaussian_kernel(const GaussianParams& p, int size, double spacing) {
  check_grid(size, spacing);
  check_positive(p.gamma_x, "Gaussian gamma_x");
  check_positive(p.gamma_y, "Gaussian gamma_y");
  std::vector<double> taps(static_cast<std::size_t>(size) * size);
  for (int r = 0; r < size; ++r) {
    const double y = tap_coordinate(r, size, spacing);
    for (int c = 0; c < size; ++c) {
      const double x = tap_coordinate(c, size, spacing);
      taps[static_cast<std::size_t>(r) * size + c] =
          std::exp(-0.5 * (x * x * p.gamma_x * p.gamma_x + y * y * p.gamma_y * p.gamma_y));
    }
  }
  normalize_energy(taps, "Gaussian kernel");
  return KernelTensor(size, size, 1, 1, spacing, std::move(taps));
}

namespace {

void check_dog(const DoGParams& p) {
  check_positive(p.gamma, "DoG gamma");
  if (!(p.K > 1.0 + 1e-6) || !std::isfinite(p.K)) {
    std::ostringstream os;
    os << "DoG surround ratio K must exceed 1 (got " << p.K
       << "); K <= 1 swaps center and surround";
    throw ParameterError(os.str());
  }
}

}  // namespace

double dog_surround_weight(const DoGParams& p, int size, double spacing) {
  check_grid(size, spacing);
  check_dog(p);
  const double sigma = 1.0 / p.gamma;
  const double s2c = 2.0 * sigma * sigma;
  const double s2s = s2c * p.K * p.K;
  double center = 0.0;
  double surround = 0.0;
  for (int r = 0; r < size; ++r) {
    const double y = tap_coordinate(r, size, spacing);
    for (int c = 0; c < size; ++c) {
      const double x = tap_coordinate(c, size, spacing);
      const double r2 = x * x + y * y;
      center += std::exp(-r2 / s2c);
      surround += std::exp(-r2 / s2s);
    }
  }
  return center / surround;
}

std::vector<double> dog_profile(const DoGParams& p, int size, double spacing) {
  const double w = dog_surround_weight(p, size, spacing);
  const double sigma = 1.0 / p.gamma;
  const double s2c = 2.0 * sigma * sigma;
  const double s2s = s2c * p.K * p.K;
  const double scale = 1.0 / (sigma * sigma);
  std::vector<double> taps(static_cast<std::size_t>(size) * size);
  for (int r = 0; r < size; ++r) {
    const double y = tap_coordinate(r, size, spacing);
    for (int c = 0; c < size; ++c) {
      const double x = tap_coordinate(c, size, spacing);
      const double r2 = x * x + y * y;
      taps[static_cast<std::size_t>(r) * size + c] =
          scale * (std::exp(-r2 / s2c) - w * std::exp(-r2 / s2s));
    }
  }
  return taps;
}

KernelTensor dog_kernel(const DoGParams& p, const ChannelMix& mix, int size, double spacing) {
  check_mix(mix);
  auto shape = dog_profile(p, size, spacing);
  normalize_energy(shape, "DoG kernel");
  return replicate_by_mix({shape}, mix, size, spacing);
}

KernelTensor dog_kernel_bank(const std::vector<DoGParams>& per_slice, const ChannelMix& mix,
                             int size, double spacing) {
  check_mix(mix);
  if (per_slice.size() != mix.A.size()) {
    throw ConfigError("DoG bank needs one parameter set per (input, output) slice");
  }
  const std::size_t n = static_cast<std::size_t>(size) * size;
  std::vector<double> data(n * mix.A.size());
  for (int i = 0; i < mix.in_channels; ++i) {
    for (int z = 0; z < mix.out_channels; ++z) {
      const double a = mix(i, z);
      auto shape = dog_profile(per_slice[static_cast<std::size_t>(i) * mix.out_channels + z], size,
                               spacing);
      normalize_energy(shape, "DoG kernel");
      double* dst = &data[(static_cast<std::size_t>(z) * mix.in_channels + i) * n];
      for (std::size_t k = 0; k < n; ++k) dst[k] = a * shape[k];
    }
  }
  return KernelTensor(size, size, mix.in_channels, mix.out_channels, spacing, std::move(data));
}

std::vector<double> gabor_profile(const GaborParams& p, int size, double spacing) {
  check_grid(size, spacing);
  check_positive(p.gamma_x, "Gabor gamma_x");
  check_positive(p.gamma_y, "Gabor gamma_y");
  check_positive(p.f, "Gabor frequency");
  const double nyquist = 0.5 / spacing;
  if (p.f > nyquist) {
    std::ostringstream os;
    os << "Gabor frequency " << p.f << " cpd exceeds the Nyquist limit " << nyquist
       << " cpd of a grid with spacing " << spacing << " deg";
    throw ParameterError(os.str());
  }
  if (!std::isfinite(p.theta_env) || !std::isfinite(p.theta_f) || !std::isfinite(p.phase)) {
    throw ParameterError("Gabor angles must be finite");
  }
  const double ce = std::cos(p.theta_env);
  const double se = std::sin(p.theta_env);
  const double cf = std::cos(p.theta_f);
  const double sf = std::sin(p.theta_f);
  const double gx2 = p.gamma_x * p.gamma_x;
  const double gy2 = p.gamma_y * p.gamma_y;
  std::vector<double> taps(static_cast<std::size_t>(size) * size);
  for (int r = 0; r < size; ++r) {
    const double y = tap_coordinate(r, size, spacing);
    for (int c = 0; c < size; ++c) {
      const double x = tap_coordinate(c, size, spacing);
      const double xr = x * ce + y * se;
      const double yr = -x * se + y * ce;
      const double envelope = std::exp(-0.5 * (xr * xr * gx2 + yr * yr * gy2));
      // Carrier in unrotated coordinates.
      const double carrier = std::cos(2.0 * kPi * p.f * (x * cf + y * sf) + p.phase);
      taps[static_cast<std::size_t>(r) * size + c] = envelope * carrier;
    }
  }
  return taps;
}

std::vector<double> gabor_unit_profile(const GaborParams& p, int size, double spacing) {
  auto shape = gabor_profile(p, size, spacing);
  normalize_energy(shape, "Gabor kernel");
  return shape;
}

KernelTensor gabor_kernel(const GaborParams& p, const ChannelMix& mix, int size, double spacing) {
  check_mix(mix);
  return replicate_by_mix({gabor_unit_profile(p, size, spacing)}, mix, size, spacing);
}

KernelTensor gabor_bank_kernel(const std::vector<GaborParams>& bank, const ChannelMix& mix,
                               int size, double spacing) {
  check_mix(mix);
  if (bank.size() != static_cast<std::size_t>(mix.out_channels)) {
    throw ConfigError("Gabor bank size must equal the number of output channels");
  }
  std::vector<std::vector<double>> shapes;
  shapes.reserve(bank.size());
  for (const auto& g : bank) shapes.push_back(gabor_unit_profile(g, size, spacing));
  return replicate_by_mix(shapes, mix, size, spacing);
}

void DnNeighborhoodParams::validate() const {
  const std::size_t n = channel_meta.size();
  if (n == 0) throw ConfigError("neighborhood kernel needs channel metadata");
  if (amplitude.size() != n || gamma_s.size() != n || gamma_f.size() != n || sigma_o.size() != n) {
    throw ConfigError("neighborhood parameters missing for some channels: metadata covers " +
                      std::to_string(n) + " channels");
  }
  for (std::size_t c = 0; c < n; ++c) {
    check_positive(gamma_s[c], "DN gamma_s");
    check_positive(gamma_f[c], "DN gamma_f");
    check_positive(sigma_o[c], "DN sigma_o");
    if (!std::isfinite(amplitude[c])) throw ParameterError("DN amplitude must be finite");
  }
}

std::vector<double> dn_feature_coupling_row(const DnNeighborhoodParams& p, int c) {
  const int n = p.channels();
  if (c < 0 || c >= n) throw ConfigError("coupling row out of range");
  std::vector<double> w(n, 0.0);
  const auto& center = p.channel_meta[c];
  const double gf2 = p.gamma_f[c] * p.gamma_f[c];
  const double so2 = p.sigma_o[c] * p.sigma_o[c];
  for (int cn = 0; cn < n; ++cn) {
    const auto& nb = p.channel_meta[cn];
    const double h = p.class_coupling[static_cast<int>(center.chromatic)][static_cast<int>(nb.chromatic)];
    if (h == 0.0) continue;
    const double df = nb.frequency - center.frequency;
    const double dth = orientation_distance(nb.orientation, center.orientation);
    w[cn] = p.amplitude[c] * h * std::exp(-0.5 * (df * df * gf2 + dth * dth / so2));
  }
  return w;
}

std::vector<double> dn_feature_coupling(const DnNeighborhoodParams& p) {
  p.validate();
  const int n = p.channels();
  std::vector<double> w;
  w.reserve(static_cast<std::size_t>(n) * n);
  for (int c = 0; c < n; ++c) {
    const auto row = dn_feature_coupling_row(p, c);
    w.insert(w.end(), row.begin(), row.end());
  }
  return w;
}

std::vector<double> dn_spatial_taps(double gamma_s, int size, double spacing) {
  check_grid(size, spacing);
  check_positive(gamma_s, "DN gamma_s");
  std::vector<double> taps(size);
  for (int k = 0; k < size; ++k) {
    const double x = tap_coordinate(k, size, spacing);
    taps[k] = std::exp(-0.5 * x * x * gamma_s * gamma_s);
  }
  return taps;
}

KernelTensor dn_neighborhood_kernel(const DnNeighborhoodParams& p, int size, double spacing) {
  const auto w = dn_feature_coupling(p);
  const int n = p.channels();
  const std::size_t area = static_cast<std::size_t>(size) * size;
  std::vector<double> data(area * n * n, 0.0);
  for (int c = 0; c < n; ++c) {
    const auto t = dn_spatial_taps(p.gamma_s[c], size, spacing);
    for (int cn = 0; cn < n; ++cn) {
      const double wc = w[static_cast<std::size_t>(c) * n + cn];
      if (wc == 0.0) continue;
      double* dst = &data[(static_cast<std::size_t>(c) * n + cn) * area];
      for (int r = 0; r < size; ++r) {
        for (int q = 0; q < size; ++q) dst[static_cast<std::size_t>(r) * size + q] = wc * t[r] * t[q];
      }
    }
  }
  return KernelTensor(size, size, n, n, spacing, std::move(data));
}

}  // namespace ppnet
