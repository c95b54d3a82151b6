#include "ppnet/layers.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "fft_conv.hpp"
#include "ppnet/errors.hpp"

namespace ppnet {
namespace {

double per_channel(const std::vector<double>& v, int c, const char* name) {
  if (v.size() == 1) return v[0];
  if (c >= static_cast<int>(v.size())) {
    throw ConfigError(std::string("DN ") + name + " has " + std::to_string(v.size()) +
                      " entries, fewer than the channel count");
  }
  return v[c];
}

void check_vector_size(const std::vector<double>& v, int channels, const char* name) {
  if (v.empty() || (v.size() != 1 && v.size() != static_cast<std::size_t>(channels))) {
    throw ConfigError(std::string("DN ") + name + " must have 1 or " + std::to_string(channels) +
                      " entries");
  }
}

std::vector<double> normalized_gaussian_taps(double gamma, int size, double spacing) {
  // The isotropic energy-normalized 2-D Gaussian is the outer product of these
  // 1-D taps, each normalized to unit energy.
  auto t = dn_spatial_taps(gamma, size, spacing);
  double e = 0.0;
  for (double v : t) e += v * v;
  const double inv = 1.0 / std::sqrt(e);
  for (double& v : t) v *= inv;
  return t;
}

// Energy term G * x^2 for each listed center channel.
struct PoolVisitor {
  const std::vector<Plane>& sq;
  double spacing;
  const std::vector<int>& centers;

  std::vector<Plane> operator()(const PointwiseNeighborhood& n) const {
    const int channels = static_cast<int>(sq.size());
    check_vector_size(n.H, channels, "H");
    std::vector<Plane> out;
    out.reserve(centers.size());
    for (int c : centers) {
      out.push_back(sq[c]);
      const double h = per_channel(n.H, c, "H");
      for (double& v : out.back().values) v *= h;
    }
    return out;
  }

  std::vector<Plane> operator()(const SpatialGaussianNeighborhood& n) const {
    const int channels = static_cast<int>(sq.size());
    check_vector_size(n.amplitude, channels, "amplitude");
    check_vector_size(n.gamma, channels, "gamma");
    std::vector<Plane> out;
    out.reserve(centers.size());
    for (int c : centers) {
      const auto taps = normalized_gaussian_taps(per_channel(n.gamma, c, "gamma"), n.size, spacing);
      Plane p = correlate_separable(sq[c], taps);
      const double a = per_channel(n.amplitude, c, "amplitude");
      for (double& v : p.values) v *= a;
      out.push_back(std::move(p));
    }
    return out;
  }

  std::vector<Plane> operator()(const SpectralNeighborhood& n) const {
    const int channels = static_cast<int>(sq.size());
    if (n.params.channels() != channels) {
      throw ConfigError("neighborhood kernel covers " + std::to_string(n.params.channels()) +
                        " channels, input has " + std::to_string(channels));
    }
    n.params.validate();
    const std::size_t pixels = sq[0].values.size();
    std::vector<Plane> out;
    out.reserve(centers.size());
    for (int c : centers) {
      const auto w = dn_feature_coupling_row(n.params, c);
      Plane mixed(sq[0].height, sq[0].width);
      for (int cn = 0; cn < channels; ++cn) {
        const double wc = w[cn];
        if (wc == 0.0) continue;
        const double* src = sq[cn].values.data();
        double* dst = mixed.values.data();
        for (std::size_t p = 0; p < pixels; ++p) dst[p] += wc * src[p];
      }
      const auto taps = dn_spatial_taps(n.params.gamma_s[c], n.size, spacing);
      out.push_back(correlate_separable(mixed, taps));
    }
    return out;
  }
};

}  // namespace

ImageTensor divisive_norm(const ImageTensor& x, const DnParams& p, const std::vector<int>& channels) {
  const int n = x.channels();
  check_vector_size(p.B, n, "B");
  check_vector_size(p.beta, n, "beta");
  for (double b : p.beta) {
    if (!(b > 0.0) || !std::isfinite(b)) throw ParameterError("DN bias beta must be positive");
  }
  for (int c : channels) {
    if (c < 0 || c >= n) throw ConfigError("DN output channel " + std::to_string(c) + " out of range");
  }
  auto planes = to_planes(x);
  std::vector<Plane> sq = planes;
  for (auto& pl : sq) {
    for (double& v : pl.values) v = v * v;
  }
  const auto pooled = std::visit(PoolVisitor{sq, x.pixel_spacing(), channels}, p.neighborhood);
  std::vector<Plane> out;
  out.reserve(channels.size());
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const int c = channels[i];
    const double beta = per_channel(p.beta, c, "beta");
    const double b = per_channel(p.B, c, "B");
    out.push_back(std::move(planes[c]));
    auto& v = out.back().values;
    const auto& g = pooled[i].values;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double denom = beta + g[k];
      if (!(denom > 0.0)) {
        throw NumericalError("DN denominator is not positive (negative neighborhood weights?)");
      }
      v[k] = b * v[k] / std::sqrt(denom);
    }
  }
  return from_planes(out, x.sampling_frequency());
}

ImageTensor divisive_norm(const ImageTensor& x, const DnParams& p) {
  std::vector<int> all(x.channels());
  std::iota(all.begin(), all.end(), 0);
  return divisive_norm(x, p, all);
}

ColorMatrix ColorMatrix::jameson_hurvich() {
  return ColorMatrix{{0.24, 0.71, 0.10,  //
                      0.18, -0.39, 0.19,  //
                      0.09, 0.25, -0.38}};
}

double ColorMatrix::determinant() const {
  const auto& m = M;
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

ImageTensor color_matrix(const ImageTensor& x, const ColorMatrix& m) {
  if (x.channels() != 3) {
    throw ConfigError("color matrix needs exactly 3 channels, got " + std::to_string(x.channels()));
  }
  const auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t p = 0; p < in.size(); p += 3) {
    for (int r = 0; r < 3; ++r) {
      out[p + r] = m.M[r * 3] * in[p] + m.M[r * 3 + 1] * in[p + 1] + m.M[r * 3 + 2] * in[p + 2];
    }
  }
  return ImageTensor(x.height(), x.width(), 3, x.sampling_frequency(), std::move(out));
}

ImageTensor param_conv(const ImageTensor& x, const DogConvSpec& spec, bool pool) {
  const auto kernel = dog_kernel_bank(spec.per_slice, spec.mix, spec.size, x.pixel_spacing());
  auto y = conv2d(x, kernel, Padding::Symmetric);
  return pool ? max_pool_2x2(y) : y;
}

ImageTensor apply_gabor_profiles(const ImageTensor& x,
                                 const std::vector<std::vector<double>>& unit_profiles,
                                 const ChannelMix& mix, int size) {
  if (mix.in_channels != x.channels()) {
    throw ConfigError("Gabor channel mix expects " + std::to_string(mix.in_channels) +
                      " input channels, image has " + std::to_string(x.channels()));
  }
  if (unit_profiles.size() != static_cast<std::size_t>(mix.out_channels)) {
    throw ConfigError("Gabor profile count must equal the output channel count");
  }
  const auto planes = to_planes(x);
  detail::FftCorrelator fft(x.height(), x.width(), size, size, Padding::Symmetric);
  std::vector<detail::FftCorrelator::Spectrum> spectra;
  spectra.reserve(planes.size());
  for (const auto& p : planes) spectra.push_back(fft.input_spectrum(p));
  std::vector<Plane> outs(mix.out_channels, Plane(x.height(), x.width()));
  for (int z = 0; z < mix.out_channels; ++z) {
    auto mixed = fft.zero_spectrum();
    bool any = false;
    for (int i = 0; i < mix.in_channels; ++i) {
      const double a = mix(i, z);
      if (a == 0.0) continue;
      const auto& s = spectra[i];
      for (std::size_t k = 0; k < mixed.size(); ++k) mixed[k] += a * s[k];
      any = true;
    }
    if (!any) continue;
    const auto ks = fft.kernel_spectrum(unit_profiles[z]);
    for (std::size_t k = 0; k < mixed.size(); ++k) mixed[k] *= ks[k];
    outs[z] = fft.output(mixed);
  }
  return from_planes(outs, x.sampling_frequency());
}

ImageTensor param_conv(const ImageTensor& x, const GaborConvSpec& spec, bool pool) {
  std::vector<std::vector<double>> profiles;
  profiles.reserve(spec.bank.size());
  for (const auto& g : spec.bank) profiles.push_back(gabor_unit_profile(g, spec.size, x.pixel_spacing()));
  auto y = apply_gabor_profiles(x, profiles, spec.mix, spec.size);
  return pool ? max_pool_2x2(y) : y;
}

}  // namespace ppnet
