#pragma once

#include <array>
#include <vector>

#include "ppnet/tensor.hpp"

namespace ppnet {

// Axis-aligned Gaussian, parameterized by inverse widths (1/deg).
struct GaussianParams {
  double gamma_x = 1.0;
  double gamma_y = 1.0;
};

// Center-surround difference of Gaussians. gamma is the inverse center width
// (1/deg); the surround is K times wider.
struct DoGParams {
  double gamma = 1.0;
  double K = 2.0;
};

// Oriented-envelope Gabor. Angles in radians, frequency in cycles/deg.
struct GaborParams {
  double gamma_x = 1.0;
  double gamma_y = 1.0;
  double theta_env = 0.0;
  double f = 1.0;
  double theta_f = 0.0;
  double phase = 0.0;
};

// in_channels x out_channels amplitude matrix A(i, z), stored row-major by i.
struct ChannelMix {
  int in_channels = 1;
  int out_channels = 1;
  std::vector<double> A{1.0};

  static ChannelMix identity(int n);
  static ChannelMix single() { return identity(1); }
  double operator()(int i, int z) const { return A[static_cast<std::size_t>(i) * out_channels + z]; }
};

enum class ChromaticClass { A = 0, T = 1, D = 2 };

struct ChannelMeta {
  double frequency = 0.0;    // cpd
  double orientation = 0.0;  // rad
  ChromaticClass chromatic = ChromaticClass::A;
};

// Parameters of the space/frequency/orientation neighborhood kernel. Per-channel
// vectors are indexed by the center (output) channel.
struct DnNeighborhoodParams {
  std::vector<double> amplitude;  // per-channel scale
  std::vector<double> gamma_s;    // inverse spatial width, 1/deg
  std::vector<double> gamma_f;    // inverse frequency width, 1/cpd
  std::vector<double> sigma_o;    // orientation width, rad
  std::vector<ChannelMeta> channel_meta;
  // Coupling between chromatic classes; identity means no cross-class pooling.
  std::array<std::array<double, 3>, 3> class_coupling{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  int channels() const { return static_cast<int>(channel_meta.size()); }
  void validate() const;
};

// Axial orientation distance: min(|a - b|, pi - |a - b|) after reduction mod pi.
double orientation_distance(double a, double b);

// Centered coordinate (degrees) of tap index k on an odd grid of n taps.
inline double tap_coordinate(int k, int n, double spacing) { return (k - n / 2) * spacing; }

// 1x1-channel Gaussian, energy-normalized (sum of squared taps = 1).
KernelTensor gaussian_kernel(const GaussianParams& p, int size, double spacing);

// Surround weight used to balance a sampled DoG (ratio of sampled center mass to
// sampled surround mass). Tends to 1/K^2 as the support grows.
double dog_surround_weight(const DoGParams& p, int size, double spacing);

// Unnormalized sampled DoG profile, size x size row-major.
std::vector<double> dog_profile(const DoGParams& p, int size, double spacing);

// One DoG shape replicated over every (i, z) slice, energy-normalized per slice
// and scaled by mix(i, z).
KernelTensor dog_kernel(const DoGParams& p, const ChannelMix& mix, int size, double spacing);

// Per-slice DoG shapes (one DoGParams per (i, z), i-major) scaled by mix.
KernelTensor dog_kernel_bank(const std::vector<DoGParams>& per_slice, const ChannelMix& mix,
                             int size, double spacing);

// Unnormalized sampled Gabor, size x size row-major.
std::vector<double> gabor_profile(const GaborParams& p, int size, double spacing);

KernelTensor gabor_kernel(const GaborParams& p, const ChannelMix& mix, int size, double spacing);

// Depthwise-separable Gabor bank: output channel z uses bank[z] replicated over
// the input channels and weighted by mix(i, z).
KernelTensor gabor_bank_kernel(const std::vector<GaborParams>& bank, const ChannelMix& mix,
                               int size, double spacing);

// Energy-normalized spatial profile of one Gabor (the shape before ChannelMix).
std::vector<double> gabor_unit_profile(const GaborParams& p, int size, double spacing);

// Feature coupling W(c, c') between center c and neighbor c' (no spatial part).
std::vector<double> dn_feature_coupling(const DnNeighborhoodParams& p);
// Row c of the coupling; does not re-validate p.
std::vector<double> dn_feature_coupling_row(const DnNeighborhoodParams& p, int c);

// Unnormalized isotropic spatial weight exp(-(x^2 + y^2) gamma_s^2 / 2) as 1-D taps.
std::vector<double> dn_spatial_taps(double gamma_s, int size, double spacing);

// Full channels x channels neighborhood kernel; slice (i = c', z = c) holds
// S_c(x, y) * W(c, c').
KernelTensor dn_neighborhood_kernel(const DnNeighborhoodParams& p, int size, double spacing);

}  // namespace ppnet
