#pragma once

#include <array>
#include <variant>
#include <vector>

#include "ppnet/kernels.hpp"
#include "ppnet/tensor.hpp"

namespace ppnet {

// Per-channel scalar neighborhood: denominator = beta + H * x^2 at each pixel.
struct PointwiseNeighborhood {
  std::vector<double> H;  // one entry per channel, or a single shared entry
};

// Per-channel spatial Gaussian (energy-normalized) scaled by an amplitude; no
// coupling between channels.
struct SpatialGaussianNeighborhood {
  std::vector<double> amplitude;
  std::vector<double> gamma;  // inverse width, 1/deg
  int size = 11;
};

// Space/frequency/orientation kernel over all channels.
struct SpectralNeighborhood {
  DnNeighborhoodParams params;
  int size = 5;
};

using DnNeighborhood =
    std::variant<PointwiseNeighborhood, SpatialGaussianNeighborhood, SpectralNeighborhood>;

// y = B x / (beta + G * x^alpha)^eps with alpha = 2, eps = 1/2.
struct DnParams {
  static constexpr double alpha = 2.0;
  static constexpr double eps = 0.5;

  std::vector<double> B{1.0};     // per channel or shared
  std::vector<double> beta{1.0};  // per channel or shared, > 0
  DnNeighborhood neighborhood = PointwiseNeighborhood{{1.0}};
};

ImageTensor divisive_norm(const ImageTensor& x, const DnParams& p);
// Only the listed output channels, in that order. Pooling still sees every input channel.
ImageTensor divisive_norm(const ImageTensor& x, const DnParams& p, const std::vector<int>& channels);

// 3x3 map from (R, G, B) to (A, T, D), row-major.
struct ColorMatrix {
  std::array<double, 9> M{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static ColorMatrix jameson_hurvich();
  double determinant() const;
};

ImageTensor color_matrix(const ImageTensor& x, const ColorMatrix& m);

// DoG convolution where every (i, z) slice has its own shape.
struct DogConvSpec {
  std::vector<DoGParams> per_slice;  // i-major, in_channels * out_channels entries
  ChannelMix mix;
  int size = 21;
};

// Depthwise-separable Gabor convolution: one shape per output channel.
struct GaborConvSpec {
  std::vector<GaborParams> bank;
  ChannelMix mix;
  int size = 21;
};

// Kernels are synthesized from the current parameters on the input's grid,
// applied with symmetric padding, then optionally max-pooled.
ImageTensor param_conv(const ImageTensor& x, const DogConvSpec& spec, bool pool);
ImageTensor param_conv(const ImageTensor& x, const GaborConvSpec& spec, bool pool);

// Gabor bank applied from precomputed energy-normalized profiles.
ImageTensor apply_gabor_profiles(const ImageTensor& x,
                                 const std::vector<std::vector<double>>& unit_profiles,
                                 const ChannelMix& mix, int size);

}  // namespace ppnet
