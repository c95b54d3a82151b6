#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ppnet {

// Multi-channel image in row-major (row, column, channel) order, calibrated in
// samples per degree of visual angle. Immutable after construction.
class ImageTensor {
 public:
  ImageTensor() = default;
  // Throws ConfigError on bad dimensions, non-finite values or fs <= 0.
  ImageTensor(int height, int width, int channels, double sampling_frequency,
              std::vector<double> data);

  static ImageTensor filled(int height, int width, int channels, double sampling_frequency,
                            double value);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  double sampling_frequency() const { return sampling_frequency_; }
  // Degrees between adjacent pixel centers.
  double pixel_spacing() const { return 1.0 / sampling_frequency_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double at(int row, int col, int channel) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + channel];
  }
  std::span<const double> data() const { return data_; }

  double min_value() const;
  double max_value() const;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  double sampling_frequency_ = 1.0;
  std::vector<double> data_;
};

// Convolution kernel indexed (x, y, i, z): x is the column tap, y the row tap,
// i the input channel, z the output channel. Spatial extents are odd so that a
// unique center tap exists.
class KernelTensor {
 public:
  KernelTensor() = default;
  // data is laid out slice-major: ((z * in + i) * k_height + y) * k_width + x.
  KernelTensor(int k_height, int k_width, int in_channels, int out_channels,
               double grid_spacing, std::vector<double> data);

  static KernelTensor zeros(int k_height, int k_width, int in_channels, int out_channels,
                            double grid_spacing);

  int k_height() const { return k_height_; }
  int k_width() const { return k_width_; }
  int in_channels() const { return in_channels_; }
  int out_channels() const { return out_channels_; }
  double grid_spacing() const { return grid_spacing_; }

  double at(int x, int y, int i, int z) const { return data_[index(x, y, i, z)]; }
  // Contiguous k_height * k_width slice for (i, z).
  std::span<const double> slice(int i, int z) const;
  std::span<const double> data() const { return data_; }

 private:
  std::size_t index(int x, int y, int i, int z) const {
    return ((static_cast<std::size_t>(z) * in_channels_ + i) * k_height_ + y) * k_width_ + x;
  }

  int k_height_ = 0;
  int k_width_ = 0;
  int in_channels_ = 0;
  int out_channels_ = 0;
  double grid_spacing_ = 1.0;
  std::vector<double> data_;
};

// Single channel scratch image used inside layer implementations.
struct Plane {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Plane() = default;
  Plane(int h, int w, double fill = 0.0)
      : height(h), width(w), values(static_cast<std::size_t>(h) * w, fill) {}

  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * width + c]; }
  double operator()(int r, int c) const {
    return values[static_cast<std::size_t>(r) * width + c];
  }
};

std::vector<Plane> to_planes(const ImageTensor& t);
ImageTensor from_planes(const std::vector<Plane>& planes, double sampling_frequency);

enum class Padding { Symmetric, None };
enum class ConvMethod { Auto, Direct, Fft };

// Half-sample symmetric reflection (… b a | a b … y z | z y …) of any integer
// index into [0, n), including offsets larger than n.
int mirror_index(int i, int n);

// Output channel z equals sum_i g(., ., i, z) correlated with X(., ., i)
// (cross-correlation: no kernel flip). With symmetric padding the spatial size
// is preserved; with no padding only fully overlapping positions are kept.
ImageTensor conv2d(const ImageTensor& input, const KernelTensor& kernel,
                   Padding padding = Padding::Symmetric, ConvMethod method = ConvMethod::Auto);

// 2x2 max pooling. Odd extents are first padded by one mirrored row/column.
// The result has half the sampling frequency.
ImageTensor max_pool_2x2(const ImageTensor& input);

// Single-plane correlation with symmetric padding; used by separable and
// depthwise layer paths. The kernel is k_height x k_width, row-major.
Plane correlate_plane(const Plane& input, std::span<const double> kernel, int k_height,
                      int k_width, ConvMethod method = ConvMethod::Auto);

// Separable correlation with an odd 1-D kernel along rows then columns.
Plane correlate_separable(const Plane& input, std::span<const double> taps);

}  // namespace ppnet
