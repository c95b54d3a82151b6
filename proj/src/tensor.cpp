#include "ppnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fft_conv.hpp"
#include "ppnet/errors.hpp"

namespace ppnet {

ImageTensor::ImageTensor(int height, int width, int channels, double sampling_frequency,
                         std::vector<double> data)
    : height_(height),
      width_(width),
      channels_(channels),
      sampling_frequency_(sampling_frequency),
      data_(std::move(data)) {
  if (height < 1 || width < 1 || channels < 1) {
    throw ConfigError("image tensor dimensions must be >= 1, got " + std::to_string(height) +
                      "x" + std::to_string(width) + "x" + std::to_string(channels));
  }
  if (!(sampling_frequency > 0.0) || !std::isfinite(sampling_frequency)) {
    throw ConfigError("sampling frequency must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ConfigError("image tensor data size does not match its dimensions");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw ConfigError("image tensor contains a non-finite value");
  }
}

ImageTensor ImageTensor::filled(int height, int width, int channels, double sampling_frequency,
                                double value) {
  return ImageTensor(height, width, channels, sampling_frequency,
                     std::vector<double>(static_cast<std::size_t>(height) * width * channels,
                                         value));
}

double ImageTensor::min_value() const { return *std::min_element(data_.begin(), data_.end()); }
double ImageTensor::max_value() const { return *std::max_element(data_.begin(), data_.end()); }

KernelTensor::KernelTensor(int k_height, int k_width, int in_channels, int out_channels,
                           double grid_spacing, std::vector<double> data)
    : k_height_(k_height),
      k_width_(k_width),
      in_channels_(in_channels),
      out_channels_(out_channels),
      grid_spacing_(grid_spacing),
      data_(std::move(data)) {
  if (k_height < 1 || k_width < 1 || k_height % 2 == 0 || k_width % 2 == 0) {
    throw ConfigError("kernel spatial extents must be odd, got " + std::to_string(k_height) +
                      "x" + std::to_string(k_width));
  }
  if (in_channels < 1 || out_channels < 1) throw ConfigError("kernel channel counts must be >= 1");
  if (!(grid_spacing > 0.0)) throw ConfigError("kernel grid spacing must be positive");
  if (data_.size() != static_cast<std::size_t>(k_height) * k_width * in_channels * out_channels) {
    throw ConfigError("kernel data size does not match its dimensions");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw ConfigError("kernel contains a non-finite value");
  }
}

KernelTensor KernelTensor::zeros(int k_height, int k_width, int in_channels, int out_channels,
                                 double grid_spacing) {
  return KernelTensor(
      k_height, k_width, in_channels, out_channels, grid_spacing,
      std::vector<double>(static_cast<std::size_t>(k_height) * k_width * in_channels * out_channels,
                          0.0));
}

std::span<const double> KernelTensor::slice(int i, int z) const {
  const std::size_t n = static_cast<std::size_t>(k_height_) * k_width_;
  return std::span<const double>(data_).subspan(index(0, 0, i, z), n);
}

std::vector<Plane> to_planes(const ImageTensor& t) {
  std::vector<Plane> planes(t.channels(), Plane(t.height(), t.width()));
  const auto data = t.data();
  const std::size_t pixels = static_cast<std::size_t>(t.height()) * t.width();
  const int c = t.channels();
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int ch = 0; ch < c; ++ch) planes[ch].values[p] = data[p * c + ch];
  }
  return planes;
}

ImageTensor from_planes(const std::vector<Plane>& planes, double sampling_frequency) {
  if (planes.empty()) throw ConfigError("cannot assemble a tensor from zero planes");
  const int h = planes[0].height;
  const int w = planes[0].width;
  const int c = static_cast<int>(planes.size());
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  std::vector<double> data(pixels * c);
  for (int ch = 0; ch < c; ++ch) {
    if (planes[ch].height != h || planes[ch].width != w) {
      throw ConfigError("planes differ in size");
    }
    for (std::size_t p = 0; p < pixels; ++p) data[p * c + ch] = planes[ch].values[p];
  }
  return ImageTensor(h, w, c, sampling_frequency, std::move(data));
}

int mirror_index(int i, int n) {
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

namespace {

bool prefer_fft(int kh, int kw) { return kh * kw > 81; }

void check_conv_inputs(const ImageTensor& input, const KernelTensor& kernel, Padding padding) {
  if (kernel.in_channels() != input.channels()) {
    throw ConfigError("kernel expects " + std::to_string(kernel.in_channels()) +
                      " input channels, image has " + std::to_string(input.channels()));
  }
  const double expected = input.pixel_spacing();
  if (std::abs(kernel.grid_spacing() - expected) > 1e-9 * expected) {
    throw ConfigError("kernel grid spacing does not match the image sampling frequency");
  }
  if (padding == Padding::None &&
      (kernel.k_height() > input.height() || kernel.k_width() > input.width())) {
    throw ConfigError("kernel larger than unpadded input");
  }
}

// Direct correlation of one plane with one kernel slice, accumulated into out.
void accumulate_direct(const Plane& in, std::span<const double> k, int kh, int kw,
                       Padding padding, Plane& out) {
  const int ry = kh / 2;
  const int rx = kw / 2;
  const int off_y = padding == Padding::Symmetric ? 0 : ry;
  const int off_x = padding == Padding::Symmetric ? 0 : rx;
  std::vector<int> cols(static_cast<std::size_t>(out.width) + kw);
  for (int c = 0; c < out.width + kw - 1; ++c) cols[c] = mirror_index(c + off_x - rx, in.width);
  for (int r = 0; r < out.height; ++r) {
    double* dst = &out.values[static_cast<std::size_t>(r) * out.width];
    for (int ky = 0; ky < kh; ++ky) {
      const int sy = mirror_index(r + off_y + ky - ry, in.height);
      const double* src = &in.values[static_cast<std::size_t>(sy) * in.width];
      const double* krow = &k[static_cast<std::size_t>(ky) * kw];
      for (int kx = 0; kx < kw; ++kx) {
        const double kv = krow[kx];
        if (kv == 0.0) continue;
        const int* col = &cols[kx];
        for (int c = 0; c < out.width; ++c) dst[c] += kv * src[col[c]];
      }
    }
  }
}

bool slice_is_zero(std::span<const double> s) {
  return std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; });
}

}  // namespace

ImageTensor conv2d(const ImageTensor& input, const KernelTensor& kernel, Padding padding,
                   ConvMethod method) {
  check_conv_inputs(input, kernel, padding);
  const int kh = kernel.k_height();
  const int kw = kernel.k_width();
  const int out_h = padding == Padding::Symmetric ? input.height() : input.height() - kh + 1;
  const int out_w = padding == Padding::Symmetric ? input.width() : input.width() - kw + 1;
  const auto planes = to_planes(input);
  std::vector<Plane> outs(kernel.out_channels(), Plane(out_h, out_w));

  const bool use_fft =
      method == ConvMethod::Fft || (method == ConvMethod::Auto && prefer_fft(kh, kw));
  if (!use_fft) {
    for (int z = 0; z < kernel.out_channels(); ++z) {
      for (int i = 0; i < kernel.in_channels(); ++i) {
        const auto s = kernel.slice(i, z);
        if (slice_is_zero(s)) continue;
        accumulate_direct(planes[i], s, kh, kw, padding, outs[z]);
      }
    }
  } else {
    detail::FftCorrelator fft(input.height(), input.width(), kh, kw, padding);
    std::vector<detail::FftCorrelator::Spectrum> spectra;
    spectra.reserve(planes.size());
    for (const auto& p : planes) spectra.push_back(fft.input_spectrum(p));
    for (int z = 0; z < kernel.out_channels(); ++z) {
      auto acc = fft.zero_spectrum();
      bool any = false;
      for (int i = 0; i < kernel.in_channels(); ++i) {
        const auto s = kernel.slice(i, z);
        if (slice_is_zero(s)) continue;
        detail::FftCorrelator::accumulate(acc, spectra[i], fft.kernel_spectrum(s));
        any = true;
      }
      if (any) outs[z] = fft.output(acc);
    }
  }
  return from_planes(outs, input.sampling_frequency());
}

Plane correlate_plane(const Plane& input, std::span<const double> kernel, int k_height,
                      int k_width, ConvMethod method) {
  if (k_height % 2 == 0 || k_width % 2 == 0) throw ConfigError("kernel extents must be odd");
  const bool use_fft =
      method == ConvMethod::Fft || (method == ConvMethod::Auto && prefer_fft(k_height, k_width));
  if (use_fft) {
    detail::FftCorrelator fft(input.height, input.width, k_height, k_width, Padding::Symmetric);
    auto acc = fft.zero_spectrum();
    detail::FftCorrelator::accumulate(acc, fft.input_spectrum(input), fft.kernel_spectrum(kernel));
    return fft.output(acc);
  }
  Plane out(input.height, input.width);
  accumulate_direct(input, kernel, k_height, k_width, Padding::Symmetric, out);
  return out;
}

Plane correlate_separable(const Plane& input, std::span<const double> taps) {
  const int n = static_cast<int>(taps.size());
  if (n % 2 == 0) throw ConfigError("separable kernel length must be odd");
  const int r = n / 2;
  const int h = input.height;
  const int w = input.width;
  Plane tmp(h, w);
  std::vector<int> cols(static_cast<std::size_t>(w) + n);
  for (int c = 0; c < w + n - 1; ++c) cols[c] = mirror_index(c - r, w);
  for (int y = 0; y < h; ++y) {
    const double* src = &input.values[static_cast<std::size_t>(y) * w];
    double* dst = &tmp.values[static_cast<std::size_t>(y) * w];
    for (int k = 0; k < n; ++k) {
      const double kv = taps[k];
      const int* col = &cols[k];
      for (int x = 0; x < w; ++x) dst[x] += kv * src[col[x]];
    }
  }
  Plane out(h, w);
  for (int y = 0; y < h; ++y) {
    double* dst = &out.values[static_cast<std::size_t>(y) * w];
    for (int k = 0; k < n; ++k) {
      const double kv = taps[k];
      const double* src = &tmp.values[static_cast<std::size_t>(mirror_index(y + k - r, h)) * w];
      for (int x = 0; x < w; ++x) dst[x] += kv * src[x];
    }
  }
  return out;
}

ImageTensor max_pool_2x2(const ImageTensor& input) {
  const int h = input.height();
  const int w = input.width();
  const int c = input.channels();
  const int oh = (h + 1) / 2;
  const int ow = (w + 1) / 2;
  std::vector<double> out(static_cast<std::size_t>(oh) * ow * c);
  for (int r = 0; r < oh; ++r) {
    const int r0 = 2 * r;
    const int r1 = std::min(2 * r + 1, h - 1);  // mirrored extra row when h is odd
    for (int q = 0; q < ow; ++q) {
      const int q0 = 2 * q;
      const int q1 = std::min(2 * q + 1, w - 1);
      for (int ch = 0; ch < c; ++ch) {
        const double m = std::max(std::max(input.at(r0, q0, ch), input.at(r0, q1, ch)),
                                  std::max(input.at(r1, q0, ch), input.at(r1, q1, ch)));
        out[(static_cast<std::size_t>(r) * ow + q) * c + ch] = m;
      }
    }
  }
  return ImageTensor(oh, ow, c, input.sampling_frequency() / 2.0, std::move(out));
}

}  // namespace ppnet
