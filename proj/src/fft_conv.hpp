#pragma once

#include <complex>
#include <memory>
#include <span>
#include <vector>

#include "ppnet/tensor.hpp"

namespace ppnet::detail {

// FFT-based 2-D cross-correlation of h x w planes with odd kh x kw kernels.
// Inputs are mirror-padded (Padding::Symmetric) or used as-is (Padding::None,
// valid region only). Spectra of padded inputs and of kernels are exposed so
// callers can reuse them across many input/output channel pairs.
class FftCorrelator {
 public:
  using Spectrum = std::vector<std::complex<double>>;

  FftCorrelator(int height, int width, int k_height, int k_width, Padding padding);
  ~FftCorrelator();
  FftCorrelator(const FftCorrelator&) = delete;
  FftCorrelator& operator=(const FftCorrelator&) = delete;

  Spectrum input_spectrum(const Plane& input) const;
  Spectrum kernel_spectrum(std::span<const double> kernel) const;

  // acc += a * b (elementwise), with weight.
  static void accumulate(Spectrum& acc, const Spectrum& a, const Spectrum& b, double weight = 1.0);
  Spectrum zero_spectrum() const;

  // Inverse transform and crop to the output region.
  Plane output(const Spectrum& product) const;

  int out_height() const { return out_h_; }
  int out_width() const { return out_w_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int h_, w_, kh_, kw_;
  Padding padding_;
  int out_h_, out_w_;
};

// |DFT| of an n0 x n1 real array, unshifted (index 0 is zero frequency).
std::vector<double> dft_magnitude(std::span<const double> values, int n0, int n1);

}  // namespace ppnet::detail
