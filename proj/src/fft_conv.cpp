#include "fft_conv.hpp"

#include <fftw3.h>

#include <mutex>

#include "ppnet/errors.hpp"

namespace ppnet::detail {
namespace {

// FFTW's planner is not re-entrant; execution on new arrays is.
std::mutex g_planner_mutex;

int good_fft_size(int n) {
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

}  // namespace

struct FftCorrelator::Impl {
  int n0 = 0;
  int n1 = 0;
  int nc = 0;  // n1 / 2 + 1
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  ~Impl() {
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }
};

FftCorrelator::FftCorrelator(int height, int width, int k_height, int k_width, Padding padding)
    : impl_(std::make_unique<Impl>()),
      h_(height),
      w_(width),
      kh_(k_height),
      kw_(k_width),
      padding_(padding) {
  if (k_height % 2 == 0 || k_width % 2 == 0) {
    throw ConfigError("FFT correlation requires odd kernel extents");
  }
  const int ry = kh_ / 2;
  const int rx = kw_ / 2;
  int ph = h_;
  int pw = w_;
  if (padding_ == Padding::Symmetric) {
    ph += 2 * ry;
    pw += 2 * rx;
    out_h_ = h_;
    out_w_ = w_;
  } else {
    out_h_ = h_ - 2 * ry;
    out_w_ = w_ - 2 * rx;
    if (out_h_ <= 0 || out_w_ <= 0) throw ConfigError("kernel larger than unpadded input");
  }
  impl_->n0 = good_fft_size(ph);
  impl_->n1 = good_fft_size(pw);
  impl_->nc = impl_->n1 / 2 + 1;

  std::vector<double> real(static_cast<std::size_t>(impl_->n0) * impl_->n1);
  std::vector<std::complex<double>> cplx(static_cast<std::size_t>(impl_->n0) * impl_->nc);
  auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
  std::lock_guard<std::mutex> lock(g_planner_mutex);
  impl_->forward = fftw_plan_dft_r2c_2d(impl_->n0, impl_->n1, real.data(), c,
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
  impl_->backward = fftw_plan_dft_c2r_2d(impl_->n0, impl_->n1, c, real.data(),
                                         FFTW_ESTIMATE | FFTW_UNALIGNED | FFTW_DESTROY_INPUT);
  if (!impl_->forward || !impl_->backward) throw ConfigError("FFTW planning failed");
}

FftCorrelator::~FftCorrelator() = default;

FftCorrelator::Spectrum FftCorrelator::zero_spectrum() const {
  return Spectrum(static_cast<std::size_t>(impl_->n0) * impl_->nc);
}

FftCorrelator::Spectrum FftCorrelator::input_spectrum(const Plane& input) const {
  const int n0 = impl_->n0;
  const int n1 = impl_->n1;
  std::vector<double> real(static_cast<std::size_t>(n0) * n1, 0.0);
  if (padding_ == Padding::Symmetric) {
    const int ry = kh_ / 2;
    const int rx = kw_ / 2;
    const int ph = h_ + 2 * ry;
    const int pw = w_ + 2 * rx;
    std::vector<int> cols(pw);
    for (int x = 0; x < pw; ++x) cols[x] = mirror_index(x - rx, w_);
    for (int y = 0; y < ph; ++y) {
      const int sy = mirror_index(y - ry, h_);
      const double* src = &input.values[static_cast<std::size_t>(sy) * w_];
      double* dst = &real[static_cast<std::size_t>(y) * n1];
      for (int x = 0; x < pw; ++x) dst[x] = src[cols[x]];
    }
  } else {
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) real[static_cast<std::size_t>(y) * n1 + x] = input(y, x);
    }
  }
  Spectrum out = zero_spectrum();
  fftw_execute_dft_r2c(impl_->forward, real.data(), reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

FftCorrelator::Spectrum FftCorrelator::kernel_spectrum(std::span<const double> kernel) const {
  const int n0 = impl_->n0;
  const int n1 = impl_->n1;
  const int ry = kh_ / 2;
  const int rx = kw_ / 2;
  std::vector<double> real(static_cast<std::size_t>(n0) * n1, 0.0);
  for (int y = 0; y < kh_; ++y) {
    const int dy = y - ry;
    const int row = ((-dy) % n0 + n0) % n0;
    for (int x = 0; x < kw_; ++x) {
      const int dx = x - rx;
      const int col = ((-dx) % n1 + n1) % n1;
      real[static_cast<std::size_t>(row) * n1 + col] = kernel[static_cast<std::size_t>(y) * kw_ + x];
    }
  }
  Spectrum out = zero_spectrum();
  fftw_execute_dft_r2c(impl_->forward, real.data(), reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

void FftCorrelator::accumulate(Spectrum& acc, const Spectrum& a, const Spectrum& b,
                               double weight) {
  const std::size_t n = acc.size();
  if (weight == 1.0) {
    for (std::size_t k = 0; k < n; ++k) acc[k] += a[k] * b[k];
  } else {
    for (std::size_t k = 0; k < n; ++k) acc[k] += weight * (a[k] * b[k]);
  }
}

Plane FftCorrelator::output(const Spectrum& product) const {
  const int n0 = impl_->n0;
  const int n1 = impl_->n1;
  Spectrum scratch = product;
  std::vector<double> real(static_cast<std::size_t>(n0) * n1);
  fftw_execute_dft_c2r(impl_->backward, reinterpret_cast<fftw_complex*>(scratch.data()),
                       real.data());
  const double scale = 1.0 / (static_cast<double>(n0) * n1);
  const int ry = kh_ / 2;
  const int rx = kw_ / 2;
  Plane out(out_h_, out_w_);
  for (int y = 0; y < out_h_; ++y) {
    const double* src = &real[static_cast<std::size_t>(y + ry) * n1 + rx];
    for (int x = 0; x < out_w_; ++x) out(y, x) = src[x] * scale;
  }
  return out;
}

std::vector<double> dft_magnitude(std::span<const double> values, int n0, int n1) {
  if (values.size() != static_cast<std::size_t>(n0) * n1) throw ConfigError("DFT size mismatch");
  std::vector<std::complex<double>> in(values.begin(), values.end());
  std::vector<std::complex<double>> out(in.size());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    plan = fftw_plan_dft_2d(n0, n1, reinterpret_cast<fftw_complex*>(in.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    fftw_destroy_plan(plan);
  }
  std::vector<double> mag(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) mag[k] = std::abs(out[k]);
  return mag;
}

}  // namespace ppnet::detail
