#include "ppnet/metric.hpp"

#include <cmath>
#include <string>

#include "ppnet/errors.hpp"

namespace ppnet {
namespace {

void check_pair(const ImageTensor& a, const ImageTensor& b) {
  if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels()) {
    throw InputError("image dimensions differ: " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + "x" + std::to_string(a.channels()) + " vs " +
                     std::to_string(b.height()) + "x" + std::to_string(b.width()) + "x" +
                     std::to_string(b.channels()));
  }
  if (a.sampling_frequency() != b.sampling_frequency()) {
    throw InputError("images have different sampling frequencies");
  }
}

}  // namespace

ChannelErrors channel_errors_from_responses(const ImageTensor& r, const ImageTensor& d) {
  check_pair(r, d);
  ChannelErrors e;
  const int c = r.channels();
  e.E.assign(c, 0.0);
  const auto a = r.data();
  const auto b = d.data();
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    e.E[k % c] += diff * diff;
  }
  e.N = static_cast<double>(a.size());
  return e;
}

ChannelErrors channel_errors(const CompiledModel& m, const ImageTensor& ref, const ImageTensor& dist) {
  check_pair(ref, dist);
  return channel_errors_from_responses(m.responses(ref), m.responses(dist));
}

ChannelErrors channel_errors(const ModelState& m, const ImageTensor& ref, const ImageTensor& dist) {
  return channel_errors(CompiledModel(m, ref.sampling_frequency()), ref, dist);
}

double distance_from_errors(const ChannelErrors& e, const std::vector<double>& B) {
  if (B.size() != e.E.size()) throw ConfigError("scale vector length does not match channel errors");
  if (!(e.N > 0.0)) throw ConfigError("channel errors have no elements");
  double s = 0.0;
  for (std::size_t c = 0; c < B.size(); ++c) s += B[c] * B[c] * e.E[c];
  return std::sqrt(s / e.N);
}

double rms_difference(const ImageTensor& a, const ImageTensor& b) {
  check_pair(a, b);
  const auto x = a.data();
  const auto y = b.data();
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double diff = x[k] - y[k];
    s += diff * diff;
  }
  return std::sqrt(s / static_cast<double>(x.size()));
}

double perceptual_distance(const CompiledModel& m, const ImageTensor& ref, const ImageTensor& dist) {
  check_pair(ref, dist);
  return rms_difference(m.forward(ref).final, m.forward(dist).final);
}

double perceptual_distance(const ModelState& m, const ImageTensor& ref, const ImageTensor& dist) {
  return perceptual_distance(CompiledModel(m, ref.sampling_frequency()), ref, dist);
}

}  // namespace ppnet
