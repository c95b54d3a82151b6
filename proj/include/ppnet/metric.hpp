#pragma once

#include <vector>

#include "ppnet/model.hpp"

namespace ppnet {

// Per-channel sums of squared response differences before layer-8 scaling.
struct ChannelErrors {
  std::vector<double> E;
  double N = 0.0;  // pixels x channels
};

ChannelErrors channel_errors_from_responses(const ImageTensor& ref_resp, const ImageTensor& dist_resp);
ChannelErrors channel_errors(const CompiledModel& m, const ImageTensor& ref, const ImageTensor& dist);
ChannelErrors channel_errors(const ModelState& m, const ImageTensor& ref, const ImageTensor& dist);

// d = sqrt(sum_c B_c^2 E_c / N).
double distance_from_errors(const ChannelErrors& e, const std::vector<double>& B);

// RMS difference of the final (scaled) responses.
double perceptual_distance(const CompiledModel& m, const ImageTensor& ref, const ImageTensor& dist);
double perceptual_distance(const ModelState& m, const ImageTensor& ref, const ImageTensor& dist);

// RMS difference between two equally shaped tensors.
double rms_difference(const ImageTensor& a, const ImageTensor& b);

}  // namespace ppnet
