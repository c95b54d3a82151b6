#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ppnet/dataset.hpp"
#include "ppnet/model.hpp"

namespace ppnet {

struct CorrelationReport {
  double pearson = 0.0;
  std::size_t n = 0;
  std::vector<double> distances;  // manifest order
  std::vector<double> mos;
};

struct ConsistencyReport {
  int trials = 0;
  std::uint64_t seed = 0;
  std::vector<double> samples;  // one correlation per trial
  double mean = 0.0;
  double max = 0.0;
  double p95 = 0.0;
  double rho_max = 0.0;  // = p95
};

// Distance for record `index`; may read the images itself.
using RecordMetric = std::function<double(const IqaRecord&, std::size_t index)>;
// Distance for a decoded pair.
using PairMetric = std::function<double(const ImageTensor& ref, const ImageTensor& dist)>;

// Records are evaluated concurrently; the correlation is a fold in manifest
// order. Decode failures abort with every failing record listed.
CorrelationReport evaluate_dataset(const RecordMetric& metric, const Manifest& manifest,
                                   int threads = 1);
CorrelationReport evaluate_dataset(const PairMetric& metric, const Manifest& manifest,
                                   double sampling_frequency, int threads = 1, int crop = 0);

PairMetric ppnet_metric(const ModelState& m);
PairMetric ssim_metric();  // 1 - SSIM

// Mean local SSIM on luminance (11-tap Gaussian window, sigma 1.5, valid region).
double ssim(const ImageTensor& ref, const ImageTensor& dist);

ConsistencyReport monte_carlo_rho_max(const Manifest& manifest, int trials, std::uint64_t seed,
                                      int threads = 1);

void write_correlation_csv(const CorrelationReport& r, const Manifest& m,
                           const std::filesystem::path& path);
void write_consistency_csv(const ConsistencyReport& r, const std::filesystem::path& path);
void print_summary(std::ostream& os, const CorrelationReport& r, const std::string& settings);
void print_summary(std::ostream& os, const ConsistencyReport& r, std::size_t records);

}  // namespace ppnet
