#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ppnet/dataset.hpp"
#include "ppnet/metric.hpp"
#include "ppnet/model.hpp"

namespace ppnet {

struct FitSettings {
  int steps = 200;
  double learning_rate = 1.0;
  double fd_step = 1e-3;
  int crop = 0;   // center crop in pixels, 0 = full image
  int batch = 0;  // fixed evaluation subset size, 0 = every record
  std::uint64_t seed = 0;
  int threads = 1;
};

// key = value lines (steps, learning_rate, fd_step, crop, batch, seed, threads);
// '#' starts a comment. Unknown keys are errors.
FitSettings parse_fit_settings(const std::string& text, FitSettings base = {});
FitSettings load_fit_settings(const std::filesystem::path& path, FitSettings base = {});

// Layers 1..frozen_through are frozen; the rest are trained.
struct FreezeSpec {
  int frozen_through = 7;
};

struct FitReport {
  int iterations = 0;        // accepted steps
  int steps_attempted = 0;
  double initial_pearson = 0.0;
  double final_pearson = 0.0;
  std::vector<double> loss_history;  // after each accepted step
  std::array<double, kLayers> layer_delta{};  // L2 norm of the change per layer
  std::size_t trainable = 0;
  std::size_t records = 0;
  std::size_t excluded = 0;
  std::size_t projections = 0;
  double seconds = 0.0;
  std::uint64_t seed = 0;
};

struct ScaleFit {
  std::vector<double> B;
  FitReport report;
};

// Loss pearson(d(B), mos) and its gradient with respect to B.
double scale_loss(const std::vector<ChannelErrors>& errors, const std::vector<double>& mos,
                  const std::vector<double>& B, std::vector<double>* grad = nullptr);

// Gradient descent with backtracking on precomputed channel errors. Records
// whose distance is zero are excluded with a warning.
ScaleFit fit_scale_on_errors(const std::vector<ChannelErrors>& errors, const std::vector<double>& mos,
                             std::vector<double> B, int steps, double learning_rate);

// Forward passes for every record (optionally center-cropped).
std::vector<ChannelErrors> compute_channel_errors(const ModelState& m, const Manifest& manifest,
                                                  int threads = 1, int crop = 0);

std::pair<ModelState, FitReport> fit_final_scale(const ModelState& m, const Manifest& manifest,
                                                 int steps, double learning_rate,
                                                 std::uint64_t seed, int threads = 1, int crop = 0);
std::pair<ModelState, FitReport> fit_final_scale(const ModelState& m,
                                                 const std::vector<ChannelErrors>& errors,
                                                 const std::vector<double>& mos, int steps,
                                                 double learning_rate, std::uint64_t seed);

inline constexpr std::size_t kMaxLadderParams = 700;

// Pre-decoded reference/distorted pairs plus their target scores.
struct PairSet {
  std::vector<ImageTensor> ref;
  std::vector<ImageTensor> dist;
  std::vector<double> mos;
};

// Fixed evaluation subset: `batch` records drawn with `seed` (all if 0),
// decoded and center-cropped.
PairSet load_pairs(const Manifest& manifest, double sampling_frequency, int crop, int batch,
                   std::uint64_t seed);

std::pair<ModelState, FitReport> fit_freeze_ladder(const ModelState& m, const FreezeSpec& spec,
                                                   const PairSet& pairs, const FitSettings& s);
std::pair<ModelState, FitReport> fit_freeze_ladder(const ModelState& m, const FreezeSpec& spec,
                                                   const Manifest& manifest, const FitSettings& s);

// Random perturbation of a state; strength 0 leaves it unchanged.
ModelState perturb_params(const ModelState& m, std::uint64_t seed, std::uint64_t draw,
                          double strength = 1.0);

struct SweepResult {
  std::vector<double> pearson;  // NaN where a draw failed to evaluate
  std::vector<std::uint64_t> draw;
};

SweepResult random_init_sweep(const ModelConfig& cfg, const PairSet& pairs, int n_inits,
                              std::uint64_t seed, int threads = 1, double strength = 1.0);

struct HistogramBin {
  double lo, hi;
  std::size_t count;
};
std::vector<HistogramBin> histogram(const std::vector<double>& values, int bins = 20,
                                    double lo = -1.0, double hi = 1.0);

void write_sweep_csv(const SweepResult& r, const std::filesystem::path& samples_path,
                     const std::filesystem::path& histogram_path);
void write_fit_report(const FitReport& r, const std::filesystem::path& csv_path);
void print_fit_summary(std::ostream& os, const FitReport& r);

}  // namespace ppnet
