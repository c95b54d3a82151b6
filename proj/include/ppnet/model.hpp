#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ppnet/kernels.hpp"
#include "ppnet/layers.hpp"
#include "ppnet/tensor.hpp"

namespace ppnet {

inline constexpr int kLayers = 8;
inline constexpr int kGaborChannels = 128;

struct ModelConfig {
  // Samples per degree of the input image.
  double sampling_frequency = 192.0;
  int dog_support = 101;    // layer 4
  int dn5_support = 13;     // layer 5 spatial Gaussian
  int gabor_support = 97;   // layer 6
  int dn7_support = 57;     // layer 7 spatial extent

  void validate() const;
};

// How a parameter may move; drives projection, perturbation and viz metadata.
enum class ParamKind {
  Positive,       // > 0 (widths, biases)
  NonNegative,    // >= 0 (amplitudes)
  SurroundRatio,  // DoG K > 1
  Frequency,      // Gabor carrier, 0 < f < Nyquist of its grid
  Angle,          // radians, axial
  LogScale,       // log sigma
  Matrix,         // unconstrained matrix entry
};

struct ParamGroup {
  int layer = 0;  // 1..8
  std::string name;
  std::string unit;
  ParamKind kind = ParamKind::Positive;
  std::vector<double> values;
  std::vector<std::uint8_t> frozen;  // one flag per value

  std::string qualified_name() const { return "layer" + std::to_string(layer) + "." + name; }
};

// Gabor plan of layer 6: channel z -> (class, frequency index, orientation, phase).
struct GaborChannel {
  ChromaticClass chromatic;
  int freq_index;
  int orientation;
  int phase;  // 0 -> 0 rad, 1 -> pi/2
};
const std::vector<GaborChannel>& gabor_plan();
int class_offset(ChromaticClass c);  // first channel of the class in the plan
int class_bands(ChromaticClass c);   // number of frequency bands

class ModelState {
 public:
  ModelConfig config;
  std::vector<ParamGroup> groups;

  ParamGroup& group(int layer, const std::string& name);
  const ParamGroup& group(int layer, const std::string& name) const;
  const ParamGroup* find(int layer, const std::string& name) const;

  std::size_t size() const;
  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);

  // Flat indices of unfrozen parameters.
  std::vector<std::size_t> trainable_indices() const;
  void freeze_layers(int first, int last, bool frozen = true);

  bool operator==(const ModelState& other) const;
};

ModelState build_bio_model(const ModelConfig& cfg = {});

struct ParamCounts {
  std::array<std::size_t, kLayers> per_layer{};
  std::array<std::size_t, kLayers> trainable{};
  std::size_t total = 0;
  std::size_t total_trainable = 0;
};
ParamCounts count_params(const ModelState& m);

// Output channels of layer 7/8 that depend on flat parameter `index`. Empty
// when the parameter sits before layer 7 and so reaches every channel.
std::vector<int> dependent_output_channels(const ModelState& m, std::size_t index);

// Parameter file: versioned structured text with one section per group.
void save_params(const ModelState& m, const std::filesystem::path& path);
ModelState load_params(const std::filesystem::path& path);
std::string params_to_string(const ModelState& m);
ModelState params_from_string(const std::string& text, const std::string& origin = "<string>");

// taps[k] is the exact input to layer k + 1; taps[0] is the clamped image and
// taps[7] the layer-7 output (the responses before the layer-8 scaling).
struct LayerTaps {
  std::array<ImageTensor, kLayers> taps;
};

struct ForwardResult {
  ImageTensor final;
  LayerTaps taps;
};

// Layer operators with kernels synthesized once for a given input grid.
class CompiledModel {
 public:
  // Layers before first_layer are not compiled and cannot be applied; this
  // keeps re-synthesis cheap when only deep parameters change.
  CompiledModel(const ModelState& state, double input_sampling_frequency, int first_layer = 1);

  double input_sampling_frequency() const { return input_fs_; }
  const ModelState& state() const { return state_; }

  // Runs layer `layer` (1..8) on its input tensor.
  ImageTensor apply_layer(int layer, const ImageTensor& x) const;
  // Layers first..8; if taps is non-null, fills taps[first-1 .. 7].
  ImageTensor run_from(int first, const ImageTensor& input, LayerTaps* taps = nullptr) const;
  // Responses before layer 8 (taps[7]) from layer `first` onward.
  ImageTensor responses_from(int first, const ImageTensor& input) const;

  ForwardResult forward(const ImageTensor& img) const;
  ImageTensor responses(const ImageTensor& img) const;
  // Layer-7 outputs for the listed channels only.
  ImageTensor layer7_channels(const ImageTensor& x, const std::vector<int>& channels) const;

  // Kernels as they are applied (for visualization and checks).
  const KernelTensor& dog_kernels() const { return dog_; }
  const std::vector<std::vector<double>>& gabor_profiles() const { return gabor_profiles_; }
  const ChannelMix& gabor_mix() const { return gabor_mix_; }
  const std::vector<GaborParams>& gabor_params() const { return gabor_params_; }
  const DnNeighborhoodParams& layer7_neighborhood() const;
  const std::vector<double>& scale() const { return B_; }

 private:
  ModelState state_;
  double input_fs_;
  int first_layer_;
  DnParams dn1_, dn3_, dn5_, dn7_;
  ColorMatrix color_;
  KernelTensor dog_;
  ChannelMix gabor_mix_;
  std::vector<GaborParams> gabor_params_;
  std::vector<std::vector<double>> gabor_profiles_;
  std::vector<double> B_;
};

// Checks channel count (InputError) and clamps to [0, 1] with a warning.
ImageTensor prepare_input(const ImageTensor& img);

ForwardResult forward(const ModelState& m, const ImageTensor& img);

// Per-channel metadata of the layer-6/7 channels for the current parameters.
std::vector<ChannelMeta> gabor_channel_meta(const ModelState& m);

// Bring every parameter back into its feasible set; returns the number of
// values changed.
std::size_t project_params(ModelState& m);

double layer6_nyquist(const ModelConfig& cfg);

}  // namespace ppnet
