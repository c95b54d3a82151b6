#include "ppnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "ppnet/diagnostics.hpp"
#include "ppnet/errors.hpp"

namespace ppnet {
namespace {

constexpr double kPi = std::numbers::pi;

ParamGroup make_group(int layer, std::string name, std::string unit, ParamKind kind,
                      std::vector<double> values) {
  ParamGroup g;
  g.layer = layer;
  g.name = std::move(name);
  g.unit = std::move(unit);
  g.kind = kind;
  g.frozen.assign(values.size(), 0);
  g.values = std::move(values);
  return g;
}

const char* class_prefix(ChromaticClass c) {
  switch (c) {
    case ChromaticClass::A: return "A";
    case ChromaticClass::T: return "T";
    case ChromaticClass::D: return "D";
  }
  return "?";
}

constexpr std::array<ChromaticClass, 3> kClasses{ChromaticClass::A, ChromaticClass::T,
                                                 ChromaticClass::D};

// Offset of a class's bands inside the layer-7 gamma_f vector.
int band_offset(ChromaticClass c) {
  switch (c) {
    case ChromaticClass::A: return 0;
    case ChromaticClass::T: return 4;
    case ChromaticClass::D: return 6;
  }
  return 0;
}

}  // namespace

void ModelConfig::validate() const {
  if (!(sampling_frequency > 0.0) || !std::isfinite(sampling_frequency)) {
    throw ConfigError("model sampling frequency must be positive");
  }
  for (int s : {dog_support, dn5_support, gabor_support, dn7_support}) {
    if (s < 1 || s % 2 == 0) throw ConfigError("kernel supports must be odd and positive");
  }
}

const std::vector<GaborChannel>& gabor_plan() {
  static const std::vector<GaborChannel> plan = [] {
    std::vector<GaborChannel> p;
    for (auto c : kClasses) {
      const int bands = c == ChromaticClass::A ? 4 : 2;
      for (int f = 0; f < bands; ++f) {
        for (int o = 0; o < 8; ++o) {
          for (int ph = 0; ph < 2; ++ph) p.push_back({c, f, o, ph});
        }
      }
    }
    return p;
  }();
  return plan;
}

int class_offset(ChromaticClass c) {
  switch (c) {
    case ChromaticClass::A: return 0;
    case ChromaticClass::T: return 64;
    case ChromaticClass::D: return 96;
  }
  return 0;
}

int class_bands(ChromaticClass c) { return c == ChromaticClass::A ? 4 : 2; }

double layer6_nyquist(const ModelConfig& cfg) { return 0.5 * cfg.sampling_frequency / 4.0; }

ParamGroup& ModelState::group(int layer, const std::string& name) {
  for (auto& g : groups) {
    if (g.layer == layer && g.name == name) return g;
  }
  throw ConfigError("model has no parameter group layer" + std::to_string(layer) + "." + name);
}

const ParamGroup& ModelState::group(int layer, const std::string& name) const {
  if (const auto* g = find(layer, name)) return *g;
  throw ConfigError("model has no parameter group layer" + std::to_string(layer) + "." + name);
}

const ParamGroup* ModelState::find(int layer, const std::string& name) const {
  for (const auto& g : groups) {
    if (g.layer == layer && g.name == name) return &g;
  }
  return nullptr;
}

std::size_t ModelState::size() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.values.size();
  return n;
}

std::vector<double> ModelState::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& g : groups) out.insert(out.end(), g.values.begin(), g.values.end());
  return out;
}

void ModelState::assign(const std::vector<double>& flat) {
  if (flat.size() != size()) throw ConfigError("parameter vector length does not match the model");
  std::size_t k = 0;
  for (auto& g : groups) {
    for (double& v : g.values) v = flat[k++];
  }
}

std::vector<std::size_t> ModelState::trainable_indices() const {
  std::vector<std::size_t> idx;
  std::size_t k = 0;
  for (const auto& g : groups) {
    for (std::size_t j = 0; j < g.values.size(); ++j, ++k) {
      if (!g.frozen[j]) idx.push_back(k);
    }
  }
  return idx;
}

void ModelState::freeze_layers(int first, int last, bool frozen) {
  for (auto& g : groups) {
    if (g.layer >= first && g.layer <= last) g.frozen.assign(g.values.size(), frozen ? 1 : 0);
  }
}

bool ModelState::operator==(const ModelState& o) const {
  if (config.sampling_frequency != o.config.sampling_frequency ||
      config.dog_support != o.config.dog_support || config.dn5_support != o.config.dn5_support ||
      config.gabor_support != o.config.gabor_support ||
      config.dn7_support != o.config.dn7_support || groups.size() != o.groups.size()) {
    return false;
  }
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& a = groups[i];
    const auto& b = o.groups[i];
    if (a.layer != b.layer || a.name != b.name || a.unit != b.unit || a.kind != b.kind ||
        a.frozen != b.frozen || a.values.size() != b.values.size()) {
      return false;
    }
    // Bitwise, so that -0.0 and NaN payloads count as differences.
    if (std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

ModelState build_bio_model(const ModelConfig& cfg) {
  cfg.validate();
  ModelState m;
  m.config = cfg;
  auto& g = m.groups;

  g.push_back(make_group(1, "beta", "1", ParamKind::Positive, {0.1}));
  g.push_back(make_group(1, "H", "1", ParamKind::NonNegative, {0.5}));

  const auto jh = ColorMatrix::jameson_hurvich().M;
  g.push_back(make_group(2, "matrix", "1", ParamKind::Matrix, {jh.begin(), jh.end()}));

  g.push_back(make_group(3, "beta", "1", ParamKind::Positive, {1.0, 1.0, 1.0}));
  g.push_back(make_group(3, "H", "1", ParamKind::NonNegative, std::vector<double>(3, 1.0 / 3.0)));

  // Layer 4: 3x3 slices (i-major); shape parameters follow the output class.
  const std::array<double, 3> K{1.1, 5.0, 5.0};
  const std::array<double, 3> log_sigma{-1.9, -1.76, -1.76};
  std::vector<double> mix4(9, 0.0), k4(9), ls4(9);
  for (int i = 0; i < 3; ++i) {
    for (int z = 0; z < 3; ++z) {
      mix4[i * 3 + z] = i == z ? 1.0 : 0.0;
      k4[i * 3 + z] = K[z];
      ls4[i * 3 + z] = log_sigma[z];
    }
  }
  g.push_back(make_group(4, "mix", "1", ParamKind::NonNegative, mix4));
  g.push_back(make_group(4, "K", "1", ParamKind::SurroundRatio, k4));
  g.push_back(make_group(4, "log_sigma", "log(deg)", ParamKind::LogScale, ls4));

  g.push_back(make_group(5, "A", "1", ParamKind::NonNegative, {1.0, 1.0, 1.0}));
  g.push_back(make_group(5, "beta", "1", ParamKind::Positive, {0.1, 0.1, 0.1}));
  g.push_back(make_group(5, "gamma", "1/deg", ParamKind::Positive, {25.0, 25.0, 25.0}));

  // Layer 6: each Gabor reads only its own class channel.
  const auto& plan = gabor_plan();
  std::vector<double> mix6(3 * kGaborChannels, 0.0);
  for (int z = 0; z < kGaborChannels; ++z) {
    mix6[static_cast<std::size_t>(static_cast<int>(plan[z].chromatic)) * kGaborChannels + z] = 1.0;
  }
  g.push_back(make_group(6, "mix", "1", ParamKind::NonNegative, mix6));
  std::vector<double> orient(8);
  for (int k = 0; k < 8; ++k) orient[k] = k * kPi / 8.0;
  struct Bands {
    std::vector<double> f, gx, gy;
  };
  const std::array<Bands, 3> bands{Bands{{2, 4, 8, 16}, {1.87, 3.48, 6.50, 12.13}, {1.49, 2.79, 5.20, 9.70}},
                                   Bands{{3, 6}, {2.69, 5.02}, {2.15, 4.01}},
                                   Bands{{3, 6}, {2.69, 5.02}, {2.15, 4.01}}};
  for (auto c : kClasses) {
    const auto& b = bands[static_cast<int>(c)];
    const std::string p = class_prefix(c);
    g.push_back(make_group(6, p + "_f", "cpd", ParamKind::Frequency, b.f));
    g.push_back(make_group(6, p + "_gamma_x", "1/deg", ParamKind::Positive, b.gx));
    g.push_back(make_group(6, p + "_gamma_y", "1/deg", ParamKind::Positive, b.gy));
    g.push_back(make_group(6, p + "_theta_f", "rad", ParamKind::Angle, orient));
    g.push_back(make_group(6, p + "_theta_env", "rad", ParamKind::Angle, orient));
  }

  g.push_back(make_group(7, "A", "1", ParamKind::NonNegative, std::vector<double>(kGaborChannels, 1.0)));
  g.push_back(make_group(7, "beta", "1", ParamKind::Positive, std::vector<double>(kGaborChannels, 0.1)));
  g.push_back(make_group(7, "gamma_s", "1/deg", ParamKind::Positive, std::vector<double>(kGaborChannels, 5.0)));
  g.push_back(make_group(7, "gamma_f", "1/cpd", ParamKind::Positive,
                         {1.25, 0.63, 0.31, 0.16, 0.83, 0.42, 0.83, 0.42}));
  g.push_back(make_group(7, "sigma_o", "rad", ParamKind::Positive, std::vector<double>(8, 0.11 * kPi)));

  g.push_back(make_group(8, "B", "1", ParamKind::NonNegative, std::vector<double>(kGaborChannels, 1.0)));
  return m;
}

std::vector<int> dependent_output_channels(const ModelState& m, std::size_t index) {
  std::size_t offset = 0;
  for (const auto& g : m.groups) {
    if (index >= offset + g.values.size()) {
      offset += g.values.size();
      continue;
    }
    const int k = static_cast<int>(index - offset);
    if (g.layer < 7) return {};
    if (g.layer == 8 || g.name == "A" || g.name == "beta" || g.name == "gamma_s") return {k};
    const auto& plan = gabor_plan();
    std::vector<int> out;
    for (int z = 0; z < kGaborChannels; ++z) {
      const int key = g.name == "gamma_f" ? band_offset(plan[z].chromatic) + plan[z].freq_index
                                          : plan[z].orientation;
      if (key == k) out.push_back(z);
    }
    return out;
  }
  throw ConfigError("parameter index " + std::to_string(index) + " out of range");
}

ParamCounts count_params(const ModelState& m) {
  ParamCounts c;
  for (const auto& g : m.groups) {
    if (g.layer < 1 || g.layer > kLayers) continue;
    c.per_layer[g.layer - 1] += g.values.size();
    for (auto f : g.frozen) {
      if (!f) ++c.trainable[g.layer - 1];
    }
  }
  for (int l = 0; l < kLayers; ++l) {
    c.total += c.per_layer[l];
    c.total_trainable += c.trainable[l];
  }
  return c;
}

std::vector<ChannelMeta> gabor_channel_meta(const ModelState& m) {
  std::vector<ChannelMeta> meta(kGaborChannels);
  const auto& plan = gabor_plan();
  for (int z = 0; z < kGaborChannels; ++z) {
    const std::string p = class_prefix(plan[z].chromatic);
    meta[z].frequency = m.group(6, p + "_f").values[plan[z].freq_index];
    meta[z].orientation = m.group(6, p + "_theta_f").values[plan[z].orientation];
    meta[z].chromatic = plan[z].chromatic;
  }
  return meta;
}

std::size_t project_params(ModelState& m) {
  const double f_max = 0.95 * layer6_nyquist(m.config);
  std::size_t changed = 0;
  for (auto& g : m.groups) {
    for (double& v : g.values) {
      double p = v;
      switch (g.kind) {
        case ParamKind::Positive: p = std::max(v, 1e-6); break;
        case ParamKind::NonNegative: p = std::max(v, 0.0); break;
        case ParamKind::SurroundRatio: p = v > 1.0 + 1e-6 ? v : 1.0 + 2e-6; break;
        case ParamKind::Frequency: p = std::clamp(v, 1e-6, f_max); break;
        case ParamKind::Angle:
        case ParamKind::LogScale:
        case ParamKind::Matrix: break;
      }
      if (p != v) {
        v = p;
        ++changed;
      }
    }
  }
  return changed;
}

ImageTensor prepare_input(const ImageTensor& img) {
  if (img.channels() != 3) {
    throw InputError("model input must have 3 channels, got " + std::to_string(img.channels()));
  }
  const auto data = img.data();
  std::size_t outside = 0;
  for (double v : data) {
    if (v < 0.0 || v > 1.0) ++outside;
  }
  if (outside == 0) return img;
  warn(std::to_string(outside) + " input values outside [0, 1] were clamped");
  std::vector<double> clamped(data.begin(), data.end());
  for (double& v : clamped) v = std::clamp(v, 0.0, 1.0);
  return ImageTensor(img.height(), img.width(), 3, img.sampling_frequency(), std::move(clamped));
}

CompiledModel::CompiledModel(const ModelState& state, double input_sampling_frequency,
                             int first_layer)
    : state_(state), input_fs_(input_sampling_frequency), first_layer_(first_layer) {
  const auto& cfg = state_.config;
  cfg.validate();
  if (!(input_fs_ > 0.0)) throw ConfigError("input sampling frequency must be positive");
  const double spacing4 = 2.0 / input_fs_;
  const double spacing6 = 4.0 / input_fs_;
  if (first_layer_ < 1 || first_layer_ > kLayers) throw ConfigError("first layer must be in 1..8");
  const auto wanted = [&](int layer) { return layer >= first_layer_; };

  if (wanted(1)) {
    dn1_.B = {1.0};
    dn1_.beta = state_.group(1, "beta").values;
    dn1_.neighborhood = PointwiseNeighborhood{state_.group(1, "H").values};
  }
  if (wanted(2)) {
    const auto& mat = state_.group(2, "matrix").values;
    if (mat.size() != 9) throw ConfigError("layer 2 matrix must have 9 entries");
    std::copy(mat.begin(), mat.end(), color_.M.begin());
  }
  if (wanted(3)) {
    dn3_.B = {1.0};
    dn3_.beta = state_.group(3, "beta").values;
    dn3_.neighborhood = PointwiseNeighborhood{state_.group(3, "H").values};
  }
  if (wanted(4)) {
    ChannelMix mix4{3, 3, state_.group(4, "mix").values};
    const auto& K = state_.group(4, "K").values;
    const auto& ls = state_.group(4, "log_sigma").values;
    std::vector<DoGParams> slices(9);
    for (std::size_t k = 0; k < 9; ++k) slices[k] = {std::exp(-ls.at(k)), K.at(k)};
    dog_ = dog_kernel_bank(slices, mix4, cfg.dog_support, spacing4);
  }
  if (wanted(5)) {
    dn5_.B = {1.0};
    dn5_.beta = state_.group(5, "beta").values;
    dn5_.neighborhood = SpatialGaussianNeighborhood{
        state_.group(5, "A").values, state_.group(5, "gamma").values, cfg.dn5_support};
  }

  gabor_mix_ = ChannelMix{3, kGaborChannels, state_.group(6, "mix").values};
  if (gabor_mix_.A.size() != 3u * kGaborChannels) throw ConfigError("layer 6 mix must be 3x128");
  const auto& plan = gabor_plan();
  gabor_params_.resize(kGaborChannels);
  gabor_profiles_.resize(kGaborChannels);
  for (int z = 0; z < kGaborChannels; ++z) {
    const auto& ch = plan[z];
    const std::string p = class_prefix(ch.chromatic);
    GaborParams gp;
    gp.f = state_.group(6, p + "_f").values.at(ch.freq_index);
    gp.gamma_x = state_.group(6, p + "_gamma_x").values.at(ch.freq_index);
    gp.gamma_y = state_.group(6, p + "_gamma_y").values.at(ch.freq_index);
    gp.theta_f = state_.group(6, p + "_theta_f").values.at(ch.orientation);
    gp.theta_env = state_.group(6, p + "_theta_env").values.at(ch.orientation);
    gp.phase = ch.phase * kPi / 2.0;
    gabor_params_[z] = gp;
    if (wanted(6)) gabor_profiles_[z] = gabor_unit_profile(gp, cfg.gabor_support, spacing6);
  }

  SpectralNeighborhood n7;
  n7.size = cfg.dn7_support;
  n7.params.amplitude = state_.group(7, "A").values;
  n7.params.gamma_s = state_.group(7, "gamma_s").values;
  n7.params.channel_meta = gabor_channel_meta(state_);
  const auto& gf = state_.group(7, "gamma_f").values;
  const auto& so = state_.group(7, "sigma_o").values;
  n7.params.gamma_f.resize(kGaborChannels);
  n7.params.sigma_o.resize(kGaborChannels);
  for (int z = 0; z < kGaborChannels; ++z) {
    n7.params.gamma_f[z] = gf.at(band_offset(plan[z].chromatic) + plan[z].freq_index);
    n7.params.sigma_o[z] = so.at(plan[z].orientation);
  }
  n7.params.validate();
  dn7_.B = {1.0};
  dn7_.beta = state_.group(7, "beta").values;
  dn7_.neighborhood = std::move(n7);

  B_ = state_.group(8, "B").values;
  if (B_.size() != static_cast<std::size_t>(kGaborChannels)) {
    throw ConfigError("layer 8 scale must have 128 entries");
  }
}

const DnNeighborhoodParams& CompiledModel::layer7_neighborhood() const {
  return std::get<SpectralNeighborhood>(dn7_.neighborhood).params;
}

ImageTensor CompiledModel::apply_layer(int layer, const ImageTensor& x) const {
  if (layer >= 1 && layer < first_layer_) {
    throw ConfigError("layer " + std::to_string(layer) + " was not compiled");
  }
  switch (layer) {
    case 1: return divisive_norm(x, dn1_);
    case 2: return max_pool_2x2(color_matrix(x, color_));
    case 3: return divisive_norm(x, dn3_);
    case 4: return max_pool_2x2(conv2d(x, dog_, Padding::Symmetric));
    case 5: return divisive_norm(x, dn5_);
    case 6: return apply_gabor_profiles(x, gabor_profiles_, gabor_mix_, state_.config.gabor_support);
    case 7: return divisive_norm(x, dn7_);
    case 8: {
      if (x.channels() != kGaborChannels) throw ConfigError("layer 8 expects 128 channels");
      std::vector<double> out(x.data().begin(), x.data().end());
      for (std::size_t k = 0; k < out.size(); ++k) out[k] *= B_[k % kGaborChannels];
      return ImageTensor(x.height(), x.width(), x.channels(), x.sampling_frequency(), std::move(out));
    }
    default: throw ConfigError("layer index must be in 1..8, got " + std::to_string(layer));
  }
}

ImageTensor CompiledModel::layer7_channels(const ImageTensor& x, const std::vector<int>& channels) const {
  if (first_layer_ > 7) throw ConfigError("layer 7 was not compiled");
  return divisive_norm(x, dn7_, channels);
}

ImageTensor CompiledModel::run_from(int first, const ImageTensor& input, LayerTaps* taps) const {
  if (first < 1 || first > kLayers) throw ConfigError("first layer must be in 1..8");
  ImageTensor x = input;
  for (int l = first; l <= kLayers; ++l) {
    if (taps) taps->taps[l - 1] = x;
    x = apply_layer(l, x);
  }
  return x;
}

ImageTensor CompiledModel::responses_from(int first, const ImageTensor& input) const {
  if (first < 1 || first > kLayers) throw ConfigError("first layer must be in 1..8");
  ImageTensor x = input;
  for (int l = first; l < kLayers; ++l) x = apply_layer(l, x);
  return x;
}

ForwardResult CompiledModel::forward(const ImageTensor& img) const {
  ForwardResult r;
  const auto x = prepare_input(img);
  r.final = run_from(1, x, &r.taps);
  return r;
}

ImageTensor CompiledModel::responses(const ImageTensor& img) const {
  return responses_from(1, prepare_input(img));
}

ForwardResult forward(const ModelState& m, const ImageTensor& img) {
  return CompiledModel(m, img.sampling_frequency()).forward(img);
}

}  // namespace ppnet
