#include "ppnet/viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fft_conv.hpp"
#include "ppnet/errors.hpp"
#include "ppnet/image_io.hpp"

namespace ppnet {
namespace {

const char* class_name(ChromaticClass c) {
  switch (c) {
    case ChromaticClass::A: return "A";
    case ChromaticClass::T: return "T";
    case ChromaticClass::D: return "D";
  }
  return "";
}

std::string meta_label(const ChannelMeta& m) {
  std::ostringstream os;
  os << m.frequency << ',' << m.orientation << ',' << class_name(m.chromatic);
  return os.str();
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

Range range_of(const std::vector<double>& v) {
  if (v.empty()) return {};
  const auto [a, b] = std::minmax_element(v.begin(), v.end());
  return {*a, *b};
}

// Maps a value to [0, 1]: signed data around mid-gray, non-negative data from 0.
double display(double v, const Range& r) {
  const double amax = std::max(std::abs(r.lo), std::abs(r.hi));
  if (amax == 0.0) return 0.0;
  if (r.lo < 0.0) return 0.5 + 0.5 * v / amax;
  return v / amax;
}

std::filesystem::path meta_path(const std::filesystem::path& out) {
  auto p = out;
  return p.replace_extension(".meta.csv");
}

void write_meta(const std::filesystem::path& path, const std::vector<Panel>& panels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.precision(10);
  out << "panel,in_channel,out_channel,min,max,frequency,orientation,class\n";
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& p = panels[k];
    const auto r = range_of(p.values);
    out << k << ',' << p.in_channel << ',' << p.out_channel << ',' << r.lo << ',' << r.hi << ','
        << (p.label.empty() ? ",," : p.label) << '\n';
  }
}

std::vector<double> fftshift(const std::vector<double>& v, int n0, int n1) {
  std::vector<double> out(v.size());
  for (int r = 0; r < n0; ++r) {
    for (int c = 0; c < n1; ++c) {
      const int rr = (r + n0 / 2) % n0;
      const int cc = (c + n1 / 2) % n1;
      out[static_cast<std::size_t>(rr) * n1 + cc] = v[static_cast<std::size_t>(r) * n1 + c];
    }
  }
  return out;
}

void check_layer(int layer) {
  if (layer < 1 || layer > kLayers) throw ConfigError("layer must be in 1..8");
}

Sheet compose(const std::vector<Panel>& panels, int columns, const Range* fixed) {
  if (panels.empty()) throw ConfigError("nothing to render");
  columns = std::max(1, std::min<int>(columns, static_cast<int>(panels.size())));
  const int rows = (static_cast<int>(panels.size()) + columns - 1) / columns;
  int ph = 0, pw = 0;
  for (const auto& p : panels) {
    ph = std::max(ph, p.height);
    pw = std::max(pw, p.width);
  }
  Sheet s;
  s.height = rows * (ph + 1) - 1;
  s.width = columns * (pw + 1) - 1;
  s.pixels.assign(static_cast<std::size_t>(s.height) * s.width, 0.0);
  for (std::size_t k = 0; k < panels.size(); ++k) {
    const auto& p = panels[k];
    const auto r = fixed ? *fixed : range_of(p.values);
    const int r0 = static_cast<int>(k) / columns * (ph + 1);
    const int c0 = static_cast<int>(k) % columns * (pw + 1);
    for (int y = 0; y < p.height; ++y) {
      for (int x = 0; x < p.width; ++x) {
        s.pixels[static_cast<std::size_t>(r0 + y) * s.width + c0 + x] =
            display(p.values[static_cast<std::size_t>(y) * p.width + x], r);
      }
    }
  }
  return s;
}

Range overall_range(const std::vector<Panel>& panels) {
  Range g = range_of(panels.front().values);
  for (const auto& p : panels) {
    const auto r = range_of(p.values);
    g.lo = std::min(g.lo, r.lo);
    g.hi = std::max(g.hi, r.hi);
  }
  return g;
}

}  // namespace

Sheet compose_sheet(const std::vector<Panel>& panels, int columns, Normalization norm) {
  if (panels.empty()) throw ConfigError("nothing to render");
  if (norm == Normalization::Global) {
    const auto g = overall_range(panels);
    return compose(panels, columns, &g);
  }
  return compose(panels, columns, nullptr);
}

void write_pgm(const std::filesystem::path& path, const Sheet& sheet) {
  RasterImage img;
  img.width = sheet.width;
  img.height = sheet.height;
  img.channels = 1;
  img.samples.resize(sheet.pixels.size());
  for (std::size_t k = 0; k < sheet.pixels.size(); ++k) {
    img.samples[k] =
        static_cast<std::uint16_t>(std::lround(std::clamp(sheet.pixels[k], 0.0, 1.0) * 255.0));
  }
  write_ppm(path, img);
}

std::vector<Panel> kernel_panels(const ModelState& m, int layer) {
  std::vector<Panel> panels;
  if (layer == 2) {
    const auto& M = m.group(2, "matrix").values;
    for (int z = 0; z < 3; ++z) {
      for (int i = 0; i < 3; ++i) {
        Panel p;
        p.height = p.width = 1;
        p.values = {M[z * 3 + i]};
        p.in_channel = i;
        p.out_channel = z;
        panels.push_back(std::move(p));
      }
    }
    return panels;
  }
  if (layer != 4 && layer != 6) {
    throw ConfigError("layer " + std::to_string(layer) +
                      " has no convolution kernels (choose 2, 4 or 6)");
  }
  const CompiledModel cm(m, m.config.sampling_frequency, layer);
  if (layer == 4) {
    const auto& k = cm.dog_kernels();
    for (int z = 0; z < k.out_channels(); ++z) {
      for (int i = 0; i < k.in_channels(); ++i) {
        Panel p;
        p.height = k.k_height();
        p.width = k.k_width();
        const auto s = k.slice(i, z);
        p.values.assign(s.begin(), s.end());
        p.in_channel = i;
        p.out_channel = z;
        panels.push_back(std::move(p));
      }
    }
    return panels;
  }
  const auto meta = gabor_channel_meta(m);
  const auto& mix = cm.gabor_mix();
  const int n = m.config.gabor_support;
  for (int z = 0; z < mix.out_channels; ++z) {
    for (int i = 0; i < mix.in_channels; ++i) {
      Panel p;
      p.height = p.width = n;
      p.values = cm.gabor_profiles()[z];
      for (double& v : p.values) v *= mix(i, z);
      p.in_channel = i;
      p.out_channel = z;
      p.label = meta_label(meta[z]);
      panels.push_back(std::move(p));
    }
  }
  return panels;
}

void render_kernels(const ModelState& m, const RenderSpec& spec) {
  const auto panels = kernel_panels(m, spec.layer);
  // Row = output channel, column = input channel.
  write_pgm(spec.output, compose_sheet(panels, 3, spec.normalization));
  write_meta(meta_path(spec.output), panels);
}

std::vector<Panel> fourier_sum_panels(const ModelState& m, int layer, bool weight_by_scale) {
  if (layer != 4 && layer != 6) {
    throw ConfigError("Fourier sums are available for layers 4 and 6");
  }
  const CompiledModel cm(m, m.config.sampling_frequency, layer);
  std::vector<Panel> panels(3);
  for (int c = 0; c < 3; ++c) {
    panels[c].out_channel = c;
    panels[c].label = std::string(",,") + class_name(static_cast<ChromaticClass>(c));
  }
  if (layer == 4) {
    const auto& k = cm.dog_kernels();
    const int n0 = k.k_height();
    const int n1 = k.k_width();
    for (int z = 0; z < k.out_channels(); ++z) {
      auto& p = panels[z];
      p.height = n0;
      p.width = n1;
      p.values.assign(static_cast<std::size_t>(n0) * n1, 0.0);
      for (int i = 0; i < k.in_channels(); ++i) {
        const auto mag = detail::dft_magnitude(k.slice(i, z), n0, n1);
        for (std::size_t q = 0; q < mag.size(); ++q) p.values[q] += mag[q];
      }
      p.values = fftshift(p.values, n0, n1);
    }
    return panels;
  }
  const int n = m.config.gabor_support;
  const auto& plan = gabor_plan();
  const auto& B = cm.scale();
  const auto& mix = cm.gabor_mix();
  for (auto& p : panels) {
    p.height = p.width = n;
    p.values.assign(static_cast<std::size_t>(n) * n, 0.0);
  }
  for (int z = 0; z < kGaborChannels; ++z) {
    double amp = 0.0;
    for (int i = 0; i < mix.in_channels; ++i) amp += std::abs(mix(i, z));
    if (weight_by_scale) amp *= std::abs(B[z]);
    if (amp == 0.0) continue;
    const auto mag = detail::dft_magnitude(cm.gabor_profiles()[z], n, n);
    auto& p = panels[static_cast<int>(plan[z].chromatic)];
    for (std::size_t q = 0; q < mag.size(); ++q) p.values[q] += amp * mag[q];
  }
  for (auto& p : panels) p.values = fftshift(p.values, n, n);
  return panels;
}

void render_fourier_sum(const ModelState& m, const RenderSpec& spec) {
  const auto panels = fourier_sum_panels(m, spec.layer, spec.weight_by_scale);
  write_pgm(spec.output, compose_sheet(panels, 3, spec.normalization));
  write_meta(meta_path(spec.output), panels);
}

std::vector<Panel> response_panels(const ModelState& m, const ImageTensor& img, int layer) {
  check_layer(layer);
  const auto r = CompiledModel(m, img.sampling_frequency()).forward(img);
  const ImageTensor& t = layer == kLayers ? r.final : r.taps.taps[layer];
  std::vector<ChannelMeta> meta;
  if (layer >= 6) meta = gabor_channel_meta(m);
  const auto planes = to_planes(t);
  std::vector<Panel> panels;
  for (int c = 0; c < t.channels(); ++c) {
    Panel p;
    p.height = t.height();
    p.width = t.width();
    p.values = planes[c].values;
    p.out_channel = c;
    if (!meta.empty()) {
      p.label = meta_label(meta[c]);
    } else if (layer >= 2) {
      p.label = std::string(",,") + class_name(static_cast<ChromaticClass>(c));
    }
    panels.push_back(std::move(p));
  }
  return panels;
}

std::vector<std::filesystem::path> render_responses(const ModelState& m, const ImageTensor& img,
                                                    const RenderSpec& spec) {
  const auto panels = response_panels(m, img, spec.layer);
  constexpr std::size_t kPerSheet = 64;
  const std::size_t sheets = (panels.size() + kPerSheet - 1) / kPerSheet;
  // Global normalization spans every sheet of the layer.
  const Range global = overall_range(panels);
  std::vector<std::filesystem::path> written;
  for (std::size_t s = 0; s < sheets; ++s) {
    std::vector<Panel> part(panels.begin() + s * kPerSheet,
                            panels.begin() + std::min(panels.size(), (s + 1) * kPerSheet));
    auto path = spec.output;
    if (sheets > 1) {
      path = spec.output.parent_path() / (spec.output.stem().string() + "_" + std::to_string(s + 1) +
                                          spec.output.extension().string());
    }
    const int columns = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(part.size()))));
    const bool global_norm = spec.normalization == Normalization::Global;
    write_pgm(path, compose(part, columns, global_norm ? &global : nullptr));
    write_meta(meta_path(path), part);
    written.push_back(path);
  }
  return written;
}

}  // namespace ppnet
