#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ppnet/model.hpp"

namespace ppnet {

enum class RenderTarget { Kernels, FourierSum, LayerTaps };
enum class Normalization { PerPanel, Global };

struct RenderSpec {
  RenderTarget target = RenderTarget::Kernels;
  int layer = 4;  // 1..8
  Normalization normalization = Normalization::PerPanel;
  std::filesystem::path output;
  bool weight_by_scale = false;  // fourier_sum: weight filters by |B|
};

// One grayscale panel and its annotation.
struct Panel {
  int height = 0;
  int width = 0;
  std::vector<double> values;
  std::string label;  // free-form metadata columns, already CSV-formatted
  int in_channel = -1;
  int out_channel = -1;
};

// Panels laid out in a grid with a one-pixel border; signed data shows zero
// as mid-gray. Returns the display values in [0, 1], row-major.
struct Sheet {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;
};
Sheet compose_sheet(const std::vector<Panel>& panels, int columns, Normalization norm);

// Convolutional layers only (2, 4, 6). Tiles are arranged row = output
// channel, column = input channel. Writes <output> and <output>.meta.csv.
std::vector<Panel> kernel_panels(const ModelState& m, int layer);
void render_kernels(const ModelState& m, const RenderSpec& spec);

// Summed DFT magnitude of the layer-4 or layer-6 filters per chromatic class
// (3 panels, zero frequency at the center).
std::vector<Panel> fourier_sum_panels(const ModelState& m, int layer, bool weight_by_scale);
void render_fourier_sum(const ModelState& m, const RenderSpec& spec);

// Output of layer `spec.layer` for img, at most 64 panels per sheet. Returns
// the files written (one per sheet, each with a .meta.csv sidecar).
std::vector<Panel> response_panels(const ModelState& m, const ImageTensor& img, int layer);
std::vector<std::filesystem::path> render_responses(const ModelState& m, const ImageTensor& img,
                                                    const RenderSpec& spec);

void write_pgm(const std::filesystem::path& path, const Sheet& sheet);

}  // namespace ppnet
