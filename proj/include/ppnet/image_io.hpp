#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ppnet/tensor.hpp"

namespace ppnet {

// 8-bit interleaved raster as read from or written to disk.
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  int max_value = 255;
  std::vector<std::uint16_t> samples;
};

// Binary PPM (P6), PGM (P5), 24-bit uncompressed BMP and, when built with
// libpng, PNG. The format is detected from the file's leading bytes.
RasterImage decode_image(const std::filesystem::path& path);
RasterImage decode_image_bytes(const std::vector<std::uint8_t>& bytes, const std::string& name);
bool png_supported();

// 3-channel tensor scaled to [0, 1] by the file's maximum code. Grayscale
// images are replicated to 3 channels with a warning.
ImageTensor load_image_as_tensor(const std::filesystem::path& path, double sampling_frequency);
ImageTensor raster_to_tensor(const RasterImage& img, double sampling_frequency,
                             const std::string& name = "image");

// Quantizes [0, 1] tensors (values clamped) to 8 bits.
RasterImage tensor_to_raster(const ImageTensor& t);
void write_ppm(const std::filesystem::path& path, const RasterImage& img);  // P6 or P5 by channels
void write_bmp(const std::filesystem::path& path, const RasterImage& img);  // 24-bit
std::vector<std::uint8_t> encode_ppm(const RasterImage& img);
std::vector<std::uint8_t> encode_bmp(const RasterImage& img);

// Central crop to at most size x size pixels (no-op when size <= 0).
ImageTensor center_crop(const ImageTensor& t, int size);

}  // namespace ppnet
