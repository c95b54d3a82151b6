#include "ppnet/image_io.hpp"

#include <cctype>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "ppnet/diagnostics.hpp"
#include "ppnet/errors.hpp"

#ifdef PPNET_HAVE_PNG
#include <png.h>
#endif

namespace ppnet {
namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("failed writing " + path.string());
}

// Netpbm header token reader (skips whitespace and comments).
class PnmHeader {
 public:
  PnmHeader(const std::vector<std::uint8_t>& b, const std::string& name) : b_(b), name_(name) {}

  long next_int() {
    skip();
    if (pos_ >= b_.size() || !std::isdigit(b_[pos_])) {
      throw DecodeError(name_ + ": malformed netpbm header");
    }
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > 1'000'000'000) throw DecodeError(name_ + ": netpbm header value too large");
    }
    return v;
  }
  // Exactly one whitespace byte separates the header from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) {
      throw DecodeError(name_ + ": malformed netpbm header");
    }
    return pos_ + 1;
  }

 private:
  void skip() {
    while (pos_ < b_.size()) {
      if (std::isspace(b_[pos_])) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& b_;
  const std::string& name_;
  std::size_t pos_ = 2;
};

RasterImage decode_pnm(const std::vector<std::uint8_t>& b, const std::string& name) {
  const int channels = b[1] == '6' ? 3 : 1;
  PnmHeader h(b, name);
  RasterImage img;
  img.width = static_cast<int>(h.next_int());
  img.height = static_cast<int>(h.next_int());
  img.max_value = static_cast<int>(h.next_int());
  img.channels = channels;
  if (img.width < 1 || img.height < 1) throw DecodeError(name + ": empty image");
  if (img.max_value < 1 || img.max_value > 65535) throw DecodeError(name + ": invalid maxval");
  const std::size_t start = h.raster_start();
  const std::size_t bps = img.max_value > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * channels;
  if (b.size() < start + n * bps) throw DecodeError(name + ": truncated raster");
  img.samples.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint16_t v =
        bps == 1 ? b[start + k] : static_cast<std::uint16_t>((b[start + 2 * k] << 8) | b[start + 2 * k + 1]);
    if (v > img.max_value) throw DecodeError(name + ": sample exceeds maxval");
    img.samples[k] = v;
  }
  return img;
}

std::uint32_t le32(const std::vector<std::uint8_t>& b, std::size_t p) {
  return static_cast<std::uint32_t>(b[p]) | (static_cast<std::uint32_t>(b[p + 1]) << 8) |
         (static_cast<std::uint32_t>(b[p + 2]) << 16) | (static_cast<std::uint32_t>(b[p + 3]) << 24);
}
std::uint16_t le16(const std::vector<std::uint8_t>& b, std::size_t p) {
  return static_cast<std::uint16_t>(b[p] | (b[p + 1] << 8));
}

RasterImage decode_bmp(const std::vector<std::uint8_t>& b, const std::string& name) {
  if (b.size() < 54) throw DecodeError(name + ": truncated BMP header");
  const std::uint32_t offset = le32(b, 10);
  const std::uint32_t dib = le32(b, 14);
  if (dib < 40) throw DecodeError(name + ": unsupported BMP header variant");
  const auto w = static_cast<std::int32_t>(le32(b, 18));
  const auto h = static_cast<std::int32_t>(le32(b, 22));
  const std::uint16_t bpp = le16(b, 28);
  const std::uint32_t compression = le32(b, 30);
  if (bpp != 24 && bpp != 32) {
    throw DecodeError(name + ": only 24/32-bit BMP is supported, got " + std::to_string(bpp) + "-bit");
  }
  if (compression != 0 && !(compression == 3 && bpp == 32)) {
    throw DecodeError(name + ": compressed BMP is not supported");
  }
  if (w <= 0 || h == 0) throw DecodeError(name + ": invalid BMP dimensions");
  const bool bottom_up = h > 0;
  const int height = bottom_up ? h : -h;
  const std::size_t bytes_pp = bpp / 8;
  const std::size_t stride = (static_cast<std::size_t>(w) * bytes_pp + 3) / 4 * 4;
  if (b.size() < offset + stride * (height - 1) + static_cast<std::size_t>(w) * bytes_pp) {
    throw DecodeError(name + ": truncated BMP raster");
  }
  RasterImage img;
  img.width = w;
  img.height = height;
  img.channels = 3;
  img.samples.resize(static_cast<std::size_t>(w) * height * 3);
  for (int r = 0; r < height; ++r) {
    const int src_row = bottom_up ? height - 1 - r : r;
    const std::size_t base = offset + stride * src_row;
    for (int c = 0; c < w; ++c) {
      const std::size_t p = base + c * bytes_pp;
      const std::size_t d = (static_cast<std::size_t>(r) * w + c) * 3;
      img.samples[d] = b[p + 2];
      img.samples[d + 1] = b[p + 1];
      img.samples[d + 2] = b[p];
    }
  }
  return img;
}

bool is_png(const std::vector<std::uint8_t>& b) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  return b.size() >= 8 && std::memcmp(b.data(), sig, 8) == 0;
}

RasterImage decode_png(const std::vector<std::uint8_t>& b, const std::string& name) {
#ifdef PPNET_HAVE_PNG
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, b.data(), b.size())) {
    throw DecodeError(name + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw DecodeError(name + ": " + image.message);
  }
  RasterImage img;
  img.width = static_cast<int>(image.width);
  img.height = static_cast<int>(image.height);
  img.channels = color ? 3 : 1;
  img.samples.assign(buf.begin(), buf.end());
  return img;
#else
  throw DecodeError(name + ": PNG support was not compiled in");
#endif
}

}  // namespace

bool png_supported() {
#ifdef PPNET_HAVE_PNG
  return true;
#else
  return false;
#endif
}

RasterImage decode_image_bytes(const std::vector<std::uint8_t>& b, const std::string& name) {
  if (b.size() >= 2 && b[0] == 'P' && (b[1] == '6' || b[1] == '5')) return decode_pnm(b, name);
  if (b.size() >= 2 && b[0] == 'B' && b[1] == 'M') return decode_bmp(b, name);
  if (is_png(b)) return decode_png(b, name);
  throw DecodeError(name + ": unsupported image format");
}

RasterImage decode_image(const std::filesystem::path& path) {
  return decode_image_bytes(read_file(path), path.string());
}

ImageTensor raster_to_tensor(const RasterImage& img, double sampling_frequency,
                             const std::string& name) {
  const std::size_t pixels = static_cast<std::size_t>(img.width) * img.height;
  std::vector<double> data(pixels * 3);
  const double scale = 1.0 / img.max_value;
  if (img.channels == 3) {
    for (std::size_t k = 0; k < pixels * 3; ++k) data[k] = img.samples[k] * scale;
  } else if (img.channels == 1) {
    warn(name + ": grayscale image replicated to 3 channels");
    for (std::size_t p = 0; p < pixels; ++p) {
      const double v = img.samples[p] * scale;
      data[3 * p] = data[3 * p + 1] = data[3 * p + 2] = v;
    }
  } else {
    throw DecodeError(name + ": unsupported channel count");
  }
  return ImageTensor(img.height, img.width, 3, sampling_frequency, std::move(data));
}

ImageTensor load_image_as_tensor(const std::filesystem::path& path, double sampling_frequency) {
  return raster_to_tensor(decode_image(path), sampling_frequency, path.string());
}

RasterImage tensor_to_raster(const ImageTensor& t) {
  if (t.channels() != 1 && t.channels() != 3) {
    throw ConfigError("only 1- or 3-channel tensors can be written as images");
  }
  RasterImage img;
  img.width = t.width();
  img.height = t.height();
  img.channels = t.channels();
  img.samples.resize(t.size());
  const auto d = t.data();
  for (std::size_t k = 0; k < d.size(); ++k) {
    img.samples[k] = static_cast<std::uint16_t>(std::lround(std::clamp(d[k], 0.0, 1.0) * 255.0));
  }
  return img;
}

std::vector<std::uint8_t> encode_ppm(const RasterImage& img) {
  const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(img.width) + " " + std::to_string(img.height) + "\n" +
                             std::to_string(img.max_value) + "\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (auto s : img.samples) {
    if (img.max_value > 255) out.push_back(static_cast<std::uint8_t>(s >> 8));
    out.push_back(static_cast<std::uint8_t>(s & 0xff));
  }
  return out;
}

std::vector<std::uint8_t> encode_bmp(const RasterImage& img) {
  if (img.channels != 3 || img.max_value != 255) throw ConfigError("BMP output needs 8-bit RGB");
  const std::size_t stride = (static_cast<std::size_t>(img.width) * 3 + 3) / 4 * 4;
  const std::size_t raster = stride * img.height;
  std::vector<std::uint8_t> out(54 + raster, 0);
  auto put32 = [&](std::size_t p, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out[p + k] = static_cast<std::uint8_t>(v >> (8 * k));
  };
  out[0] = 'B';
  out[1] = 'M';
  put32(2, static_cast<std::uint32_t>(out.size()));
  put32(10, 54);
  put32(14, 40);
  put32(18, static_cast<std::uint32_t>(img.width));
  put32(22, static_cast<std::uint32_t>(img.height));
  out[26] = 1;
  out[28] = 24;
  put32(34, static_cast<std::uint32_t>(raster));
  for (int r = 0; r < img.height; ++r) {
    const std::size_t base = 54 + stride * (img.height - 1 - r);
    for (int c = 0; c < img.width; ++c) {
      const std::size_t s = (static_cast<std::size_t>(r) * img.width + c) * 3;
      out[base + c * 3] = static_cast<std::uint8_t>(img.samples[s + 2]);
      out[base + c * 3 + 1] = static_cast<std::uint8_t>(img.samples[s + 1]);
      out[base + c * 3 + 2] = static_cast<std::uint8_t>(img.samples[s]);
    }
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const RasterImage& img) {
  write_file(path, encode_ppm(img));
}

void write_bmp(const std::filesystem::path& path, const RasterImage& img) {
  write_file(path, encode_bmp(img));
}

ImageTensor center_crop(const ImageTensor& t, int size) {
  if (size <= 0 || (t.height() <= size && t.width() <= size)) return t;
  const int h = std::min(size, t.height());
  const int w = std::min(size, t.width());
  const int r0 = (t.height() - h) / 2;
  const int c0 = (t.width() - w) / 2;
  const int c = t.channels();
  std::vector<double> out(static_cast<std::size_t>(h) * w * c);
  for (int r = 0; r < h; ++r) {
    for (int q = 0; q < w; ++q) {
      for (int ch = 0; ch < c; ++ch) {
        out[(static_cast<std::size_t>(r) * w + q) * c + ch] = t.at(r0 + r, c0 + q, ch);
      }
    }
  }
  return ImageTensor(h, w, c, t.sampling_frequency(), std::move(out));
}

}  // namespace ppnet
