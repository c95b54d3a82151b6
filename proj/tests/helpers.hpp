#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ppnet/dataset.hpp"
#include "ppnet/image_io.hpp"
#include "ppnet/tensor.hpp"

namespace testutil {

inline ppnet::ImageTensor random_tensor(int h, int w, int c, double fs, std::uint64_t seed,
                                        double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(h) * w * c);
  for (auto& x : v) x = u(rng);
  return ppnet::ImageTensor(h, w, c, fs, std::move(v));
}

// Smooth, image-like content: a few random sinusoids per channel plus a bright disc.
inline ppnet::ImageTensor natural_image(int n, double fs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(n) * n * 3);
  for (int c = 0; c < 3; ++c) {
    double fx[4], fy[4], ph[4];
    for (int k = 0; k < 4; ++k) {
      fx[k] = (u(rng) - 0.5) * 0.4;
      fy[k] = (u(rng) - 0.5) * 0.4;
      ph[k] = u(rng) * 6.28;
    }
    for (int r = 0; r < n; ++r) {
      for (int q = 0; q < n; ++q) {
        double s = 0.5;
        for (int k = 0; k < 4; ++k) s += 0.08 * std::sin(fx[k] * q + fy[k] * r + ph[k]);
        const double dr = r - n / 2.0, dq = q - n / 3.0;
        if (dr * dr + dq * dq < n * n / 25.0) s += 0.2 * (c + 1) / 3.0;
        v[(static_cast<std::size_t>(r) * n + q) * 3 + c] = std::clamp(s, 0.0, 1.0);
      }
    }
  }
  return ppnet::ImageTensor(n, n, 3, fs, std::move(v));
}

// Per-test scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("ppnet_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline void write_tensor_ppm(const std::filesystem::path& p, const ppnet::ImageTensor& t) {
  ppnet::write_ppm(p, ppnet::tensor_to_raster(t));
}

// Reference image plus n distorted versions with increasing noise; MOS left at 0.
inline ppnet::Manifest noisy_manifest(const TempDir& dir, int n, int size, std::uint64_t seed,
                                      int references = 1) {
  ppnet::Manifest m;
  m.name = "synthetic";
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::filesystem::path> refs;
  std::vector<ppnet::ImageTensor> ref_t;
  for (int r = 0; r < references; ++r) {
    ref_t.push_back(natural_image(size, 192.0, seed + 101 * r));
    refs.push_back(dir / ("ref" + std::to_string(r) + ".ppm"));
    write_tensor_ppm(refs.back(), ref_t.back());
  }
  for (int k = 0; k < n; ++k) {
    const int r = k % references;
    const auto& base = ref_t[r];
    std::vector<double> v(base.data().begin(), base.data().end());
    const double sigma = 0.01 + 0.15 * u(rng);
    const int kind = k % 3;
    for (std::size_t q = 0; q < v.size(); ++q) {
      if (kind == 0) v[q] += sigma * g(rng);
      else if (kind == 1) v[q] = 0.5 + (v[q] - 0.5) * (1.0 - 2.0 * sigma);
      else if (q % 3 == 0) v[q] += sigma;
      v[q] = std::clamp(v[q], 0.0, 1.0);
    }
    const auto p = dir / ("dist" + std::to_string(k) + ".ppm");
    write_tensor_ppm(p, ppnet::ImageTensor(size, size, 3, 192.0, std::move(v)));
    ppnet::IqaRecord rec;
    rec.ref = refs[r];
    rec.dist = p;
    rec.row = k + 2;
    m.records.push_back(rec);
  }
  return m;
}

}  // namespace testutil
