#include "ppnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>

#include "ppnet/errors.hpp"
#include "ppnet/image_io.hpp"
#include "ppnet/metric.hpp"
#include "ppnet/parallel.hpp"
#include "ppnet/rng.hpp"
#include "ppnet/stats.hpp"

namespace ppnet {

CorrelationReport evaluate_dataset(const RecordMetric& metric, const Manifest& manifest,
                                   int threads) {
  const std::size_t n = manifest.records.size();
  std::vector<double> d(n, 0.0);
  std::vector<std::string> failures(n);
  parallel_for(n, threads, [&](std::size_t i) {
    try {
      d[i] = metric(manifest.records[i], i);
    } catch (const InputError& e) {
      failures[i] = e.what();
    }
  });
  std::ostringstream failed;
  std::size_t n_failed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (failures[i].empty()) continue;
    const auto& r = manifest.records[i];
    failed << "\n  record " << i + 1;
    if (r.row > 0) failed << " (manifest row " << r.row << ")";
    failed << " " << r.ref.string() << " / " << r.dist.string() << ": " << failures[i];
    ++n_failed;
  }
  if (n_failed > 0) {
    throw InputError(std::to_string(n_failed) + " record(s) could not be evaluated:" + failed.str());
  }
  CorrelationReport rep;
  rep.n = n;
  rep.distances = std::move(d);
  rep.mos.reserve(n);
  for (const auto& r : manifest.records) rep.mos.push_back(r.mos);
  rep.pearson = pearson(rep.distances, rep.mos);
  return rep;
}

CorrelationReport evaluate_dataset(const PairMetric& metric, const Manifest& manifest,
                                   double sampling_frequency, int threads, int crop) {
  return evaluate_dataset(
      RecordMetric([&](const IqaRecord& r, std::size_t) {
        const auto ref = center_crop(load_image_as_tensor(r.ref, sampling_frequency), crop);
        const auto dist = center_crop(load_image_as_tensor(r.dist, sampling_frequency), crop);
        return metric(ref, dist);
      }),
      manifest, threads);
}

PairMetric ppnet_metric(const ModelState& m) {
  struct Cache {
    ModelState state;
    std::mutex mu;
    std::shared_ptr<const CompiledModel> compiled;
  };
  auto cache = std::make_shared<Cache>();
  cache->state = m;
  return [cache](const ImageTensor& ref, const ImageTensor& dist) {
    std::shared_ptr<const CompiledModel> cm;
    {
      std::lock_guard<std::mutex> lock(cache->mu);
      if (!cache->compiled ||
          cache->compiled->input_sampling_frequency() != ref.sampling_frequency()) {
        cache->compiled = std::make_shared<CompiledModel>(cache->state, ref.sampling_frequency());
      }
      cm = cache->compiled;
    }
    return perceptual_distance(*cm, ref, dist);
  };
}

namespace {

std::vector<double> luminance(const ImageTensor& t) {
  if (t.channels() != 3 && t.channels() != 1) throw InputError("SSIM needs 1 or 3 channels");
  const std::size_t pixels = static_cast<std::size_t>(t.height()) * t.width();
  std::vector<double> y(pixels);
  const auto d = t.data();
  for (std::size_t p = 0; p < pixels; ++p) {
    y[p] = t.channels() == 1 ? d[p] : 0.299 * d[3 * p] + 0.587 * d[3 * p + 1] + 0.114 * d[3 * p + 2];
  }
  return y;
}

// Valid-region separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& in, int h, int w,
                                 const std::vector<double>& g) {
  const int n = static_cast<int>(g.size());
  const int ow = w - n + 1;
  const int oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += g[k] * in[static_cast<std::size_t>(r) * w + c + k];
      tmp[static_cast<std::size_t>(r) * ow + c] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += g[k] * tmp[static_cast<std::size_t>(r + k) * ow + c];
      out[static_cast<std::size_t>(r) * ow + c] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const ImageTensor& ref, const ImageTensor& dist) {
  if (ref.height() != dist.height() || ref.width() != dist.width() ||
      ref.channels() != dist.channels()) {
    throw InputError("SSIM: image dimensions differ");
  }
  constexpr int kTaps = 11;
  constexpr double kSigma = 1.5;
  if (ref.height() < kTaps || ref.width() < kTaps) {
    throw InputError("SSIM: images must be at least 11x11");
  }
  std::vector<double> g(kTaps);
  double gs = 0.0;
  for (int k = 0; k < kTaps; ++k) {
    const double x = k - kTaps / 2;
    g[k] = std::exp(-x * x / (2.0 * kSigma * kSigma));
    gs += g[k];
  }
  for (double& v : g) v /= gs;
  const int h = ref.height();
  const int w = ref.width();
  const auto x = luminance(ref);
  const auto y = luminance(dist);
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t p = 0; p < x.size(); ++p) {
    xx[p] = x[p] * x[p];
    yy[p] = y[p] * y[p];
    xy[p] = x[p] * y[p];
  }
  const auto mx = filter_valid(x, h, w, g);
  const auto my = filter_valid(y, h, w, g);
  const auto exx = filter_valid(xx, h, w, g);
  const auto eyy = filter_valid(yy, h, w, g);
  const auto exy = filter_valid(xy, h, w, g);
  constexpr double C1 = 0.01 * 0.01;
  constexpr double C2 = 0.03 * 0.03;
  double total = 0.0;
  for (std::size_t p = 0; p < mx.size(); ++p) {
    const double sx = exx[p] - mx[p] * mx[p];
    const double sy = eyy[p] - my[p] * my[p];
    const double sxy = exy[p] - mx[p] * my[p];
    total += ((2.0 * mx[p] * my[p] + C1) * (2.0 * sxy + C2)) /
             ((mx[p] * mx[p] + my[p] * my[p] + C1) * (sx + sy + C2));
  }
  return total / static_cast<double>(mx.size());
}

PairMetric ssim_metric() {
  return [](const ImageTensor& a, const ImageTensor& b) { return 1.0 - ssim(a, b); };
}

ConsistencyReport monte_carlo_rho_max(const Manifest& manifest, int trials, std::uint64_t seed,
                                      int threads) {
  if (trials < 1) throw ConfigError("Monte Carlo needs at least one trial");
  for (const auto& r : manifest.records) {
    if (!(r.mos_std >= 0.0) || !std::isfinite(r.mos_std)) {
      throw InputError("record with negative or invalid mos_std (row " + std::to_string(r.row) + ")");
    }
  }
  const std::size_t n = manifest.records.size();
  ConsistencyReport rep;
  rep.trials = trials;
  rep.seed = seed;
  rep.samples.assign(trials, 0.0);
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t t) {
    auto rng = stream_rng(seed, t);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = manifest.records[i];
      a[i] = r.mos + r.mos_std * z(rng);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = manifest.records[i];
      b[i] = r.mos + r.mos_std * z(rng);
    }
    rep.samples[t] = pearson(a, b);
  });
  rep.mean = mean(rep.samples);
  rep.max = *std::max_element(rep.samples.begin(), rep.samples.end());
  rep.p95 = quantile(rep.samples, 0.95);
  rep.rho_max = rep.p95;
  return rep;
}

void write_correlation_csv(const CorrelationReport& r, const Manifest& m,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write report " + path.string());
  out.precision(17);
  out << "record,distance,mos\n";
  for (std::size_t i = 0; i < r.distances.size(); ++i) {
    std::string label = i < m.records.size() ? m.records[i].dist.filename().string() : "";
    if (label.find_first_of(",\"") != std::string::npos) label = "record" + std::to_string(i + 1);
    out << label << ',' << r.distances[i] << ',' << r.mos[i] << '\n';
  }
  if (!out) throw InputError("failed writing report " + path.string());
}

void write_consistency_csv(const ConsistencyReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write report " + path.string());
  out.precision(17);
  out << "trial,pearson\n";
  for (std::size_t t = 0; t < r.samples.size(); ++t) out << t << ',' << r.samples[t] << '\n';
  if (!out) throw InputError("failed writing report " + path.string());
}

void print_summary(std::ostream& os, const CorrelationReport& r, const std::string& settings) {
  os << "pearson: " << r.pearson << "\n";
  os << "n: " << r.n << "\n";
  if (!settings.empty()) os << "settings: " << settings << "\n";
}

void print_summary(std::ostream& os, const ConsistencyReport& r, std::size_t records) {
  os << "records: " << records << "\n";
  os << "trials: " << r.trials << "\n";
  os << "seed: " << r.seed << "\n";
  os << "mean: " << r.mean << "\n";
  os << "max: " << r.max << "\n";
  os << "p95: " << r.p95 << "\n";
  os << "rho_max (p95): " << r.rho_max << "\n";
}

}  // namespace ppnet
