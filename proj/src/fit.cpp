#include "ppnet/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "ppnet/diagnostics.hpp"
#include "ppnet/errors.hpp"
#include "ppnet/image_io.hpp"
#include "ppnet/parallel.hpp"
#include "ppnet/rng.hpp"
#include "ppnet/stats.hpp"

namespace ppnet {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Layer of each flat parameter index.
std::vector<int> flat_layers(const ModelState& m) {
  std::vector<int> out;
  out.reserve(m.size());
  for (const auto& g : m.groups) out.insert(out.end(), g.values.size(), g.layer);
  return out;
}

std::array<double, kLayers> layer_deltas(const ModelState& before, const ModelState& after) {
  std::array<double, kLayers> d{};
  const auto a = before.flatten();
  const auto b = after.flatten();
  const auto layers = flat_layers(before);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = b[k] - a[k];
    d[layers[k] - 1] += diff * diff;
  }
  for (double& v : d) v = std::sqrt(v);
  return d;
}

}  // namespace

FitSettings parse_fit_settings(const std::string& text, FitSettings s) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = "settings line " + std::to_string(line_no);
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    const auto val = trim(line.substr(eq + 1));
    try {
      std::size_t used = 0;
      if (key == "steps") s.steps = std::stoi(val, &used);
      else if (key == "learning_rate") s.learning_rate = std::stod(val, &used);
      else if (key == "fd_step") s.fd_step = std::stod(val, &used);
      else if (key == "crop") s.crop = std::stoi(val, &used);
      else if (key == "batch") s.batch = std::stoi(val, &used);
      else if (key == "seed") s.seed = std::stoull(val, &used);
      else if (key == "threads") s.threads = std::stoi(val, &used);
      else throw ParseError(where + ": unknown key '" + key + "'");
      if (used != val.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::logic_error&) {
      throw ParseError(where + ": bad value '" + val + "' for " + key);
    }
  }
  if (s.steps < 0 || !(s.learning_rate > 0.0) || !(s.fd_step > 0.0) || s.crop < 0 || s.batch < 0) {
    throw ParseError("settings: steps, crop and batch must be >= 0; learning_rate and fd_step > 0");
  }
  return s;
}

FitSettings load_fit_settings(const std::filesystem::path& path, FitSettings base) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read settings file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_fit_settings(ss.str(), base);
}

double scale_loss(const std::vector<ChannelErrors>& errors, const std::vector<double>& mos,
                  const std::vector<double>& B, std::vector<double>* grad) {
  const std::size_t n = errors.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = distance_from_errors(errors[i], B);
  const double rho = pearson(d, mos);
  if (grad) {
    const auto gd = pearson_gradient_x(d, mos);
    grad->assign(B.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (d[i] <= 0.0) continue;
      const double w = gd[i] / (errors[i].N * d[i]);
      for (std::size_t c = 0; c < B.size(); ++c) (*grad)[c] += w * B[c] * errors[i].E[c];
    }
  }
  return rho;
}

ScaleFit fit_scale_on_errors(const std::vector<ChannelErrors>& all_errors,
                             const std::vector<double>& all_mos, std::vector<double> B, int steps,
                             double learning_rate) {
  const auto t0 = Clock::now();
  if (all_errors.size() != all_mos.size()) throw ConfigError("errors and scores differ in length");
  std::vector<ChannelErrors> errors;
  std::vector<double> mos;
  std::size_t excluded = 0;
  for (std::size_t i = 0; i < all_errors.size(); ++i) {
    if (distance_from_errors(all_errors[i], B) == 0.0) {
      ++excluded;
      continue;
    }
    errors.push_back(all_errors[i]);
    mos.push_back(all_mos[i]);
  }
  if (excluded > 0) {
    warn(std::to_string(excluded) + " record(s) with zero distance excluded from the scale fit");
  }
  ScaleFit out;
  auto& rep = out.report;
  rep.records = errors.size();
  rep.excluded = excluded;
  rep.trainable = B.size();
  const auto B0 = B;
  std::vector<double> g;
  double loss = scale_loss(errors, mos, B, &g);
  rep.initial_pearson = loss;
  double lr = learning_rate;
  std::vector<double> cand(B.size());
  for (int step = 0; step < steps; ++step) {
    ++rep.steps_attempted;
    bool accepted = false;
    for (int halvings = 0; halvings <= 20; ++halvings) {
      for (std::size_t c = 0; c < B.size(); ++c) cand[c] = std::max(0.0, B[c] - lr * g[c]);
      double cand_loss = std::numeric_limits<double>::infinity();
      try {
        cand_loss = scale_loss(errors, mos, cand);
      } catch (const NumericalError&) {
      }
      if (cand_loss < loss) {
        B = cand;
        loss = scale_loss(errors, mos, B, &g);
        lr *= 1.25;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;
    ++rep.iterations;
    rep.loss_history.push_back(loss);
  }
  // Pearson is invariant to a common positive scale; report max|B| = 1.
  double bmax = 0.0;
  for (double b : B) bmax = std::max(bmax, std::abs(b));
  if (bmax > 0.0) {
    for (double& b : B) b /= bmax;
  }
  double delta = 0.0;
  for (std::size_t c = 0; c < B.size(); ++c) delta += (B[c] - B0[c]) * (B[c] - B0[c]);
  rep.layer_delta[kLayers - 1] = std::sqrt(delta);
  rep.final_pearson = loss;
  rep.seconds = seconds_since(t0);
  out.B = std::move(B);
  return out;
}

std::vector<ChannelErrors> compute_channel_errors(const ModelState& m, const Manifest& manifest,
                                                  int threads, int crop) {
  const CompiledModel cm(m, m.config.sampling_frequency);
  std::vector<ChannelErrors> out(manifest.records.size());
  std::vector<std::string> failures(manifest.records.size());
  parallel_for(manifest.records.size(), threads, [&](std::size_t i) {
    const auto& r = manifest.records[i];
    try {
      const auto ref = center_crop(load_image_as_tensor(r.ref, m.config.sampling_frequency), crop);
      const auto dist = center_crop(load_image_as_tensor(r.dist, m.config.sampling_frequency), crop);
      out[i] = channel_errors(cm, ref, dist);
    } catch (const InputError& e) {
      failures[i] = e.what();
    }
  });
  std::string failed;
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i].empty()) failed += "\n  record " + std::to_string(i + 1) + ": " + failures[i];
  }
  if (!failed.empty()) throw InputError("records could not be evaluated:" + failed);
  return out;
}

std::pair<ModelState, FitReport> fit_final_scale(const ModelState& m,
                                                 const std::vector<ChannelErrors>& errors,
                                                 const std::vector<double>& mos, int steps,
                                                 double learning_rate, std::uint64_t seed) {
  ModelState out = m;
  out.freeze_layers(1, kLayers - 1, true);
  out.freeze_layers(kLayers, kLayers, false);
  auto fit = fit_scale_on_errors(errors, mos, out.group(kLayers, "B").values, steps, learning_rate);
  out.group(kLayers, "B").values = fit.B;
  fit.report.seed = seed;
  return {std::move(out), fit.report};
}

std::pair<ModelState, FitReport> fit_final_scale(const ModelState& m, const Manifest& manifest,
                                                 int steps, double learning_rate,
                                                 std::uint64_t seed, int threads, int crop) {
  const auto t0 = Clock::now();
  const auto errors = compute_channel_errors(m, manifest, threads, crop);
  std::vector<double> mos;
  for (const auto& r : manifest.records) mos.push_back(r.mos);
  auto res = fit_final_scale(m, errors, mos, steps, learning_rate, seed);
  res.second.seconds = seconds_since(t0);
  return res;
}

PairSet load_pairs(const Manifest& manifest, double sampling_frequency, int crop, int batch,
                   std::uint64_t seed) {
  std::vector<std::size_t> idx(manifest.records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  if (batch > 0 && static_cast<std::size_t>(batch) < idx.size()) {
    auto rng = stream_rng(seed, 0x6261746368ULL);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(batch);
    std::sort(idx.begin(), idx.end());
  }
  PairSet p;
  for (auto i : idx) {
    const auto& r = manifest.records[i];
    p.ref.push_back(center_crop(load_image_as_tensor(r.ref, sampling_frequency), crop));
    p.dist.push_back(center_crop(load_image_as_tensor(r.dist, sampling_frequency), crop));
    p.mos.push_back(r.mos);
  }
  return p;
}

namespace {

// Per-pair layer inputs for layers first..8 under one parameter state.
struct PairTaps {
  LayerTaps ref, dist;
};

std::vector<double> distances_from(const CompiledModel& cm, int first,
                                   const std::vector<PairTaps>& taps, int threads) {
  std::vector<double> d(taps.size());
  parallel_for(taps.size(), threads, [&](std::size_t i) {
    d[i] = rms_difference(cm.run_from(first, taps[i].ref.taps[first - 1]),
                          cm.run_from(first, taps[i].dist.taps[first - 1]));
  });
  return d;
}

// Unscaled squared response differences per channel, summed over pixels.
std::vector<double> squared_channel_errors(const ImageTensor& a, const ImageTensor& b) {
  const int n = a.channels();
  std::vector<double> e(n, 0.0);
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - y[k];
    e[k % n] += d * d;
  }
  return e;
}

double scaled_rms(const std::vector<double>& e, const std::vector<double>& B, double count) {
  double s = 0.0;
  for (std::size_t c = 0; c < e.size(); ++c) s += B[c] * B[c] * e[c];
  return std::sqrt(s / count);
}

}  // namespace

std::pair<ModelState, FitReport> fit_freeze_ladder(const ModelState& m, const FreezeSpec& spec,
                                                   const PairSet& pairs, const FitSettings& s) {
  const auto t0 = Clock::now();
  if (spec.frozen_through < 0 || spec.frozen_through > kLayers) {
    throw ConfigError("freeze depth must be in 0..8");
  }
  if (pairs.ref.size() != pairs.dist.size() || pairs.ref.size() != pairs.mos.size()) {
    throw ConfigError("pair set is inconsistent");
  }
  ModelState state = m;
  state.freeze_layers(1, spec.frozen_through, true);
  state.freeze_layers(spec.frozen_through + 1, kLayers, false);
  const auto trainable = state.trainable_indices();
  if (trainable.size() > kMaxLadderParams) {
    throw ConfigError("refusing finite-difference fit: " + std::to_string(trainable.size()) +
                      " trainable parameters exceed the limit of " +
                      std::to_string(kMaxLadderParams));
  }
  FitReport rep;
  rep.seed = s.seed;
  rep.trainable = trainable.size();
  rep.records = pairs.mos.size();
  const int first = std::min(spec.frozen_through + 1, kLayers);
  const double fs = pairs.ref.empty() ? state.config.sampling_frequency
                                      : pairs.ref.front().sampling_frequency();

  // Inputs of layer `first` never change: the prefix is frozen.
  std::vector<PairTaps> taps(pairs.mos.size());
  {
    const CompiledModel prefix(state, fs);
    parallel_for(taps.size(), s.threads, [&](std::size_t i) {
      prefix.run_from(1, prepare_input(pairs.ref[i]), &taps[i].ref);
      prefix.run_from(1, prepare_input(pairs.dist[i]), &taps[i].dist);
    });
  }
  auto loss_of = [&](const ModelState& st) {
    const CompiledModel cm(st, fs, first);
    return pearson(distances_from(cm, first, taps, s.threads), pairs.mos);
  };

  double loss = loss_of(state);
  rep.initial_pearson = loss;
  rep.final_pearson = loss;
  if (trainable.empty() || s.steps == 0) {
    rep.seconds = seconds_since(t0);
    return {state, rep};
  }

  const auto layers = flat_layers(state);
  // Layer-7/8 parameters reach only a few output channels; their probes
  // recompute just those channels against cached per-channel errors.
  std::vector<std::vector<int>> reach(trainable.size());
  for (std::size_t t = 0; t < trainable.size(); ++t) {
    reach[t] = dependent_output_channels(state, trainable[t]);
  }
  std::vector<std::vector<double>> errors(taps.size());
  double lr = s.learning_rate;
  auto theta = state.flatten();
  std::vector<double> grad(trainable.size());
  for (int step = 0; step < s.steps; ++step) {
    ++rep.steps_attempted;
    // Refresh the per-layer inputs at the current parameters so each probe
    // only reruns the layers at and after the probed parameter.
    {
      const CompiledModel cm(state, fs, first);
      parallel_for(taps.size(), s.threads, [&](std::size_t i) {
        cm.run_from(first, taps[i].ref.taps[first - 1], &taps[i].ref);
        cm.run_from(first, taps[i].dist.taps[first - 1], &taps[i].dist);
        errors[i] = squared_channel_errors(taps[i].ref.taps[7], taps[i].dist.taps[7]);
      });
    }
    const auto& B = state.group(8, "B").values;
    parallel_for(trainable.size(), s.threads, [&](std::size_t t) {
      const std::size_t j = trainable[t];
      const int layer = layers[j];
      const double h = s.fd_step * std::max(std::abs(theta[j]), 1.0);
      auto probe = [&](double v, double& out) {
        ModelState st = state;
        auto flat = theta;
        flat[j] = v;
        st.assign(flat);
        try {
          const CompiledModel cm(st, fs, layer);
          const auto& chans = reach[t];
          std::vector<double> d(taps.size());
          for (std::size_t i = 0; i < taps.size(); ++i) {
            const double count = static_cast<double>(taps[i].ref.taps[7].size());
            if (layer == 8) {
              d[i] = scaled_rms(errors[i], cm.scale(), count);
            } else if (!chans.empty()) {
              auto e = errors[i];
              const auto part = squared_channel_errors(cm.layer7_channels(taps[i].ref.taps[6], chans),
                                                       cm.layer7_channels(taps[i].dist.taps[6], chans));
              for (std::size_t q = 0; q < chans.size(); ++q) e[chans[q]] = part[q];
              d[i] = scaled_rms(e, B, count);
            } else {
              d[i] = rms_difference(cm.run_from(layer, taps[i].ref.taps[layer - 1]),
                                    cm.run_from(layer, taps[i].dist.taps[layer - 1]));
            }
          }
          out = pearson(d, pairs.mos);
          return true;
        } catch (const ParameterError&) {
          return false;
        } catch (const NumericalError&) {
          return false;
        }
      };
      double up = 0.0, down = 0.0;
      const bool ok_up = probe(theta[j] + h, up);
      const bool ok_down = probe(theta[j] - h, down);
      if (ok_up && ok_down) grad[t] = (up - down) / (2.0 * h);
      else if (ok_up) grad[t] = (up - loss) / h;
      else if (ok_down) grad[t] = (loss - down) / h;
      else grad[t] = 0.0;
    });

    bool accepted = false;
    for (int halvings = 0; halvings <= 20; ++halvings) {
      ModelState cand = state;
      auto flat = theta;
      for (std::size_t t = 0; t < trainable.size(); ++t) flat[trainable[t]] -= lr * grad[t];
      cand.assign(flat);
      const std::size_t projected = project_params(cand);
      double cand_loss = std::numeric_limits<double>::infinity();
      try {
        cand_loss = loss_of(cand);
      } catch (const ParameterError&) {
      } catch (const NumericalError&) {
      }
      if (cand_loss < loss) {
        if (projected > 0) {
          warn("step " + std::to_string(step + 1) + ": " + std::to_string(projected) +
               " parameter(s) projected back into their feasible range");
        }
        rep.projections += projected;
        state = std::move(cand);
        theta = state.flatten();
        loss = cand_loss;
        lr *= 1.25;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;
    ++rep.iterations;
    rep.loss_history.push_back(loss);
  }
  rep.final_pearson = loss;
  rep.layer_delta = layer_deltas(m, state);
  rep.seconds = seconds_since(t0);
  return {state, rep};
}

std::pair<ModelState, FitReport> fit_freeze_ladder(const ModelState& m, const FreezeSpec& spec,
                                                   const Manifest& manifest, const FitSettings& s) {
  const auto pairs = load_pairs(manifest, m.config.sampling_frequency, s.crop, s.batch, s.seed);
  return fit_freeze_ladder(m, spec, pairs, s);
}

ModelState perturb_params(const ModelState& m, std::uint64_t seed, std::uint64_t draw,
                          double strength) {
  ModelState out = m;
  auto rng = stream_rng(seed, draw);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double ln4 = std::log(4.0);
  for (auto& g : out.groups) {
    for (double& v : g.values) {
      // Draw the same number of variates for every kind so streams stay aligned.
      const double u = unit(rng);
      const double a = angle(rng);
      const double z = noise(rng);
      const double factor = std::exp(strength * u * ln4);
      switch (g.kind) {
        case ParamKind::Positive:
        case ParamKind::NonNegative:
        case ParamKind::Frequency: v *= factor; break;
        case ParamKind::SurroundRatio: v = 1.0 + (v - 1.0) * factor; break;
        case ParamKind::LogScale: v += std::log(factor); break;
        case ParamKind::Angle:
          if (strength > 0.0) v = a;
          break;
        case ParamKind::Matrix: v += strength * z * (0.5 * std::abs(v) + 0.1); break;
      }
    }
  }
  project_params(out);
  return out;
}

SweepResult random_init_sweep(const ModelConfig& cfg, const PairSet& pairs, int n_inits,
                              std::uint64_t seed, int threads, double strength) {
  if (n_inits < 1) throw ConfigError("sweep needs at least one draw");
  const ModelState bio = build_bio_model(cfg);
  const double fs = pairs.ref.empty() ? cfg.sampling_frequency : pairs.ref.front().sampling_frequency();
  SweepResult r;
  r.pearson.assign(n_inits, std::numeric_limits<double>::quiet_NaN());
  r.draw.resize(n_inits);
  std::vector<std::string> failures(n_inits);
  parallel_for(static_cast<std::size_t>(n_inits), threads, [&](std::size_t k) {
    r.draw[k] = k;
    try {
      const auto st = perturb_params(bio, seed, k, strength);
      const CompiledModel cm(st, fs);
      std::vector<double> d(pairs.mos.size());
      for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = rms_difference(cm.forward(pairs.ref[i]).final, cm.forward(pairs.dist[i]).final);
      }
      r.pearson[k] = pearson(d, pairs.mos);
    } catch (const NumericalError& e) {
      failures[k] = e.what();
    } catch (const ParameterError& e) {
      failures[k] = e.what();
    }
  });
  for (int k = 0; k < n_inits; ++k) {
    if (!failures[k].empty()) warn("draw " + std::to_string(k) + " not evaluated: " + failures[k]);
  }
  return r;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values, int bins, double lo,
                                    double hi) {
  if (bins < 1 || !(hi > lo)) throw ConfigError("invalid histogram range");
  std::vector<HistogramBin> out(bins);
  const double w = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) out[b] = {lo + b * w, lo + (b + 1) * w, 0};
  for (double v : values) {
    if (!std::isfinite(v) || v < lo || v > hi) continue;
    const int b = std::min(bins - 1, static_cast<int>((v - lo) / w));
    ++out[b].count;
  }
  return out;
}

void write_sweep_csv(const SweepResult& r, const std::filesystem::path& samples_path,
                     const std::filesystem::path& histogram_path) {
  {
    std::ofstream out(samples_path, std::ios::binary);
    if (!out) throw InputError("cannot write " + samples_path.string());
    out.precision(17);
    out << "draw,pearson\n";
    for (std::size_t k = 0; k < r.pearson.size(); ++k) {
      out << r.draw[k] << ',';
      if (std::isfinite(r.pearson[k])) out << r.pearson[k];
      out << '\n';
    }
  }
  std::ofstream out(histogram_path, std::ios::binary);
  if (!out) throw InputError("cannot write " + histogram_path.string());
  out << "bin_lo,bin_hi,count\n";
  for (const auto& b : histogram(r.pearson)) out << b.lo << ',' << b.hi << ',' << b.count << '\n';
}

void write_fit_report(const FitReport& r, const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw InputError("cannot write " + csv_path.string());
  out.precision(17);
  out << "step,pearson\n";
  out << 0 << ',' << r.initial_pearson << '\n';
  for (std::size_t k = 0; k < r.loss_history.size(); ++k) out << k + 1 << ',' << r.loss_history[k] << '\n';
}

void print_fit_summary(std::ostream& os, const FitReport& r) {
  os << "initial_pearson: " << r.initial_pearson << "\n";
  os << "final_pearson: " << r.final_pearson << "\n";
  os << "accepted_steps: " << r.iterations << " of " << r.steps_attempted << "\n";
  os << "trainable: " << r.trainable << "\n";
  os << "records: " << r.records;
  if (r.excluded) os << " (" << r.excluded << " excluded)";
  os << "\n";
  if (r.projections) os << "projections: " << r.projections << "\n";
  os << "layer_delta:";
  for (double d : r.layer_delta) os << ' ' << d;
  os << "\nseed: " << r.seed << "\n";
  os << "seconds: " << r.seconds << "\n";
}

}  // namespace ppnet
