#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <optional>
#include <sstream>

#include "ppnet/dataset.hpp"
#include "ppnet/diagnostics.hpp"
#include "ppnet/errors.hpp"
#include "ppnet/eval.hpp"
#include "ppnet/fit.hpp"
#include "ppnet/image_io.hpp"
#include "ppnet/metric.hpp"
#include "ppnet/model.hpp"
#include "ppnet/parallel.hpp"
#include "ppnet/viz.hpp"

namespace ppnet::cli {

struct Options {
  // global
  std::string params;
  std::uint64_t seed = 0;
  int threads = 1;

  // init
  std::string out;
  ModelConfig config;

  // distance / respond
  std::string ref, dist, image;
  int layer = 4;
  bool global_norm = false;
  bool fourier = false;
  bool weighted = false;

  // batch commands
  std::string manifest;
  std::string metric = "ppnet";
  std::string report;
  std::string histogram;
  int trials = 1000;
  int crop = 0;
  int batch = 0;
  int steps = 200;
  double learning_rate = 1.0;
  double fd_step = 1e-3;
  std::string settings;
  std::string freeze = "1..7";
  int n = 100;
  double strength = 1.0;

  // converters
  std::string tid_root, kadid_root;
};

namespace {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ModelState load_state(const Options& o) {
  return o.params.empty() ? build_bio_model() : load_params(o.params);
}

int parse_freeze(const std::string& s) {
  // "k", "1..k" or "1-k"; "0" / "none" trains every layer.
  if (s == "none") return 0;
  std::string last = s;
  for (const char* sep : {"..", "-"}) {
    const auto p = s.find(sep);
    if (p != std::string::npos) {
      if (s.substr(0, p) != "1") throw ConfigError("--freeze ranges must start at layer 1");
      last = s.substr(p + std::strlen(sep));
      break;
    }
  }
  try {
    std::size_t used = 0;
    const int k = std::stoi(last, &used);
    if (used != last.size() || k < 0 || k > kLayers) throw std::invalid_argument(s);
    return k;
  } catch (const std::logic_error&) {
    throw ConfigError("--freeze expects 1..k with k in 0..8, got '" + s + "'");
  }
}

FitSettings fit_settings(const Options& o, const CLI::App& app, const CLI::App& sub) {
  FitSettings s;
  s.steps = o.steps;
  s.learning_rate = o.learning_rate;
  s.fd_step = o.fd_step;
  s.crop = o.crop;
  s.batch = o.batch;
  s.seed = o.seed;
  s.threads = o.threads;
  if (!o.settings.empty()) {
    s = load_fit_settings(o.settings, s);
    // Explicit flags win over the settings file.
    if (sub.count("--steps")) s.steps = o.steps;
    if (sub.count("--lr")) s.learning_rate = o.learning_rate;
    if (sub.count("--fd-step")) s.fd_step = o.fd_step;
    if (sub.count("--crop")) s.crop = o.crop;
    if (sub.count("--batch")) s.batch = o.batch;
    if (app.count("--seed")) s.seed = o.seed;
    if (app.count("--threads")) s.threads = o.threads;
  }
  return s;
}

void add_fit_flags(CLI::App* sub, Options& o, bool ladder) {
  sub->add_option("--steps", o.steps, "Gradient steps")->check(CLI::NonNegativeNumber);
  sub->add_option("--lr", o.learning_rate, "Initial learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--crop", o.crop, "Center crop in pixels (0 = full image)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--settings", o.settings, "Settings file (key = value)")->check(CLI::ExistingFile);
  if (ladder) {
    sub->add_option("--fd-step", o.fd_step, "Relative finite-difference step")
        ->check(CLI::PositiveNumber);
    sub->add_option("--batch", o.batch, "Fixed evaluation subset size (0 = all records)")
        ->check(CLI::NonNegativeNumber);
  }
}

}  // namespace

Parser::Parser() : app(std::make_unique<CLI::App>()), opts(std::make_unique<Options>()) {
  auto& o = *opts;
  auto& a = *app;
  o.threads = default_threads();
  a.description("Parametric PerceptNet image-quality engine");
  a.name("ppnet");
  a.require_subcommand(1);
  a.add_option("--params", o.params, "Parameter file (default: built-in initialization)")
      ->check(CLI::ExistingFile);
  a.add_option("--seed", o.seed, "Random seed");
  a.add_option("--threads", o.threads, "Worker threads (default: PPNET_THREADS or all cores)")
      ->check(CLI::PositiveNumber);

  auto* init = a.add_subcommand("init", "Write the initial parameter file");
  init->add_option("--out", o.out, "Output parameter file")->required();
  init->add_option("--sampling-frequency", o.config.sampling_frequency,
                   "Input samples per degree")->check(CLI::PositiveNumber);
  init->add_option("--dog-support", o.config.dog_support, "Layer-4 kernel size (odd)");
  init->add_option("--dn5-support", o.config.dn5_support, "Layer-5 kernel size (odd)");
  init->add_option("--gabor-support", o.config.gabor_support, "Layer-6 kernel size (odd)");
  init->add_option("--dn7-support", o.config.dn7_support, "Layer-7 kernel size (odd)");

  auto* distance = a.add_subcommand("distance", "Print the perceptual distance of two images");
  distance->add_option("ref", o.ref, "Reference image")->required();
  distance->add_option("dist", o.dist, "Distorted image")->required();

  auto* respond = a.add_subcommand("respond", "Render the responses of one layer");
  respond->add_option("image", o.image, "Input image")->required();
  respond->add_option("--layer", o.layer, "Layer 1..8")->required()->check(CLI::Range(1, 8));
  respond->add_option("--out", o.out, "Output .pgm (64 panels per sheet)")->required();
  respond->add_flag("--global", o.global_norm, "One intensity scale for all panels");

  auto* kernels = a.add_subcommand("kernels", "Render the kernels of a convolutional layer");
  kernels->add_option("--layer", o.layer, "Layer 2, 4 or 6")->required()->check(CLI::Range(1, 8));
  kernels->add_option("--out", o.out, "Output .pgm")->required();
  kernels->add_flag("--global", o.global_norm, "One intensity scale for all tiles");
  kernels->add_flag("--fourier", o.fourier, "Summed DFT magnitude per chromatic class");
  kernels->add_flag("--weighted", o.weighted, "Weight the Fourier sum by |B|");

  auto* eval = a.add_subcommand("eval", "Correlate a metric with MOS over a manifest");
  eval->add_option("--manifest", o.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--metric", o.metric, "ppnet or ssim")->check(CLI::IsMember({"ppnet", "ssim"}));
  eval->add_option("--out", o.report, "Per-record CSV report");
  eval->add_option("--crop", o.crop, "Center crop in pixels (0 = full image)")
      ->check(CLI::NonNegativeNumber);

  auto* cons = a.add_subcommand("consistency", "Monte Carlo self-consistency bound of a database");
  cons->add_option("--manifest", o.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  cons->add_option("--trials", o.trials, "Number of simulated observer pairs")
      ->check(CLI::PositiveNumber);
  cons->add_option("--out", o.report, "Per-trial CSV report");

  auto* fit_scale = a.add_subcommand("fit-scale", "Fit the layer-8 scale to a manifest");
  fit_scale->add_option("--manifest", o.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  fit_scale->add_option("--out", o.out, "Output parameter file")->required();
  fit_scale->add_option("--report", o.report, "Loss history CSV");
  add_fit_flags(fit_scale, o, false);

  auto* ladder = a.add_subcommand("fit-ladder", "Finite-difference fit with frozen prefix layers");
  ladder->add_option("--manifest", o.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  ladder->add_option("--freeze", o.freeze, "Frozen layers as 1..k (k = 0..8)")->required();
  ladder->add_option("--out", o.out, "Output parameter file")->required();
  ladder->add_option("--report", o.report, "Loss history CSV");
  add_fit_flags(ladder, o, true);

  auto* sweep = a.add_subcommand("sweep", "Correlations of randomly perturbed initializations");
  sweep->add_option("--manifest", o.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
  sweep->add_option("--n", o.n, "Number of draws")->check(CLI::PositiveNumber);
  sweep->add_option("--strength", o.strength, "Perturbation strength (0 = none, 1 = default)")
      ->check(CLI::NonNegativeNumber);
  sweep->add_option("--crop", o.crop, "Center crop in pixels (0 = full image)")
      ->check(CLI::NonNegativeNumber);
  sweep->add_option("--batch", o.batch, "Fixed evaluation subset size (0 = all records)")
      ->check(CLI::NonNegativeNumber);
  sweep->add_option("--out", o.report, "Samples CSV")->required();
  sweep->add_option("--histogram", o.histogram, "Histogram CSV")->required();

  auto* tid = a.add_subcommand("convert-tid", "Manifest from a TID2008/TID2013 directory");
  tid->add_option("--tid-root", o.tid_root, "Database root")->required()->check(CLI::ExistingDirectory);
  tid->add_option("--out", o.out, "Output manifest CSV")->required();

  auto* kadid = a.add_subcommand("convert-kadid", "Manifest from a KADID-10k directory");
  kadid->add_option("--kadid-root", o.kadid_root, "Database root")->required()->check(CLI::ExistingDirectory);
  kadid->add_option("--out", o.out, "Output manifest CSV")->required();
}

Parser::~Parser() = default;

namespace {

int dispatch(CLI::App& app, Options& o, std::ostream& out, std::ostream& err) {
  auto* sub = app.get_subcommands().front();
  const std::string cmd = sub->get_name();

  if (cmd == "init") {
    save_params(build_bio_model(o.config), o.out);
    return kOk;
  }
  if (cmd == "convert-tid" || cmd == "convert-kadid") {
    const auto m = cmd == "convert-tid" ? convert_tid(o.tid_root) : convert_kadid(o.kadid_root);
    write_manifest(m, o.out);
    err << "wrote " << m.records.size() << " records to " << o.out << "\n";
    return kOk;
  }

  if (cmd == "consistency") {
    const auto m = load_manifest(o.manifest);
    const auto r = monte_carlo_rho_max(m, o.trials, o.seed, o.threads);
    if (!o.report.empty()) write_consistency_csv(r, o.report);
    print_summary(out, r, m.records.size());
    return kOk;
  }

  const auto state = load_state(o);
  const double fs = state.config.sampling_frequency;

  if (cmd == "distance") {
    const auto ref = load_image_as_tensor(o.ref, fs);
    const auto dist = load_image_as_tensor(o.dist, fs);
    out << format_real(perceptual_distance(state, ref, dist)) << "\n";
    return kOk;
  }
  if (cmd == "respond") {
    RenderSpec spec;
    spec.target = RenderTarget::LayerTaps;
    spec.layer = o.layer;
    spec.output = o.out;
    spec.normalization = o.global_norm ? Normalization::Global : Normalization::PerPanel;
    for (const auto& p : render_responses(state, load_image_as_tensor(o.image, fs), spec)) {
      err << "wrote " << p.string() << "\n";
    }
    return kOk;
  }
  if (cmd == "kernels") {
    RenderSpec spec;
    spec.target = o.fourier ? RenderTarget::FourierSum : RenderTarget::Kernels;
    spec.layer = o.layer;
    spec.output = o.out;
    spec.weight_by_scale = o.weighted;
    spec.normalization = o.global_norm ? Normalization::Global : Normalization::PerPanel;
    if (o.fourier) render_fourier_sum(state, spec);
    else render_kernels(state, spec);
    return kOk;
  }
  if (cmd == "eval") {
    const auto m = load_manifest(o.manifest);
    const auto metric = o.metric == "ssim" ? ssim_metric() : ppnet_metric(state);
    const auto r = evaluate_dataset(metric, m, fs, o.threads, o.crop);
    if (!o.report.empty()) write_correlation_csv(r, m, o.report);
    print_summary(out, r, "metric=" + o.metric + " crop=" + std::to_string(o.crop));
    return kOk;
  }
  if (cmd == "fit-scale") {
    const auto m = load_manifest(o.manifest);
    const auto s = fit_settings(o, app, *sub);
    auto [fitted, rep] = fit_final_scale(state, m, s.steps, s.learning_rate, s.seed, s.threads, s.crop);
    save_params(fitted, o.out);
    if (!o.report.empty()) write_fit_report(rep, o.report);
    print_fit_summary(out, rep);
    return kOk;
  }
  if (cmd == "fit-ladder") {
    const auto m = load_manifest(o.manifest);
    const auto s = fit_settings(o, app, *sub);
    FreezeSpec spec{parse_freeze(o.freeze)};
    auto [fitted, rep] = fit_freeze_ladder(state, spec, m, s);
    save_params(fitted, o.out);
    if (!o.report.empty()) write_fit_report(rep, o.report);
    print_fit_summary(out, rep);
    return kOk;
  }
  if (cmd == "sweep") {
    const auto m = load_manifest(o.manifest);
    const auto pairs = load_pairs(m, fs, o.crop, o.batch, o.seed);
    const auto r = random_init_sweep(state.config, pairs, o.n, o.seed, o.threads, o.strength);
    write_sweep_csv(r, o.report, o.histogram);
    std::size_t ok = 0;
    for (double v : r.pearson) ok += std::isfinite(v) ? 1 : 0;
    out << "draws: " << r.pearson.size() << "\nevaluated: " << ok << "\n";
    return kOk;
  }
  err << "unknown subcommand " << cmd << "\n";
  return kUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Parser p;
  auto& app = *p.app;
  WarningSink prev = set_warning_sink([&err](const std::string& m) { err << "warning: " << m << "\n"; });
  struct Restore {
    WarningSink prev;
    ~Restore() { set_warning_sink(prev); }
  } restore{prev};
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }
  try {
    return dispatch(app, *p.opts, out, err);
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
}

}  // namespace ppnet::cli
