#include "hdrunet/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <set>

#include "hdrunet/checkpoint.hpp"
#include "hdrunet/errors.hpp"
#include "hdrunet/ops.hpp"
#include "hdrunet/png_io.hpp"

namespace hdrunet::cli {

namespace fs = std::filesystem;

namespace {

template <typename F>
decltype(auto) with_precision(Precision p, F&& f) {
  if (p == Precision::F64) {
    return f(double{});
  }
  return f(float{});
}

void make_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create directory '" + dir.string() + "'");
  }
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> png_names(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError("not a directory: '" + dir.string() + "'");
  }
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<double> normalized_samples(const PngImage& png) {
  std::vector<double> v(png.samples.size());
  const double peak = png.max_value();
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = png.samples[i] / peak;
  }
  return v;
}

}  // namespace

std::string frame_stem(std::size_t take, std::size_t frame) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "take%03zu_f%02zu", take, frame);
  return buf;
}

std::uint64_t frame_noise_seed(std::uint64_t seed, std::size_t take, std::size_t frame) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(take), static_cast<std::uint32_t>(frame), 0x6e6f6973u};
  std::mt19937_64 rng(seq);
  return rng();
}

int synth_data(const SynthDataOptions& opts, std::ostream& out) {
  if (opts.height == 0 || opts.width == 0) {
    throw ShapeError("synth-data: size must be positive");
  }
  if (opts.scenes == 0 || opts.frames_per_take == 0) {
    throw ConfigError("synth-data: --scenes and --frames-per-take must be positive");
  }
  DegradationParams params = opts.params ? load_run_config(*opts.params).degradation : DegradationParams{};
  make_directory(opts.out);

  // Frames of one take are shifted windows over a shared, slightly larger scene.
  const std::size_t margin = opts.frames_per_take > 1 ? 8 : 0;
  std::mt19937_64 rng(opts.seed);
  DatasetIndex index;
  for (std::size_t t = 0; t < opts.scenes; ++t) {
    const HdrImage scene = generate_scene(opts.height + margin, opts.width + margin, rng);
    for (std::size_t f = 0; f < opts.frames_per_take; ++f) {
      const std::size_t shift = margin == 0 ? 0 : (3 * f) % (margin + 1);
      const HdrImage hdr = crop(scene, shift, (margin - shift) % (margin + 1), opts.height, opts.width);
      params.seed = frame_noise_seed(opts.seed, t, f);
      const LdrImage ldr = synthesize_ldr(hdr, params);
      const std::string stem = frame_stem(t, f);
      save_png(opts.out / (stem + "_ldr.png"), ldr.to_png());
      save_png(opts.out / (stem + "_hdr.png"), hdr.to_png16());
      char take_id[16];
      std::snprintf(take_id, sizeof take_id, "take%03zu", t);
      index.frames.push_back(Frame{take_id, stem + "_ldr.png", stem + "_hdr.png", Split::Train});
    }
  }
  if (opts.val_per_take > 0) {
    index = build_split(index, opts.val_per_take, opts.seed);
  }
  write_manifest(opts.out / kManifestName, index);
  out << "wrote " << index.frames.size() << " pairs (" << index.count(Split::Val) << " val) to "
      << opts.out.string() << "\n";
  return 0;
}

Dataset load_dataset(const fs::path& dir) {
  const DatasetIndex index = read_manifest(dir / kManifestName);
  Dataset ds;
  std::vector<std::string> train_names;
  for (const auto& frame : index.frames) {
    ImagePair pair = load_pair(frame);
    const std::string name = frame.ldr_path.filename().string();
    if (frame.split == Split::Val) {
      ds.val.push_back(std::move(pair));
      ds.val_names.push_back(name);
    } else {
      ds.train.push_back(std::move(pair));
      train_names.push_back(name);
    }
  }
  if (ds.train.empty()) {
    throw DegenerateInputError("dataset '" + dir.string() + "' has no training frames");
  }
  if (ds.val.empty()) {
    ds.val = ds.train;
    ds.val_names = train_names;
  }
  return ds;
}

int train(const TrainOptions& opts, std::ostream& out) {
  const RunConfig cfg = load_run_config(opts.config);
  const Dataset ds = load_dataset(opts.data);
  make_directory(opts.out);
  std::optional<Checkpoint> resume;
  if (opts.resume) {
    resume = load_checkpoint(*opts.resume);
    const auto lo = static_cast<std::uint64_t>(resume->scalar("meta.seed_lo"));
    const auto hi = static_cast<std::uint64_t>(resume->scalar("meta.seed_hi"));
    if ((hi << 32 | lo) != cfg.train.seed) {
      throw ConfigError("resume checkpoint was written with a different seed");
    }
  }

  std::ofstream log(opts.out / "train.log", opts.resume ? std::ios::app : std::ios::trunc);
  if (!log) {
    throw IoError("cannot write '" + (opts.out / "train.log").string() + "'");
  }
  bool finite = true;
  with_precision(cfg.model.precision, [&](auto tag) {
    using T = decltype(tag);
    HDRUNet<T> model(cfg.model, cfg.train.seed);
    Trainer<T> trainer(model, cfg.train);
    if (resume) {
      trainer.restore(*resume);
    }
    TrainLog record_log;
    trainer.run(
        ds.train, ds.val, cfg.train.total_iters, record_log,
        [&](const TrainRecord& r) {
          finite = finite && std::isfinite(r.loss);
          if (r.evaluated) {
            log << r.to_line() << "\n";
            out << r.to_line() << "\n";
          }
        },
        [&](Trainer<T>& t) {
          save_checkpoint(opts.out / ("ckpt_" + std::to_string(t.iteration()) + ".bin"), t.checkpoint());
        });
    save_checkpoint(opts.out / "final.bin", trainer.checkpoint());
  });
  if (!finite) {
    out << "training diverged: non-finite loss\n";
    return 2;
  }
  return 0;
}

int infer(const InferOptions& opts, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  const ModelConfig mc = opts.config ? load_run_config(*opts.config).model : model_config_from_checkpoint(ckpt);
  mc.validate();
  const LdrImage ldr = LdrImage::from_png(load_png(opts.input));
  HdrImage hdr(ldr.height, ldr.width);
  with_precision(mc.precision, [&](auto tag) {
    using T = decltype(tag);
    HDRUNet<T> model(mc, 0);
    load_model_parameters(model, ckpt);
    const Tensor<T> y = predict(model, ldr.to_tensor<T>());
    for (std::size_t i = 0; i < hdr.pixels.size(); ++i) {
      hdr.pixels[i] = static_cast<float>(y[i]);
    }
  });
  save_png(opts.output, hdr.to_png16());
  out << "wrote " << opts.output.string() << " (" << hdr.width << "x" << hdr.height << ", 16-bit)\n";
  return 0;
}

int eval(const EvalOptions& opts, std::ostream& out) {
  opts.metrics.validate();
  const auto pred = png_names(opts.pred);
  const auto gt = png_names(opts.gt);
  std::vector<std::string> unmatched;
  std::set_symmetric_difference(pred.begin(), pred.end(), gt.begin(), gt.end(), std::back_inserter(unmatched));
  if (!unmatched.empty()) {
    std::string msg = "unmatched files:";
    for (const auto& n : unmatched) {
      msg += " " + n;
    }
    throw IoError(msg);
  }
  if (pred.empty()) {
    throw DegenerateInputError("eval: no PNG files in '" + opts.pred.string() + "'");
  }

  std::vector<double> pl(pred.size()), pm(pred.size());
  std::vector<std::string> errors(pred.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < pred.size(); ++i) {
    try {
      const PngImage a = load_png(opts.pred / pred[i]);
      const PngImage b = load_png(opts.gt / pred[i]);
      if (a.width != b.width || a.height != b.height) {
        throw ShapeError("size mismatch for '" + pred[i] + "'");
      }
      const auto va = normalized_samples(a);
      const auto vb = normalized_samples(b);
      pl[i] = psnr_l<double>(va, vb, opts.metrics);
      pm[i] = psnr_mu<double>(va, vb, opts.metrics);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) {
      throw ShapeError(e);
    }
  }
  double sum_l = 0.0, sum_m = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out << format_metric_record("psnr_l", pl[i], pred[i]) << "\n";
    out << format_metric_record("psnr_mu", pm[i], pred[i]) << "\n";
    sum_l += pl[i];
    sum_m += pm[i];
  }
  const double n = static_cast<double>(pred.size());
  out << format_metric_record("psnr_l", sum_l / n, "mean") << "\n";
  out << format_metric_record("psnr_mu", sum_m / n, "mean") << "\n";
  return 0;
}

ModelConfig tiny_model_config() {
  ModelConfig cfg;
  cfg.base_channels = 8;
  cfg.n_res_blocks = 2;
  cfg.n_scales = 2;
  cfg.precision = Precision::F64;
  return cfg;
}

Tensor<double> faulty_identity(const Tensor<double>& x, double factor) {
  Tensor<double> out = Tensor<double>::from_data(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
  Tape<double>* tape = active_tape<double>();
  if (tape != nullptr && tape->tracks(x)) {
    tape->record({&x}, out, [factor](std::span<const double> up, std::span<const std::span<double>> gin) {
      for (std::size_t i = 0; i < up.size(); ++i) {
        gin[0][i] += factor * up[i];
      }
    });
  }
  return out;
}

GradCheckReport model_gradcheck(const GradCheckRun& run) {
  ModelConfig mc = run.model;
  mc.precision = Precision::F64;
  mc.validate();
  HDRUNet<double> model(mc, run.seed);
  auto registry = model.parameters();

  std::mt19937_64 rng(run.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Shape shape{1, 3, run.height, run.width};
  Tensor<double> x(shape);
  for (auto& v : x.data()) {
    v = unit(rng);
  }
  Tensor<double> r(shape);
  for (auto& v : r.data()) {
    v = normal(rng);
  }
  const auto objective = [&]() {
    Tensor<double> y = model.forward(x);
    if (run.output_hook) {
      y = run.output_hook(y);
    }
    return ops::sum_all(ops::mul(y, r));
  };
  return grad_check<double>(objective, registry.refs(), run.options);
}

int gradcheck(const GradCheckCommandOptions& opts, std::ostream& out) {
  GradCheckRun run;
  run.model = opts.config ? load_run_config(*opts.config).model : tiny_model_config();
  run.model.precision = Precision::F64;
  if (opts.inject_fault) {
    run.output_hook = [](const Tensor<double>& y) { return faulty_identity(y, 1.01); };
  }
  const GradCheckReport report = model_gradcheck(run);
  for (const auto& e : report.entries) {
    out << "group=" << e.name << " params=" << e.count << " max_rel_error=" << std::scientific
        << std::setprecision(3) << e.max_rel_error << " max_abs_error=" << e.max_abs_error << " grad_scale=" << e.grad_scale
        << std::defaultfloat
        << " kink_shrinks=" << e.kink_shrinks << " status=" << (e.passed ? "pass" : "FAIL") << "\n";
  }
  out << "gradcheck " << (report.passed() ? "passed" : "FAILED") << ": max_rel_error=" << std::scientific
      << std::setprecision(3) << report.max_rel_error() << " tolerance=" << report.tolerance << std::defaultfloat
      << "\n";
  return report.passed() ? 0 : 1;
}

std::vector<AblationRow> ablate_modulation(const RunConfig& cfg, const std::vector<ImagePair>& train_set,
                                           const std::vector<ImagePair>& val_set) {
  std::vector<AblationRow> rows;
  for (const Modulation m :
       {Modulation::None, Modulation::GlobalChannel, Modulation::SpatialShared, Modulation::Full}) {
    ModelConfig mc = cfg.model;
    mc.modulation = m;
    mc.weighting_enabled = false;
    AblationRow row;
    row.modulation = m;
    with_precision(mc.precision, [&](auto tag) {
      using T = decltype(tag);
      HDRUNet<T> model(mc, cfg.train.seed);
      row.parameters = model.parameter_count();
      const TrainLog log = hdrunet::train<T>(model, train_set, {}, cfg.train);
      row.final_loss = log.records.back().loss;
      const EvalTable table = evaluate<T>(model, val_set, cfg.metrics);
      row.psnr_l = table.mean_psnr_l;
      row.psnr_mu = table.mean_psnr_mu;
    });
    rows.push_back(row);
  }
  return rows;
}

int ablate_modulation(const AblateOptions& opts, std::ostream& out) {
  const RunConfig cfg = load_run_config(opts.config);
  const Dataset ds = load_dataset(opts.data);
  const auto rows = ablate_modulation(cfg, ds.train, ds.val);
  bool finite = true;
  for (const auto& r : rows) {
    out << "modulation=" << to_string(r.modulation) << " params=" << r.parameters
        << " final_loss=" << fixed(r.final_loss, 8) << " psnr_l=" << fixed(r.psnr_l) << " psnr_mu=" << fixed(r.psnr_mu)
        << "\n";
    finite = finite && std::isfinite(r.final_loss) && std::isfinite(r.psnr_l) && std::isfinite(r.psnr_mu);
  }
  return finite ? 0 : 2;
}

PngImage gradient_map_image(const PngImage& image) {
  const std::size_t h = image.height;
  const std::size_t w = image.width;
  std::vector<Plane> maps;
  double peak = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    Plane p{h, w, std::vector<double>(h * w)};
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        p.values[y * w + x] = image.at(y, x, c) / image.max_value();
      }
    }
    maps.push_back(scharr_gradient_map(p));
    peak = std::max(peak, *std::max_element(maps.back().values.begin(), maps.back().values.end()));
  }
  PngImage out;
  out.width = w;
  out.height = h;
  out.bit_depth = 16;
  out.samples.assign(3 * h * w, 0);
  if (peak > 0.0) {
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < h * w; ++i) {
        out.samples[i * 3 + c] = static_cast<std::uint16_t>(std::lround(maps[c].values[i] / peak * 65535.0));
      }
    }
  }
  return out;
}

int gradient_map(const GradientMapOptions& opts, std::ostream& out) {
  const PngImage map = gradient_map_image(load_png(opts.input));
  save_png(opts.output, map);
  out << "wrote " << opts.output.string() << "\n";
  return 0;
}

}  // namespace hdrunet::cli
