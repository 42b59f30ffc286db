#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hdrunet/config.hpp"
#include "hdrunet/gradcheck.hpp"

namespace hdrunet::cli {

// Each command writes its report to `out`, returns the process exit code and
// throws hdrunet::Error on validation failures (the CLI maps those to 1).

struct SynthDataOptions {
  std::filesystem::path out;
  std::size_t scenes = 4;
  std::size_t height = 64;
  std::size_t width = 64;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> params;  // RunConfig; only degradation keys are used
  std::size_t frames_per_take = 1;
  std::size_t val_per_take = 0;
};

/// File names of one frame: take<t>_f<f>_ldr.png / _hdr.png.
std::string frame_stem(std::size_t take, std::size_t frame);
inline constexpr const char* kManifestName = "manifest.tsv";
/// Noise seed of one synthesized frame.
std::uint64_t frame_noise_seed(std::uint64_t seed, std::size_t take, std::size_t frame);

int synth_data(const SynthDataOptions& opts, std::ostream& out);

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path data;
  std::filesystem::path out;
  std::optional<std::filesystem::path> resume;
};

/// Writes out/train.log (one line per evaluation), out/ckpt_<iter>.bin every
/// checkpoint_every iterations and out/final.bin.
int train(const TrainOptions& opts, std::ostream& out);

struct InferOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::filesystem::path> config;  // overrides the architecture stored in the checkpoint
};

int infer(const InferOptions& opts, std::ostream& out);

struct EvalOptions {
  std::filesystem::path pred;
  std::filesystem::path gt;
  MetricConfig metrics;
};

int eval(const EvalOptions& opts, std::ostream& out);

struct GradCheckRun {
  ModelConfig model;
  std::size_t height = 16;
  std::size_t width = 16;
  std::uint64_t seed = 0;
  GradCheckOptions options;
  // Applied to the model output before the scalar projection; used to plant
  // a faulty backward rule.
  std::function<Tensor<double>(const Tensor<double>&)> output_hook;
};

/// base_channels 8, n_res_blocks 2, n_scales 2, 64-bit.
ModelConfig tiny_model_config();
/// Objective sum(R * model(x)) with seeded R and x, checked per registry entry.
GradCheckReport model_gradcheck(const GradCheckRun& run);
/// Identity forward whose backward scales the gradient by `factor`.
Tensor<double> faulty_identity(const Tensor<double>& x, double factor);

struct GradCheckCommandOptions {
  std::optional<std::filesystem::path> config;
  bool inject_fault = false;
};

int gradcheck(const GradCheckCommandOptions& opts, std::ostream& out);

struct AblateOptions {
  std::filesystem::path config;
  std::filesystem::path data;
};

struct AblationRow {
  Modulation modulation = Modulation::Full;
  std::size_t parameters = 0;
  double final_loss = 0.0;
  double psnr_l = 0.0;
  double psnr_mu = 0.0;
};

/// Trains every modulation strategy with weighting disabled and identical seeds.
std::vector<AblationRow> ablate_modulation(const RunConfig& cfg, const std::vector<ImagePair>& train_set,
                                           const std::vector<ImagePair>& val_set);
int ablate_modulation(const AblateOptions& opts, std::ostream& out);

struct GradientMapOptions {
  std::filesystem::path input;
  std::filesystem::path output;
};

/// Per-channel Scharr magnitude of the image (values normalized by the depth's
/// max code), scaled so the global maximum maps to 65535.
PngImage gradient_map_image(const PngImage& image);
int gradient_map(const GradientMapOptions& opts, std::ostream& out);

struct Dataset {
  std::vector<ImagePair> train;
  std::vector<ImagePair> val;
  std::vector<std::string> val_names;
};

/// Loads <dir>/manifest.tsv. When the manifest has no validation frames the
/// training frames double as the evaluation set.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace hdrunet::cli
