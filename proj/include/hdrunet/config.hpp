#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "hdrunet/data.hpp"
#include "hdrunet/metrics.hpp"
#include "hdrunet/model.hpp"
#include "hdrunet/trainer.hpp"

namespace hdrunet {

/// Everything a command needs, read from a flat `key = value` file. Lines
/// starting with '#' and blank lines are ignored; trailing '# ...' is stripped.
///
///   model:   base_channels n_res_blocks n_scales modulation weighting precision
///   train:   batch_size patch_size total_iters loss seed eval_every
///            checkpoint_every lr decay_factor decay_every
///   degrade: exposure_gain noise_sigma quant_bits clip_low clip_high
///   metrics: mu percentile psnr_cap_db
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DegradationParams degradation;
  MetricConfig metrics;

  /// Throws ConfigError.
  void validate() const;
};

/// Throws ConfigError listing every unknown key and every unparsable value.
RunConfig parse_run_config(std::string_view text);
/// Throws IoError when the file cannot be read.
RunConfig load_run_config(const std::filesystem::path& path);
std::string format_run_config(const RunConfig& cfg);

}  // namespace hdrunet
