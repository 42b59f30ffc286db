#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hdrunet/checkpoint.hpp"
#include "hdrunet/data.hpp"
#include "hdrunet/losses.hpp"
#include "hdrunet/metrics.hpp"
#include "hdrunet/model.hpp"

namespace hdrunet {

/// lr(t) = initial_lr / decay_factor ^ floor(t / decay_every)
struct Schedule {
  double initial_lr = 2e-4;
  double decay_factor = 2.0;
  std::size_t decay_every = 800;

  double lr(std::size_t iteration) const;
};

struct TrainConfig {
  std::size_t batch_size = 4;
  std::size_t patch_size = 32;
  std::size_t total_iters = 2000;
  LossKind loss = LossKind::TanhL1;
  std::uint64_t seed = 0;
  std::size_t eval_every = 200;       // 0 disables periodic evaluation
  std::size_t checkpoint_every = 0;   // 0 keeps only the final checkpoint
  Schedule schedule;
  MetricConfig metrics;

  /// Throws ConfigError.
  void validate() const;
};

template <Real T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  AdamState() = default;
  explicit AdamState(const ParamRegistry<T>& registry);
};

/// Bias-corrected Adam update of every registry tensor, then zeroes the
/// gradients. Throws ContractError when a parameter has no gradient buffer.
template <Real T>
void adam_step(const ParamRegistry<T>& registry, AdamState<T>& state, double lr);

template <Real T>
struct Batch {
  Tensor<T> input;   // (B, 3, P, P) LDR float view
  Tensor<T> target;  // (B, 3, P, P) HDR
};

/// Deterministic batch for one iteration. The generator is seeded from
/// (seed, iteration); per batch element it draws the pair index, then the crop
/// row, then the crop column.
template <Real T>
Batch<T> sample_batch(std::span<const ImagePair> data, const TrainConfig& cfg, std::size_t iteration);

struct TrainRecord {
  std::size_t iter = 0;
  double lr = 0.0;
  double loss = 0.0;
  bool evaluated = false;
  double psnr_l = 0.0;
  double psnr_mu = 0.0;

  /// "iter=<n> lr=<f> loss=<f> psnr_l=<f> psnr_mu=<f>"
  std::string to_line() const;
};

struct TrainLog {
  std::vector<TrainRecord> records;  // one per iteration

  std::vector<TrainRecord> evaluations() const;
};

struct EvalRow {
  std::string name;
  double psnr_l = 0.0;
  double psnr_mu = 0.0;
};

struct EvalTable {
  std::vector<EvalRow> rows;
  double mean_psnr_l = 0.0;
  double mean_psnr_mu = 0.0;
};

template <Real T>
using Predictor = std::function<Tensor<T>(const Tensor<T>&)>;

/// Per-image PSNR-L / PSNR-mu of predictor(ldr) against hdr, plus arithmetic
/// means. Throws DegenerateInputError on an empty set.
template <Real T>
EvalTable evaluate(const Predictor<T>& predictor, std::span<const ImagePair> pairs, const MetricConfig& metrics,
                   const std::vector<std::string>& names = {});
template <Real T>
EvalTable evaluate(const HDRUNet<T>& model, std::span<const ImagePair> pairs, const MetricConfig& metrics,
                   const std::vector<std::string>& names = {});

/// Model parameters plus the architecture echo under "meta.*".
template <Real T>
Checkpoint model_checkpoint(HDRUNet<T>& model);
ModelConfig model_config_from_checkpoint(const Checkpoint& ckpt);
/// Throws ShapeError naming the first missing or mis-shaped tensor.
template <Real T>
void load_model_parameters(HDRUNet<T>& model, const Checkpoint& ckpt);

template <Real T>
class Trainer {
 public:
  Trainer(HDRUNet<T>& model, TrainConfig cfg);

  std::size_t iteration() const { return iteration_; }
  const TrainConfig& config() const { return cfg_; }
  const AdamState<T>& adam() const { return adam_; }

  TrainRecord step(std::span<const ImagePair> train);

  /// Steps until `until` iterations have completed. Evaluates on `val` every
  /// eval_every iterations and after the last one; calls on_checkpoint every
  /// checkpoint_every iterations.
  void run(std::span<const ImagePair> train, std::span<const ImagePair> val, std::size_t until, TrainLog& log,
           const std::function<void(const TrainRecord&)>& on_record = {},
           const std::function<void(Trainer&)>& on_checkpoint = {});

  /// Parameters, Adam moments, iteration counter and configuration echo.
  Checkpoint checkpoint();
  /// Throws ShapeError / FormatError when the checkpoint does not match.
  void restore(const Checkpoint& ckpt);

 private:
  HDRUNet<T>* model_;
  TrainConfig cfg_;
  AdamState<T> adam_;
  std::size_t iteration_ = 0;
};

/// Full run from iteration 0 to cfg.total_iters. Throws DegenerateInputError
/// on an empty training set.
template <Real T>
TrainLog train(HDRUNet<T>& model, std::span<const ImagePair> train_set, std::span<const ImagePair> val_set,
               const TrainConfig& cfg);

}  // namespace hdrunet
