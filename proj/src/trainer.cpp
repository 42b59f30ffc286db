#include "hdrunet/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "hdrunet/ops.hpp"

namespace hdrunet {

double Schedule::lr(std::size_t iteration) const {
  return initial_lr / std::pow(decay_factor, static_cast<double>(iteration / decay_every));
}

void TrainConfig::validate() const {
  if (batch_size == 0 || patch_size == 0 || total_iters == 0) {
    throw ConfigError("batch_size, patch_size and total_iters must be positive");
  }
  if (!(schedule.initial_lr > 0.0) || !(schedule.decay_factor > 0.0) || schedule.decay_every == 0) {
    throw ConfigError("lr, decay_factor and decay_every must be positive");
  }
  metrics.validate();
}

template <Real T>
AdamState<T>::AdamState(const ParamRegistry<T>& registry) {
  for (const auto& e : registry.entries()) {
    m.emplace_back(e.tensor->numel(), T(0));
    v.emplace_back(e.tensor->numel(), T(0));
  }
}

template <Real T>
void adam_step(const ParamRegistry<T>& registry, AdamState<T>& state, double lr) {
  const auto& entries = registry.entries();
  if (state.m.size() != entries.size()) {
    throw ContractError("adam_step: optimizer state does not match the registry");
  }
  for (const auto& e : entries) {
    if (!e.tensor->has_grad()) {
      throw ContractError("adam_step: parameter '" + e.name + "' has no gradient");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    auto param = entries[k].tensor->data();
    auto grad = entries[k].tensor->grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      const double mi = state.beta1 * static_cast<double>(m[i]) + (1.0 - state.beta1) * g;
      const double vi = state.beta2 * static_cast<double>(v[i]) + (1.0 - state.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + state.epsilon);
      param[i] = static_cast<T>(static_cast<double>(param[i]) - update);
    }
    entries[k].tensor->zero_grad();
  }
}

template <Real T>
Batch<T> sample_batch(std::span<const ImagePair> data, const TrainConfig& cfg, std::size_t iteration) {
  if (data.empty()) {
    throw DegenerateInputError("training set is empty");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(iteration >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);

  const std::size_t p = cfg.patch_size;
  const Shape shape{cfg.batch_size, 3, p, p};
  Batch<T> batch{Tensor<T>(shape), Tensor<T>(shape)};
  const std::size_t sample_size = 3 * p * p;
  for (std::size_t b = 0; b < cfg.batch_size; ++b) {
    const ImagePair& pair = data[pick(rng)];
    const ImagePair patch = random_crop(pair, p, rng);
    for (std::size_t i = 0; i < sample_size; ++i) {
      batch.input[b * sample_size + i] = T(patch.ldr.pixels[i]) / T(255);
      batch.target[b * sample_size + i] = static_cast<T>(patch.hdr.pixels[i]);
    }
  }
  return batch;
}

std::string TrainRecord::to_line() const {
  std::ostringstream os;
  os << "iter=" << iter << " lr=" << std::setprecision(9) << lr << " loss=" << loss << std::fixed
     << std::setprecision(6) << " psnr_l=" << psnr_l << " psnr_mu=" << psnr_mu;
  return os.str();
}

std::vector<TrainRecord> TrainLog::evaluations() const {
  std::vector<TrainRecord> out;
  for (const auto& r : records) {
    if (r.evaluated) {
      out.push_back(r);
    }
  }
  return out;
}

template <Real T>
EvalTable evaluate(const Predictor<T>& predictor, std::span<const ImagePair> pairs, const MetricConfig& metrics,
                   const std::vector<std::string>& names) {
  if (pairs.empty()) {
    throw DegenerateInputError("evaluate: empty image set");
  }
  EvalTable table;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Tensor<T> pred = predictor(pairs[i].ldr.template to_tensor<T>());
    const Tensor<T> gt = pairs[i].hdr.template to_tensor<T>();
    EvalRow row;
    row.name = i < names.size() ? names[i] : "image" + std::to_string(i);
    row.psnr_l = psnr_l<T>(pred.data(), gt.data(), metrics);
    row.psnr_mu = psnr_mu<T>(pred.data(), gt.data(), metrics);
    table.mean_psnr_l += row.psnr_l;
    table.mean_psnr_mu += row.psnr_mu;
    table.rows.push_back(std::move(row));
  }
  table.mean_psnr_l /= static_cast<double>(pairs.size());
  table.mean_psnr_mu /= static_cast<double>(pairs.size());
  return table;
}

template <Real T>
EvalTable evaluate(const HDRUNet<T>& model, std::span<const ImagePair> pairs, const MetricConfig& metrics,
                   const std::vector<std::string>& names) {
  return evaluate<T>([&model](const Tensor<T>& x) { return predict(model, x); }, pairs, metrics, names);
}

namespace {

template <Real T>
CheckpointTensor to_checkpoint_tensor(std::string name, std::span<const T> values, std::vector<std::uint32_t> dims) {
  CheckpointTensor t;
  t.name = std::move(name);
  t.dims = std::move(dims);
  if constexpr (std::is_same_v<T, float>) {
    t.dtype = DType::F32;
    t.f32.assign(values.begin(), values.end());
  } else {
    t.dtype = DType::F64;
    t.f64.assign(values.begin(), values.end());
  }
  return t;
}

template <Real T>
void copy_from(const CheckpointTensor& src, std::span<T> dst) {
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = static_cast<T>(src.value(i));
  }
}

template <Real T>
const CheckpointTensor& expect(const Checkpoint& ckpt, const std::string& name, const std::vector<std::uint32_t>& dims) {
  const CheckpointTensor* t = ckpt.find(name);
  if (t == nullptr) {
    throw ShapeError("checkpoint is missing tensor '" + name + "'");
  }
  if (t->dims != dims) {
    throw ShapeError("checkpoint tensor '" + name + "' has a different shape than the model expects");
  }
  return *t;
}

}  // namespace

template <Real T>
Checkpoint model_checkpoint(HDRUNet<T>& model) {
  Checkpoint ckpt;
  const ModelConfig& cfg = model.config();
  ckpt.add_scalar("meta.base_channels", static_cast<double>(cfg.base_channels));
  ckpt.add_scalar("meta.n_res_blocks", static_cast<double>(cfg.n_res_blocks));
  ckpt.add_scalar("meta.n_scales", static_cast<double>(cfg.n_scales));
  ckpt.add_scalar("meta.modulation", static_cast<double>(static_cast<int>(cfg.modulation)));
  ckpt.add_scalar("meta.weighting", cfg.weighting_enabled ? 1.0 : 0.0);
  ckpt.add_scalar("meta.precision", std::is_same_v<T, float> ? 0.0 : 1.0);
  const auto registry = model.parameters();
  for (const auto& e : registry.entries()) {
    ckpt.tensors.push_back(to_checkpoint_tensor<T>(e.name, std::span<const T>(e.tensor->data()), e.dims));
  }
  return ckpt;
}

ModelConfig model_config_from_checkpoint(const Checkpoint& ckpt) {
  ModelConfig cfg;
  cfg.base_channels = static_cast<std::size_t>(ckpt.scalar("meta.base_channels"));
  cfg.n_res_blocks = static_cast<std::size_t>(ckpt.scalar("meta.n_res_blocks"));
  cfg.n_scales = static_cast<std::size_t>(ckpt.scalar("meta.n_scales"));
  const int mod = static_cast<int>(ckpt.scalar("meta.modulation"));
  if (mod < 0 || mod > 3) {
    throw FormatError("checkpoint has an invalid modulation code");
  }
  cfg.modulation = static_cast<Modulation>(mod);
  cfg.weighting_enabled = ckpt.scalar("meta.weighting") != 0.0;
  cfg.precision = ckpt.scalar("meta.precision") == 0.0 ? Precision::F32 : Precision::F64;
  return cfg;
}

template <Real T>
void load_model_parameters(HDRUNet<T>& model, const Checkpoint& ckpt) {
  const auto registry = model.parameters();
  for (const auto& e : registry.entries()) {
    copy_from<T>(expect<T>(ckpt, e.name, e.dims), e.tensor->data());
  }
}

template <Real T>
Trainer<T>::Trainer(HDRUNet<T>& model, TrainConfig cfg)
    : model_(&model), cfg_(std::move(cfg)), adam_(model.parameters()) {
  cfg_.validate();
}

template <Real T>
TrainRecord Trainer<T>::step(std::span<const ImagePair> train) {
  const Batch<T> batch = sample_batch<T>(train, cfg_, iteration_);
  const ParamRegistry<T> registry = model_->parameters();
  TrainRecord rec;
  rec.iter = iteration_;
  rec.lr = cfg_.schedule.lr(iteration_);
  {
    Tape<T> tape;
    TapeScope scope(tape);
    registry.watch(tape);
    const Tensor<T> prediction = model_->forward(batch.input);
    const Tensor<T> loss = compute_loss(cfg_.loss, prediction, batch.target);
    rec.loss = static_cast<double>(loss[0]);
    tape.backward(loss);
  }
  for (const auto& e : registry.entries()) {
    e.tensor->detach();
  }
  adam_step(registry, adam_, rec.lr);
  ++iteration_;
  return rec;
}

template <Real T>
void Trainer<T>::run(std::span<const ImagePair> train, std::span<const ImagePair> val, std::size_t until,
                     TrainLog& log, const std::function<void(const TrainRecord&)>& on_record,
                     const std::function<void(Trainer&)>& on_checkpoint) {
  if (train.empty()) {
    throw DegenerateInputError("training set is empty");
  }
  while (iteration_ < until) {
    TrainRecord rec = step(train);
    const std::size_t done = iteration_;
    const bool periodic = cfg_.eval_every > 0 && done % cfg_.eval_every == 0;
    if (!val.empty() && (periodic || done == until)) {
      const EvalTable table = evaluate<T>(*model_, val, cfg_.metrics);
      rec.evaluated = true;
      rec.psnr_l = table.mean_psnr_l;
      rec.psnr_mu = table.mean_psnr_mu;
    }
    log.records.push_back(rec);
    if (on_record) {
      on_record(rec);
    }
    if (on_checkpoint && cfg_.checkpoint_every > 0 && done % cfg_.checkpoint_every == 0) {
      on_checkpoint(*this);
    }
  }
}

template <Real T>
Checkpoint Trainer<T>::checkpoint() {
  Checkpoint ckpt = model_checkpoint(*model_);
  ckpt.add_scalar("meta.iteration", static_cast<double>(iteration_));
  ckpt.add_scalar("meta.adam_step", static_cast<double>(adam_.step));
  ckpt.add_scalar("meta.seed_lo", static_cast<double>(cfg_.seed & 0xffffffffULL));
  ckpt.add_scalar("meta.seed_hi", static_cast<double>(cfg_.seed >> 32));
  const auto registry = model_->parameters();
  for (std::size_t k = 0; k < registry.size(); ++k) {
    const auto& e = registry.entries()[k];
    ckpt.tensors.push_back(to_checkpoint_tensor<T>("adam.m." + e.name, std::span<const T>(adam_.m[k]), e.dims));
    ckpt.tensors.push_back(to_checkpoint_tensor<T>("adam.v." + e.name, std::span<const T>(adam_.v[k]), e.dims));
  }
  return ckpt;
}

template <Real T>
void Trainer<T>::restore(const Checkpoint& ckpt) {
  load_model_parameters(*model_, ckpt);
  const auto registry = model_->parameters();
  AdamState<T> state(registry);
  for (std::size_t k = 0; k < registry.size(); ++k) {
    const auto& e = registry.entries()[k];
    copy_from<T>(expect<T>(ckpt, "adam.m." + e.name, e.dims), std::span<T>(state.m[k]));
    copy_from<T>(expect<T>(ckpt, "adam.v." + e.name, e.dims), std::span<T>(state.v[k]));
  }
  state.step = static_cast<std::size_t>(ckpt.scalar("meta.adam_step"));
  adam_ = std::move(state);
  iteration_ = static_cast<std::size_t>(ckpt.scalar("meta.iteration"));
  registry.zero_grad();
}

template <Real T>
TrainLog train(HDRUNet<T>& model, std::span<const ImagePair> train_set, std::span<const ImagePair> val_set,
               const TrainConfig& cfg) {
  Trainer<T> trainer(model, cfg);
  TrainLog log;
  trainer.run(train_set, val_set, cfg.total_iters, log);
  return log;
}

#define HDRUNET_INSTANTIATE(T)                                                                                   \
  template struct AdamState<T>;                                                                                  \
  template void adam_step<T>(const ParamRegistry<T>&, AdamState<T>&, double);                                    \
  template Batch<T> sample_batch<T>(std::span<const ImagePair>, const TrainConfig&, std::size_t);                \
  template EvalTable evaluate<T>(const Predictor<T>&, std::span<const ImagePair>, const MetricConfig&,           \
                                 const std::vector<std::string>&);                                               \
  template EvalTable evaluate<T>(const HDRUNet<T>&, std::span<const ImagePair>, const MetricConfig&,             \
                                 const std::vector<std::string>&);                                               \
  template Checkpoint model_checkpoint<T>(HDRUNet<T>&);                                                          \
  template void load_model_parameters<T>(HDRUNet<T>&, const Checkpoint&);                                        \
  template class Trainer<T>;                                                                                     \
  template TrainLog train<T>(HDRUNet<T>&, std::span<const ImagePair>, std::span<const ImagePair>,                \
                             const TrainConfig&);

HDRUNET_INSTANTIATE(float)
HDRUNET_INSTANTIATE(double)
#undef HDRUNET_INSTANTIATE

}  // namespace hdrunet
