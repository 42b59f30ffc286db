#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "hdrunet/ops.hpp"
#include "hdrunet/trainer.hpp"
#include "metric_oracle.hpp"
#include "test_util.hpp"

using namespace hdrunet;

TEST(Schedule, StepBoundaries) {
  Schedule s;
  s.initial_lr = 2e-4;
  s.decay_every = 800;
  EXPECT_EQ(s.lr(0), 2e-4);
  EXPECT_EQ(s.lr(799), 2e-4);
  EXPECT_EQ(s.lr(800), 1e-4);
  EXPECT_EQ(s.lr(1600), 5e-5);
}

TEST(Schedule, MatchesFormulaOverSweep) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Schedule s;
    s.initial_lr = std::uniform_real_distribution<double>(1e-6, 1e-2)(rng);
    s.decay_factor = std::uniform_real_distribution<double>(1.1, 4.0)(rng);
    s.decay_every = std::uniform_int_distribution<std::size_t>(1, 1000)(rng);
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, 20000)(rng);
    const double expected = s.initial_lr / std::pow(s.decay_factor, static_cast<double>(t / s.decay_every));
    EXPECT_NEAR(s.lr(t), expected, 1e-15 * expected) << trial;
  }
}

namespace {

struct Scalar {
  Tensor<double> w = Tensor<double>::from_data({1, 1, 1, 1}, {1.0});
  ParamRegistry<double> registry;
  Scalar() { registry.add("w", w, {1}); }
};

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {3.0, -0.02, 1e3}) {
    Scalar s;
    AdamState<double> state(s.registry);
    s.w.set_requires_grad(true);
    s.w.grad()[0] = g;
    adam_step(s.registry, state, 0.01);
    EXPECT_NEAR(s.w[0] - 1.0, -0.01 * (g > 0 ? 1.0 : -1.0), 1e-8) << g;
    EXPECT_EQ(s.w.grad()[0], 0.0);
    EXPECT_EQ(state.step, 1u);
  }
}

TEST(Adam, ZeroGradientFromZeroStateDoesNotMove) {
  Scalar s;
  AdamState<double> state(s.registry);
  s.w.set_requires_grad(true);
  adam_step(s.registry, state, 0.5);
  EXPECT_EQ(s.w[0], 1.0);
}

TEST(Adam, QuadraticBowlConverges) {
  Scalar s;
  AdamState<double> state(s.registry);
  s.w.set_requires_grad(true);
  for (int i = 0; i < 200; ++i) {
    s.w.grad()[0] = 2.0 * s.w[0];
    adam_step(s.registry, state, 0.1);
  }
  EXPECT_LT(std::abs(s.w[0]), 1e-3);
}

TEST(Adam, MissingGradientIsContractError) {
  Scalar s;
  AdamState<double> state(s.registry);
  EXPECT_THROW(adam_step(s.registry, state, 0.1), ContractError);
  AdamState<double> wrong;
  s.w.set_requires_grad(true);
  EXPECT_THROW(adam_step(s.registry, wrong, 0.1), ContractError);
}

TEST(SampleBatch, DeterministicAndShaped) {
  const auto pairs = fixtures::lattice_pairs(3, 32, 1);
  const auto cfg = fixtures::quick_train(4, 9);
  const auto a = sample_batch<float>(pairs, cfg, 2);
  const auto b = sample_batch<float>(pairs, cfg, 2);
  EXPECT_EQ(a.input.shape(), (Shape{2, 3, 16, 16}));
  EXPECT_EQ(std::vector<float>(a.input.data().begin(), a.input.data().end()),
            std::vector<float>(b.input.data().begin(), b.input.data().end()));
  const auto c = sample_batch<float>(pairs, cfg, 3);
  EXPECT_NE(std::vector<float>(a.target.data().begin(), a.target.data().end()),
            std::vector<float>(c.target.data().begin(), c.target.data().end()));
  // lossless pairs: crop of LDR and HDR must coincide
  for (std::size_t i = 0; i < a.input.numel(); ++i) ASSERT_EQ(a.input[i], a.target[i]);
  EXPECT_THROW(sample_batch<float>({}, cfg, 0), DegenerateInputError);
}

TEST(Train, SameSeedIsBitwiseReproducible) {
  const auto pairs = fixtures::lattice_pairs(3, 32, 2);
  const auto cfg = fixtures::quick_train(15, 4);
  HDRUNet<float> a(fixtures::tiny_model(), 1), b(fixtures::tiny_model(), 1);
  const auto la = train<float>(a, pairs, {}, cfg);
  const auto lb = train<float>(b, pairs, {}, cfg);
  EXPECT_EQ(fixtures::snapshot(a), fixtures::snapshot(b));
  ASSERT_EQ(la.records.size(), 15u);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(la.records[i].loss, lb.records[i].loss);

  HDRUNet<float> c(fixtures::tiny_model(), 1);
  train<float>(c, pairs, {}, fixtures::quick_train(15, 5));
  EXPECT_NE(fixtures::snapshot(a), fixtures::snapshot(c));
}

TEST(Train, EmptyDatasetThrows) {
  HDRUNet<float> m(fixtures::tiny_model(), 1);
  EXPECT_THROW(train<float>(m, {}, {}, fixtures::quick_train(2, 0)), DegenerateInputError);
}

TEST(Train, LogRecordsScheduleAndEvaluations) {
  const auto pairs = fixtures::lattice_pairs(2, 32, 3);
  auto cfg = fixtures::quick_train(10, 1);
  cfg.eval_every = 4;
  cfg.schedule.decay_every = 5;
  HDRUNet<float> m(fixtures::tiny_model(), 2);
  const auto log = train<float>(m, pairs, pairs, cfg);
  ASSERT_EQ(log.records.size(), 10u);
  for (const auto& r : log.records) EXPECT_EQ(r.lr, cfg.schedule.lr(r.iter));
  const auto evals = log.evaluations();
  ASSERT_EQ(evals.size(), 3u);
  EXPECT_EQ(evals[0].iter, 3u);
  EXPECT_EQ(evals[2].iter, 9u);
  const std::string line = evals[0].to_line();
  EXPECT_EQ(line.rfind("iter=3 lr=", 0), 0u) << line;
  EXPECT_NE(line.find(" loss="), std::string::npos);
  EXPECT_NE(line.find(" psnr_l="), std::string::npos);
  EXPECT_NE(line.find(" psnr_mu="), std::string::npos);
}

TEST(Checkpoint, EncodeDecodeBitwise) {
  HDRUNet<float> m(fixtures::tiny_model(), 3);
  const Checkpoint ckpt = model_checkpoint(m);
  const auto bytes = encode_checkpoint(ckpt);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HDRU");
  const Checkpoint back = decode_checkpoint(bytes);
  ASSERT_EQ(back.tensors.size(), ckpt.tensors.size());
  for (std::size_t i = 0; i < back.tensors.size(); ++i) {
    EXPECT_EQ(back.tensors[i].name, ckpt.tensors[i].name);
    EXPECT_EQ(back.tensors[i].dims, ckpt.tensors[i].dims);
    EXPECT_EQ(back.tensors[i].f32, ckpt.tensors[i].f32);
    EXPECT_EQ(back.tensors[i].f64, ckpt.tensors[i].f64);
  }
  EXPECT_EQ(encode_checkpoint(back), bytes);

  testutil::TempDir dir("ckpt");
  save_checkpoint(dir.path() / "m.bin", ckpt);
  EXPECT_EQ(encode_checkpoint(load_checkpoint(dir.path() / "m.bin")), bytes);
}

TEST(Checkpoint, CorruptionErrorsAreDistinct) {
  HDRUNet<float> m(fixtures::tiny_model(), 3);
  const auto bytes = encode_checkpoint(model_checkpoint(m));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), BadMagicError);
  auto bad_version = bytes;
  bad_version[4] = 99;
  EXPECT_THROW(decode_checkpoint(bad_version), VersionError);
  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + bytes.size() / 2);
  EXPECT_THROW(decode_checkpoint(truncated), TruncatedError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.bin"), IoError);
}

TEST(Checkpoint, MismatchedModelNamesTensor) {
  HDRUNet<float> small(fixtures::tiny_model(), 1);
  auto other_cfg = fixtures::tiny_model();
  other_cfg.base_channels = 12;
  HDRUNet<float> other(other_cfg, 1);
  try {
    load_model_parameters(other, model_checkpoint(small));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("base.head.weight"), std::string::npos) << e.what();
  }
  auto no_weight = fixtures::tiny_model();
  no_weight.weighting_enabled = false;
  HDRUNet<float> stripped(no_weight, 1);
  HDRUNet<float> full(fixtures::tiny_model(), 1);
  EXPECT_THROW(load_model_parameters(full, model_checkpoint(stripped)), ShapeError);
}

TEST(Checkpoint, ConfigEchoRoundTrips) {
  auto mc = fixtures::tiny_model(Precision::F64);
  mc.modulation = Modulation::SpatialShared;
  mc.weighting_enabled = false;
  HDRUNet<double> m(mc, 1);
  const ModelConfig back = model_config_from_checkpoint(model_checkpoint(m));
  EXPECT_EQ(back.base_channels, mc.base_channels);
  EXPECT_EQ(back.n_res_blocks, mc.n_res_blocks);
  EXPECT_EQ(back.n_scales, mc.n_scales);
  EXPECT_EQ(back.modulation, mc.modulation);
  EXPECT_EQ(back.weighting_enabled, false);
  EXPECT_EQ(back.precision, Precision::F64);
}

TEST(Resume, MatchesUninterruptedAcrossRandomSplits) {
  const auto pairs = fixtures::lattice_pairs(3, 32, 5);
  std::mt19937_64 rng(2024);
  const std::size_t total = 12;
  for (int trial = 0; trial < 10; ++trial) {
    const std::uint64_t seed = rng();
    const std::size_t split = std::uniform_int_distribution<std::size_t>(1, total - 1)(rng);
    auto cfg = fixtures::quick_train(total, seed);
    cfg.schedule.decay_every = 5;

    HDRUNet<float> straight(fixtures::tiny_model(), seed);
    train<float>(straight, pairs, {}, cfg);

    HDRUNet<float> first(fixtures::tiny_model(), seed);
    Trainer<float> t1(first, cfg);
    TrainLog log;
    t1.run(pairs, {}, split, log);
    const auto bytes = encode_checkpoint(t1.checkpoint());

    HDRUNet<float> resumed(fixtures::tiny_model(), seed ^ 0xffff);
    Trainer<float> t2(resumed, cfg);
    t2.restore(decode_checkpoint(bytes));
    EXPECT_EQ(t2.iteration(), split);
    t2.run(pairs, {}, total, log);
    EXPECT_EQ(fixtures::snapshot(resumed), fixtures::snapshot(straight)) << "seed " << seed << " split " << split;
  }
}

TEST(Evaluate, IdentityShimIsCapped) {
  const auto pairs = fixtures::lattice_pairs(3, 16, 6);
  // HDR pixels are stored as float, so the bitwise-equal comparison is in float
  const Predictor<float> identity = [](const Tensor<float>& x) { return x; };
  MetricConfig mc;
  const auto table = evaluate<float>(identity, pairs, mc);
  ASSERT_EQ(table.rows.size(), 3u);
  for (const auto& r : table.rows) {
    EXPECT_EQ(r.psnr_l, mc.psnr_cap_db);
    EXPECT_EQ(r.psnr_mu, mc.psnr_cap_db);
  }
  EXPECT_EQ(table.rows[1].name, "image1");
  EXPECT_THROW(evaluate<float>(identity, {}, mc), DegenerateInputError);
}

TEST(Evaluate, RowsMatchOracleAndMeanIsArithmetic) {
  const auto pairs = fixtures::noisy_pairs(4, 16, 7, 0.05);
  const Predictor<double> dim = [](const Tensor<double>& x) { return ops::scale(x, 0.9); };
  MetricConfig mc;
  const auto table = evaluate<double>(dim, pairs, mc, {"a", "b", "c", "d"});
  double sum_l = 0.0, sum_mu = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto pred = dim(pairs[i].ldr.to_tensor<double>());
    const auto gt = pairs[i].hdr.to_tensor<double>();
    const std::vector<double> p(pred.data().begin(), pred.data().end()), g(gt.data().begin(), gt.data().end());
    EXPECT_NEAR(table.rows[i].psnr_l, oracle::psnr_l(p, g, mc.psnr_cap_db), 1e-9);
    EXPECT_NEAR(table.rows[i].psnr_mu, oracle::psnr_mu(p, g, mc.mu, mc.percentile, mc.psnr_cap_db), 1e-9);
    sum_l += table.rows[i].psnr_l;
    sum_mu += table.rows[i].psnr_mu;
  }
  EXPECT_EQ(table.rows[3].name, "d");
  EXPECT_NEAR(table.mean_psnr_l, sum_l / 4, 1e-12);
  EXPECT_NEAR(table.mean_psnr_mu, sum_mu / 4, 1e-12);
}

TEST(Overfit, SmoothedLossIsNonIncreasing) {
  const auto pairs = fixtures::lattice_pairs(2, 32, 7);
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.patch_size = 32;
  cfg.total_iters = 500;
  cfg.eval_every = 0;
  cfg.schedule.decay_every = 500;
  HDRUNet<float> model(fixtures::desk_model(), 1);
  const auto log = train<float>(model, pairs, {}, cfg);
  std::vector<double> windows;
  for (std::size_t start = 0; start + 50 <= log.records.size(); start += 50) {
    double s = 0.0;
    for (std::size_t i = start; i < start + 50; ++i) s += log.records[i].loss;
    windows.push_back(s / 50.0);
  }
  ASSERT_EQ(windows.size(), 10u);
  for (std::size_t i = 1; i < windows.size(); ++i) EXPECT_LE(windows[i], windows[i - 1]) << "window " << i;
  EXPECT_LT(windows.back(), 0.05 * windows.front());
}
