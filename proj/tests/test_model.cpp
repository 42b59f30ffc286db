#include <gtest/gtest.h>

#include <set>

#include "hdrunet/model.hpp"
#include "hdrunet/ops.hpp"
#include "test_util.hpp"

using namespace hdrunet;
using testutil::random_tensor;

namespace {

ModelConfig tiny() {
  ModelConfig cfg;
  cfg.base_channels = 8;
  cfg.n_res_blocks = 2;
  cfg.n_scales = 2;
  return cfg;
}

constexpr std::size_t conv(std::size_t cin, std::size_t cout, std::size_t k) { return cin * cout * k * k + cout; }

template <Real T>
Tensor<T> roll_width(const Tensor<T>& x, std::size_t shift) {
  Tensor<T> y(x.shape());
  const Shape s = x.shape();
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t h = 0; h < s.h; ++h)
        for (std::size_t w = 0; w < s.w; ++w) y.at(n, c, h, (w + shift) % s.w) = x.at(n, c, h, w);
  return y;
}

}  // namespace

TEST(ModelConfig, Validation) {
  ModelConfig cfg;
  cfg.base_channels = 6;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.base_channels = 8;
  cfg.n_scales = 1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.n_scales = 3;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.divisor(), 4u);
}

TEST(HDRUNet, DefaultConfigShapeContract) {
  HDRUNet<float> model(ModelConfig{}, 1);
  auto x = random_tensor<float>({1, 3, 64, 64}, 1, 0.0, 1.0);
  auto y = model.forward(x);
  EXPECT_EQ(y.shape(), x.shape());
  for (float v : y.data()) {
    ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(HDRUNet, IndivisibleInputNamesDivisor) {
  ModelConfig cfg = tiny();
  cfg.n_scales = 3;
  HDRUNet<float> model(cfg, 1);
  try {
    model.forward(Tensor<float>({1, 3, 18, 16}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("4"), std::string::npos) << e.what();
  }
  EXPECT_THROW(model.forward(Tensor<float>({1, 4, 16, 16})), ShapeError);
}

TEST(HDRUNet, TinyParameterCountByHand) {
  const std::size_t c = 8;
  const std::size_t base = conv(3, c, 3) + conv(c, c, 3) + 2 * 2 * conv(c, c, 3) + conv(c, 4 * c, 3) +
                           conv(2 * c, c, 3) + conv(c, c, 3) + conv(c, 3, 3);
  const std::size_t cond = conv(3, c, 3) + conv(c, c, 3) + 2 * 4 * conv(c, c, 3);
  const std::size_t weight = conv(3, c, 3) + conv(c, c, 3) + conv(c, 3, 1);
  HDRUNet<float> model(tiny(), 0);
  EXPECT_EQ(model.base_parameter_count(), base);
  EXPECT_EQ(model.condition_parameter_count(), cond);
  EXPECT_EQ(model.weighting_parameter_count(), weight);
  EXPECT_EQ(model.parameter_count(), 13758u);
  EXPECT_EQ(model.parameters().element_count(), model.parameter_count());
  EXPECT_EQ(HDRUNet<float>(tiny(), 5).parameter_count(), model.parameter_count());
}

TEST(HDRUNet, ComponentCountDeltas) {
  ModelConfig full = tiny();
  ModelConfig no_weight = full;
  no_weight.weighting_enabled = false;
  ModelConfig no_cond = full;
  no_cond.modulation = Modulation::None;
  HDRUNet<float> a(full, 0), b(no_weight, 0), c(no_cond, 0);
  EXPECT_EQ(a.parameter_count() - b.parameter_count(), a.weighting_parameter_count());
  EXPECT_EQ(a.parameter_count() - c.parameter_count(), a.condition_parameter_count());
  EXPECT_EQ(c.condition_parameter_count(), 0u);
}

TEST(HDRUNet, RegistryOrderAndUniqueness) {
  HDRUNet<float> model(tiny(), 0);
  auto reg = model.parameters();
  std::set<std::string> names;
  int stage = 0;
  for (const auto& e : reg.entries()) {
    EXPECT_TRUE(names.insert(e.name).second) << e.name;
    const int s = e.name.rfind("base.", 0) == 0 ? 0 : e.name.rfind("cond.", 0) == 0 ? 1 : 2;
    EXPECT_GE(s, stage) << e.name;
    stage = s;
  }
  EXPECT_EQ(reg.entries().front().name, "base.head.weight");
  EXPECT_EQ(reg.entries().back().name, "weight.out.bias");
}

TEST(HDRUNet, SameSeedSameWeights) {
  HDRUNet<float> a(tiny(), 9), b(tiny(), 9), c(tiny(), 10);
  auto ra = a.parameters(), rb = b.parameters(), rc = c.parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    EXPECT_EQ(ra.entries()[i].tensor->values(), rb.entries()[i].tensor->values());
    any_diff = any_diff || ra.entries()[i].tensor->values() != rc.entries()[i].tensor->values();
  }
  EXPECT_TRUE(any_diff);
}

TEST(HDRUNet, RegistryCoversExactlyTheOutputAffectingTensors) {
  HDRUNet<double> model(tiny(), 3);
  auto x = random_tensor<double>({1, 3, 8, 8}, 4, 0.0, 1.0);
  const auto y0 = model.forward(x);
  auto reg = model.parameters();
  for (const auto& e : reg.entries()) {
    const auto saved = e.tensor->values();
    for (auto& v : e.tensor->data()) v += 0.05;
    EXPECT_GT(testutil::max_abs_diff(model.forward(x), y0), 0.0) << e.name;
    std::copy(saved.begin(), saved.end(), e.tensor->data().begin());
  }
  EXPECT_EQ(testutil::max_abs_diff(model.forward(x), y0), 0.0);
}

TEST(HDRUNet, SaturatedWeightingIsIdentity) {
  HDRUNet<double> model(tiny(), 2);
  model.weighting.out.fill(0.0, 40.0);  // sigmoid(40) rounds to 1 in double
  model.base.tail.fill(0.0, 0.0);
  auto x = random_tensor<double>({2, 3, 8, 8}, 5, 0.0, 1.0);
  EXPECT_EQ(model.forward(x).values(), x.values());
}

TEST(HDRUNet, ZeroTailGivesWeightedInput) {
  HDRUNet<float> model(tiny(), 2);
  model.base.tail.fill(0.f, 0.f);
  auto x = random_tensor<float>({1, 3, 8, 8}, 6, 0.0, 1.0);
  auto w = model.weighting_forward(x);
  auto y = model.forward(x);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_FLOAT_EQ(y[i], w[i] * x[i]);
  }
}

TEST(HDRUNet, WeightingDisabledOutputIsBase) {
  ModelConfig cfg = tiny();
  cfg.weighting_enabled = false;
  HDRUNet<float> model(cfg, 2);
  auto x = random_tensor<float>({1, 3, 8, 8}, 7, 0.0, 1.0);
  auto g = model.base_forward(x, model.condition_forward(x));
  EXPECT_EQ(model.forward(x).values(), g.values());
  EXPECT_THROW(model.weighting_forward(x), ContractError);
}

TEST(HDRUNet, WeightingRange) {
  HDRUNet<float> model(tiny(), 3);
  auto x = random_tensor<float>({2, 3, 8, 8}, 8, 0.0, 1.0);
  const auto w0 = model.weighting_forward(x);
  for (float v : w0.data()) {
    EXPECT_GT(v, 0.f);
    EXPECT_LT(v, 1.f);
  }
  model.weighting.out.fill(0.f, 10.f);
  const auto w1 = model.weighting_forward(x);
  for (float v : w1.data()) {
    EXPECT_NEAR(v, 1.f, 5e-5f);
  }
}

TEST(HDRUNet, WeightingInputGradient) {
  HDRUNet<double> model(tiny(), 4);
  auto x = random_tensor<double>({1, 3, 6, 6}, 9, 0.0, 1.0);
  auto r = random_tensor<double>({1, 3, 6, 6}, 10);
  auto report = grad_check<double>([&] { return ops::sum_all(ops::mul(model.weighting_forward(x), r)); },
                                   {{"input", &x}});
  EXPECT_TRUE(report.passed()) << report.max_rel_error();
}

TEST(HDRUNet, ConditionMapWiring) {
  ModelConfig cfg = tiny();
  cfg.n_scales = 3;
  cfg.n_res_blocks = 3;
  HDRUNet<float> model(cfg, 1);
  auto maps = model.condition_forward(random_tensor<float>({2, 3, 16, 12}, 11, 0.0, 1.0));
  ASSERT_EQ(maps.size(), 3u);
  for (const auto& m : maps) {
    EXPECT_EQ(m.shape(), (Shape{2, 8, 4, 3}));
  }
  cfg.modulation = Modulation::None;
  HDRUNet<float> bare(cfg, 1);
  EXPECT_TRUE(bare.condition_forward(Tensor<float>({1, 3, 16, 16})).empty());
}

TEST(HDRUNet, ConstantInputGivesConstantConditionInterior) {
  ModelConfig cfg = tiny();
  HDRUNet<double> model(cfg, 12);
  Tensor<double> x({1, 3, 32, 32}, 0.4);
  const auto maps = model.condition_forward(x);
  const auto& m = maps.front();
  // Receptive radius: head 1 px, stride-2 down 1 px, so 3 px at full resolution.
  for (std::size_t c = 0; c < m.shape().c; ++c) {
    const double ref = m.at(0, c, 4, 4);
    for (std::size_t h = 2; h + 2 < m.shape().h; ++h)
      for (std::size_t w = 2; w + 2 < m.shape().w; ++w) EXPECT_NEAR(m.at(0, c, h, w), ref, 1e-12);
  }
}

TEST(HDRUNet, FullyConvolutional) {
  HDRUNet<float> model(tiny(), 13);
  EXPECT_EQ(model.forward(Tensor<float>({1, 3, 8, 8}, 0.5f)).shape(), (Shape{1, 3, 8, 8}));
  EXPECT_EQ(model.forward(Tensor<float>({1, 3, 16, 16}, 0.5f)).shape(), (Shape{1, 3, 16, 16}));
}

TEST(HDRUNet, TranslationCovariance) {
  HDRUNet<double> model(tiny(), 14);
  auto x = random_tensor<double>({1, 3, 16, 72}, 15, 0.0, 1.0);
  const std::size_t shift = model.config().divisor();
  auto y = model.forward(x);
  auto ys = model.forward(roll_width(x, shift));
  const std::size_t margin = 28;
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t h = 0; h < 16; ++h)
      for (std::size_t w = margin; w + margin + shift < 72; ++w)
        EXPECT_NEAR(ys.at(0, c, h, w + shift), y.at(0, c, h, w), 1e-12);
}

TEST(HDRUNet, EveryParameterReceivesGradient) {
  HDRUNet<double> model(tiny(), 16);
  auto x = random_tensor<double>({2, 3, 8, 8}, 17, 0.0, 1.0);
  auto r = random_tensor<double>({2, 3, 8, 8}, 18);
  auto reg = model.parameters();
  Tape<double> tape;
  TapeScope scope(tape);
  reg.watch(tape);
  tape.backward(ops::sum_all(ops::mul(model.forward(x), r)));
  for (const auto& e : reg.entries()) {
    bool nonzero = false;
    for (double g : e.tensor->grad()) nonzero = nonzero || g != 0.0;
    EXPECT_TRUE(nonzero) << e.name;
  }
}

TEST(Predict, DivisibleInputEqualsForward) {
  HDRUNet<float> model(tiny(), 19);
  auto x = random_tensor<float>({1, 3, 8, 8}, 20, 0.0, 1.0);
  EXPECT_EQ(predict(model, x).values(), model.forward(x).values());
}

TEST(Predict, ReflectPadsAndCropsBack) {
  ModelConfig cfg = tiny();
  cfg.n_scales = 3;
  HDRUNet<float> model(cfg, 21);
  auto x = random_tensor<float>({1, 3, 70, 70}, 22, 0.0, 1.0);
  auto y = predict(model, x);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 70, 70}));
  auto padded = reflect_pad(x, 2, 2);
  ASSERT_EQ(padded.shape(), (Shape{1, 3, 72, 72}));
  EXPECT_EQ(y.values(), crop(model.forward(padded), 0, 0, 70, 70).values());
  EXPECT_EQ(predict(model, x).values(), y.values());
}

TEST(ReflectPad, MirrorsWithoutRepeatingEdge) {
  auto x = Tensor<float>::from_data({1, 1, 2, 3}, {1, 2, 3, 4, 5, 6});
  auto y = reflect_pad(x, 1, 2);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 5}));
  EXPECT_EQ(y.values(), (std::vector<float>{1, 2, 3, 2, 1, 4, 5, 6, 5, 4, 1, 2, 3, 2, 1}));
}
