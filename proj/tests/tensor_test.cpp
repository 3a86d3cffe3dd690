#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "transms/adam.hpp"
#include "transms/layers.hpp"

using namespace transms;
using transms::testing::random_tensor;

namespace {

// Direct quadruple loop, independent of the im2col path.
Tensor naive_conv(const Tensor& x, const Tensor& k, int stride, int pad) {
  const Index cin = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Index cout = k.dim(0), ks = k.dim(2);
  const Index ho = (h + 2 * pad - ks) / stride + 1, wo = (w + 2 * pad - ks) / stride + 1;
  Tensor out({cout, ho, wo});
  for (Index o = 0; o < cout; ++o)
    for (Index y = 0; y < ho; ++y)
      for (Index xx = 0; xx < wo; ++xx) {
        double acc = 0.0;
        for (Index c = 0; c < cin; ++c)
          for (Index i = 0; i < ks; ++i)
            for (Index j = 0; j < ks; ++j) {
              const Index iy = y * stride - pad + i, ix = xx * stride - pad + j;
              if (iy >= 0 && iy < h && ix >= 0 && ix < w) acc += k.at({o, c, i, j}) * x.at({c, iy, ix});
            }
        out.at({o, y, xx}) = acc;
      }
  return out;
}

Tensor forward(const std::function<ad::Var(ad::Tape&)>& f) {
  ad::Tape tape;
  return f(tape).value();
}

}  // namespace

TEST(Conv2d, IdentityKernelReproducesInput) {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor({1, 1, 3, 3}, rng);
  Tensor k({1, 1, 3, 3});
  k.at({0, 0, 1, 1}) = 1.0;
  Tensor y = forward([&](ad::Tape& t) { return ad::conv2d(t.constant(x), t.constant(k), {}, 1, 1); });
  EXPECT_EQ(y.shape(), x.shape());
  EXPECT_LT((y.data() - x.data()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Conv2d, ZeroInputGivesZeroOutput) {
  std::mt19937_64 rng(2);
  Tensor k = random_tensor({3, 2, 3, 3}, rng);
  Tensor y = forward([&](ad::Tape& t) { return ad::conv2d(t.constant(Tensor({1, 2, 6, 5})), t.constant(k), {}, 1, 1); });
  EXPECT_EQ(y.data().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Conv2d, MatchesNaiveLoopOracle) {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor({1, 1, 5, 5}, rng);
  Tensor k = random_tensor({2, 1, 3, 3}, rng);
  Tensor y = forward([&](ad::Tape& t) { return ad::conv2d(t.constant(x), t.constant(k), {}, 2, 1); });
  Tensor ref = naive_conv(x.reshaped({1, 5, 5}), k, 2, 1);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 3, 3}));
  EXPECT_LT((y.data() - ref.data()).cwiseAbs().maxCoeff(), 1e-12);

  Tensor x2 = random_tensor({1, 3, 7, 6}, rng);
  Tensor k2 = random_tensor({4, 3, 3, 3}, rng);
  Tensor y2 = forward([&](ad::Tape& t) { return ad::conv2d(t.constant(x2), t.constant(k2), {}, 1, 1); });
  EXPECT_LT((y2.data() - naive_conv(x2.reshaped({3, 7, 6}), k2, 1, 1).data()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Conv2d, RejectsBadShapes) {
  ad::Tape t;
  EXPECT_THROW(ad::conv2d(t.constant(Tensor({1, 2, 4, 4})), t.constant(Tensor({1, 3, 3, 3})), {}, 1, 1), ShapeError);
  EXPECT_THROW(ad::conv2d(t.constant(Tensor({1, 1, 2, 2})), t.constant(Tensor({1, 1, 5, 5})), {}, 1, 0), ShapeError);
  EXPECT_THROW(ad::conv2d(t.constant(Tensor({1, 1, 4, 4})), t.constant(Tensor({1, 1, 2, 2})), {}, 1, 0), ShapeError);
}

TEST(Primitives, SoftmaxOfZerosIsUniform) {
  Tensor y = forward([](ad::Tape& t) { return ad::softmax(t.constant(Tensor({1, 4}))); });
  for (Index i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(y[i], 0.25);
}

TEST(Primitives, SoftmaxRowsAreDistributions) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({5, 9}, rng, -30.0, 30.0);
    Tensor y = forward([&](ad::Tape& t) { return ad::softmax(t.constant(x)); });
    for (Index r = 0; r < 5; ++r) {
      EXPECT_NEAR(y.data().segment(r * 9, 9).sum(), 1.0, 1e-12);
      EXPECT_GE(y.data().segment(r * 9, 9).minCoeff(), 0.0);
    }
  }
}

TEST(Primitives, PixelShuffleMapping) {
  Tensor x = Tensor::from({1, 4, 1, 1}, {1.0, 2.0, 3.0, 4.0});
  Tensor y = forward([&](ad::Tape& t) { return ad::pixel_shuffle(t.constant(x), 2); });
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_EQ(y.at({0, 0, 0, 0}), 1.0);
  EXPECT_EQ(y.at({0, 0, 0, 1}), 2.0);
  EXPECT_EQ(y.at({0, 0, 1, 0}), 3.0);
  EXPECT_EQ(y.at({0, 0, 1, 1}), 4.0);
}

TEST(Primitives, PixelShuffleInverse) {
  std::mt19937_64 rng(5);
  for (int r : {2, 3}) {
    Tensor x = random_tensor({2, 2 * r * r, 3, 4}, rng);
    Tensor y = forward([&](ad::Tape& t) { return ad::pixel_unshuffle(ad::pixel_shuffle(t.constant(x), r), r); });
    EXPECT_EQ(y.shape(), x.shape());
    EXPECT_EQ(y.data(), x.data());
  }
  ad::Tape t;
  EXPECT_THROW(ad::pixel_shuffle(t.constant(Tensor({1, 3, 2, 2})), 2), ShapeError);
}

TEST(Primitives, LayerNormHandEvaluation) {
  Tensor y = forward([](ad::Tape& t) {
    return ad::layer_norm(t.constant(Tensor::from({1, 3}, {1, 2, 3})), t.constant(Tensor::constant({3}, 1.0)),
                          t.constant(Tensor({3})));
  });
  const double s = std::sqrt(2.0 / 3.0 + 1e-5);
  EXPECT_NEAR(y[0], -1.0 / s, 1e-15);
  EXPECT_NEAR(y[1], 0.0, 1e-15);
  EXPECT_NEAR(y[2], 1.0 / s, 1e-15);
  EXPECT_NEAR(y.data().mean(), 0.0, 1e-15);
}

TEST(Primitives, BatchNormInferenceUsesRunningStats) {
  ad::BatchNormStats stats{VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 4.0)};
  Tensor y = forward([&](ad::Tape& t) {
    return ad::batch_norm(t.constant(Tensor::constant({1, 1, 1, 2}, 3.0)), t.constant(Tensor::constant({1}, 1.0)),
                          t.constant(Tensor({1})), stats, false, 0.1, 0.0);
  });
  EXPECT_DOUBLE_EQ(y[0], 1.0);
}

TEST(Primitives, BatchNormTrainingUpdatesRunningStats) {
  ad::BatchNormStats stats{VectorXd::Zero(1), VectorXd::Ones(1)};
  forward([&](ad::Tape& t) {
    return ad::batch_norm(t.constant(Tensor::from({2, 1, 1, 1}, {1.0, 3.0})), t.constant(Tensor::constant({1}, 1.0)),
                          t.constant(Tensor({1})), stats, true);
  });
  EXPECT_NEAR(stats.running_mean[0], 0.2, 1e-15);
  // unbiased batch variance 2 -> 0.9 * 1 + 0.1 * 2
  EXPECT_NEAR(stats.running_var[0], 1.1, 1e-15);
}

TEST(Primitives, ActivationValues) {
  Tensor x = Tensor::from({3}, {-2.0, 0.0, 1.5});
  Tensor r = forward([&](ad::Tape& t) { return ad::relu(t.constant(x)); });
  Tensor l = forward([&](ad::Tape& t) { return ad::leaky_relu(t.constant(x)); });
  Tensor g = forward([&](ad::Tape& t) { return ad::gelu(t.constant(x)); });
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[2], 1.5);
  EXPECT_DOUBLE_EQ(l[0], -0.02);
  EXPECT_NEAR(g[2], 1.5 * 0.5 * (1.0 + std::erf(1.5 / std::sqrt(2.0))), 1e-15);
  EXPECT_EQ(g[1], 0.0);
}

TEST(Primitives, ConcatAlongChannels) {
  Tensor a = Tensor::from({1, 1, 1, 2}, {1, 2});
  Tensor b = Tensor::from({1, 2, 1, 2}, {3, 4, 5, 6});
  Tensor y = forward([&](ad::Tape& t) { return ad::concat({t.constant(a), t.constant(b)}, 1); });
  ASSERT_EQ(y.shape(), (Shape{1, 3, 1, 2}));
  for (Index i = 0; i < 6; ++i) EXPECT_EQ(y[i], double(i + 1));
}

TEST(Primitives, NonFiniteValuesAreSurfaced) {
  ad::Tape t;
  Tensor x = Tensor::from({2}, {1.0, std::numeric_limits<double>::infinity()});
  EXPECT_THROW(t.leaf(x), NumericError);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParameterSet p;
  p.add("w", Tensor::from({2}, {0.5, -1.0}));
  AdamState state(p, AdamSettings{});
  for (int i = 0; i < 5; ++i) adam_step(p, p.zeros_like(), state);
  EXPECT_EQ(p["w"][0], 0.5);
  EXPECT_EQ(p["w"][1], -1.0);
  EXPECT_EQ(state.step, 5);
}

TEST(Adam, ConstantGradientDescends) {
  ParameterSet p;
  p.add("w", Tensor::from({1}, {0.0}));
  ParameterSet g;
  g.add("w", Tensor::from({1}, {2.5}));
  AdamState state(p, AdamSettings{0.01});
  for (int i = 0; i < 100; ++i) adam_step(p, g, state);
  EXPECT_LT(p["w"][0], 0.0);
}

TEST(Adam, SingleStepMatchesFormula) {
  ParameterSet p;
  p.add("w", Tensor::from({1}, {1.0}));
  ParameterSet g;
  g.add("w", Tensor::from({1}, {1.0}));
  AdamSettings s;
  s.learning_rate = 0.1;
  AdamState state(p, s);
  adam_step(p, g, state);
  // m = 0.1, v = 0.001; bias corrected m_hat = 1, v_hat = 1.
  const double m_hat = 0.1 / (1.0 - 0.9), v_hat = 0.001 / (1.0 - 0.999);
  EXPECT_NEAR(p["w"][0], 1.0 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
}

TEST(Adam, HalvingSchedule) {
  EXPECT_DOUBLE_EQ(halving_schedule(1.0, 0, 100), 1.0);
  EXPECT_DOUBLE_EQ(halving_schedule(1.0, 19, 100), 1.0);
  EXPECT_DOUBLE_EQ(halving_schedule(1.0, 20, 100), 0.5);
  EXPECT_DOUBLE_EQ(halving_schedule(1.0, 99, 100), 0.0625);
  EXPECT_DOUBLE_EQ(halving_schedule(1.0, 3, 3), 0.125);
}
