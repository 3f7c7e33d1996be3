#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "oracles.hpp"
#include "savers/grad_check.hpp"
#include "savers/ops.hpp"
#include "savers/rng.hpp"

using namespace savers;

namespace {

TEST(Tensor, InvariantsEnforced) {
  EXPECT_THROW(Tensor({0, 3}), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6);
  EXPECT_TRUE(t.all_finite());
}

TEST(Conv2d, IdentityKernel) {
  Tensor input({1, 1, 1}, {5.0});
  Tensor kernel({1, 1, 1, 1}, {1.0});
  Tensor bias({1});
  Tensor out = conv2d(input, kernel, bias, make_conv_spec(1, 1, 1, 0));
  ASSERT_EQ(out.size(), 1);
  EXPECT_DOUBLE_EQ(out[0], 5.0);
}

TEST(Conv2d, OnesCountOverlap) {
  Tensor input = Tensor::full({1, 3, 3}, 1.0);
  Tensor kernel = Tensor::full({1, 1, 3, 3}, 1.0);
  Tensor bias({1});
  Tensor out = conv2d(input, kernel, bias, make_conv_spec(3, 3, 1, 1));
  EXPECT_DOUBLE_EQ(out.at(0, 1, 1), 9.0);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 0), 4.0);
  EXPECT_DOUBLE_EQ(out.at(0, 2, 2), 4.0);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 1), 6.0);
}

TEST(Conv2d, MatchesNaiveOracle) {
  Rng rng(7);
  Tensor input = oracles::random_tensor({2, 5, 5}, rng);
  Tensor kernels = oracles::random_tensor({3, 2, 3, 3}, rng);
  Tensor bias = oracles::random_tensor({3}, rng);
  const ConvSpec spec = make_conv_spec(3, 3, 1, 1);
  Tensor got = conv2d(input, kernels, bias, spec);
  Tensor want = oracles::naive_conv2d(input, kernels, bias, spec);
  ASSERT_TRUE(got.same_shape(want));
  for (std::int64_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

// Exhaustive randomized sweep over shapes up to 3x8x8 and kernels up
// to 4x4, including strides and asymmetric padding.
TEST(Conv2d, OracleSweep50Cases) {
  Rng rng(1234);
  for (int k = 0; k < 50; ++k) {
    const std::int64_t C = 1 + rng.uniform_int(3);
    const std::int64_t H = 1 + rng.uniform_int(8);
    const std::int64_t W = 1 + rng.uniform_int(8);
    const std::int64_t F = 1 + rng.uniform_int(3);
    const std::int64_t kh = 1 + rng.uniform_int(std::min<std::int64_t>(4, H));
    const std::int64_t kw = 1 + rng.uniform_int(std::min<std::int64_t>(4, W));
    const std::int64_t stride = 1 + rng.uniform_int(2);
    ConvSpec spec{kh, kw, stride, rng.uniform_int(2), rng.uniform_int(3),
                  rng.uniform_int(2), rng.uniform_int(3)};
    Tensor input = oracles::random_tensor({C, H, W}, rng);
    Tensor kernels = oracles::random_tensor({F, C, kh, kw}, rng);
    Tensor bias = oracles::random_tensor({F}, rng);
    Tensor got = conv2d(input, kernels, bias, spec);
    Tensor want = oracles::naive_conv2d(input, kernels, bias, spec);
    ASSERT_TRUE(got.same_shape(want));
    for (std::int64_t i = 0; i < got.size(); ++i) {
      ASSERT_NEAR(got[i], want[i], 1e-12) << "case " << k;
    }
    ASSERT_TRUE(got.all_finite());
  }
}

TEST(Conv2d, ShapeMismatchNamesBothShapes) {
  Tensor input({2, 4, 4});
  Tensor kernels({1, 3, 3, 3});
  Tensor bias({1});
  try {
    conv2d(input, kernels, bias, make_conv_spec(3, 3, 1, 1));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2,4,4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[1,3,3,3]"), std::string::npos) << msg;
  }
}

TEST(Conv2dBackward, ZeroCotangent) {
  Rng rng(3);
  Tensor input = oracles::random_tensor({2, 4, 4}, rng);
  Tensor kernels = oracles::random_tensor({2, 2, 3, 3}, rng);
  const ConvSpec spec = make_conv_spec(3, 3, 1, 1);
  Tensor grad_out({2, 4, 4});
  ConvGrads g = conv2d_backward(grad_out, input, kernels, spec);
  for (std::int64_t i = 0; i < g.grad_input.size(); ++i) {
    EXPECT_DOUBLE_EQ(g.grad_input[i], 0.0);
  }
  for (std::int64_t i = 0; i < g.grad_kernels.size(); ++i) {
    EXPECT_DOUBLE_EQ(g.grad_kernels[i], 0.0);
  }
  EXPECT_DOUBLE_EQ(g.grad_bias[0], 0.0);
}

TEST(Conv2dBackward, IdentityMapPassesGradThrough) {
  Tensor input({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor kernel({1, 1, 1, 1}, {1.0});
  Tensor grad_out({1, 3, 3}, {9, 8, 7, 6, 5, 4, 3, 2, 1});
  ConvGrads g = conv2d_backward(grad_out, input, kernel,
                                make_conv_spec(1, 1, 1, 0));
  for (std::int64_t i = 0; i < grad_out.size(); ++i) {
    EXPECT_DOUBLE_EQ(g.grad_input[i], grad_out[i]);
  }
}

TEST(Conv2dBackward, FiniteDifferenceAgreement) {
  Rng rng(11);
  Tensor input = oracles::random_tensor({2, 5, 5}, rng);
  Tensor kernels = oracles::random_tensor({3, 2, 3, 3}, rng);
  Tensor bias = oracles::random_tensor({3}, rng);
  const ConvSpec spec = make_conv_spec(3, 3, 1, 1);

  Tensor out = conv2d(input, kernels, bias, spec);
  Tensor ones = Tensor::full(out.shape(), 1.0);
  ConvGrads g = conv2d_backward(ones, input, kernels, spec);

  auto forward = [&](const std::vector<Tensor>& in) {
    Tensor o = conv2d(in[0], in[1], in[2], spec);
    double s = 0.0;
    for (std::int64_t i = 0; i < o.size(); ++i) s += o[i];
    return s;
  };
  GradCheckReport report =
      grad_check(forward, {input, kernels, bias},
                 {g.grad_input, g.grad_kernels, g.grad_bias}, 1e-5, 1e-6);
  EXPECT_TRUE(report.pass) << "max rel error " << report.max_rel_error;
}

TEST(MaxPool2, MaxOfFour) {
  Tensor input({1, 2, 2}, {1, 2, 3, 4});
  MaxPoolResult r = maxpool2(input);
  ASSERT_EQ(r.output.size(), 1);
  EXPECT_DOUBLE_EQ(r.output[0], 4.0);
  EXPECT_EQ(r.argmax[0], 3);  // position (1,1)
}

TEST(MaxPool2, TieBreaksToFirstInScanOrder) {
  Tensor input = Tensor::full({1, 4, 4}, 2.5);
  MaxPoolResult r = maxpool2(input);
  for (std::int64_t i = 0; i < r.output.size(); ++i) {
    EXPECT_DOUBLE_EQ(r.output[i], 2.5);
  }
  EXPECT_EQ(r.argmax[0], 0);  // window origin (0,0)
  EXPECT_EQ(r.argmax[1], 2);
  EXPECT_EQ(r.argmax[2], 8);
}

TEST(MaxPool2, MatchesPerWindowOracle) {
  Rng rng(5);
  Tensor input = oracles::random_tensor({1, 8, 8}, rng);
  MaxPoolResult r = maxpool2(input);
  for (std::int64_t oy = 0; oy < 4; ++oy) {
    for (std::int64_t ox = 0; ox < 4; ++ox) {
      double want = input.at(0, oy * 2, ox * 2);
      want = std::max(want, input.at(0, oy * 2, ox * 2 + 1));
      want = std::max(want, input.at(0, oy * 2 + 1, ox * 2));
      want = std::max(want, input.at(0, oy * 2 + 1, ox * 2 + 1));
      EXPECT_DOUBLE_EQ(r.output.at(0, oy, ox), want);
    }
  }
}

TEST(MaxPool2, OddExtentRejected) {
  EXPECT_THROW(maxpool2(Tensor({1, 3, 4})), DimensionError);
  EXPECT_THROW(maxpool2(Tensor({1, 4, 5})), DimensionError);
}

TEST(MaxPool2Backward, RoutesToArgmaxOnly) {
  Tensor input({1, 2, 2}, {1, 2, 3, 4});
  MaxPoolResult r = maxpool2(input);
  Tensor grad_out({1, 1, 1}, {1.0});
  Tensor grad_in = maxpool2_backward(grad_out, r.argmax, input.shape());
  EXPECT_DOUBLE_EQ(grad_in[0], 0.0);
  EXPECT_DOUBLE_EQ(grad_in[1], 0.0);
  EXPECT_DOUBLE_EQ(grad_in[2], 0.0);
  EXPECT_DOUBLE_EQ(grad_in[3], 1.0);
}

TEST(MaxPool2Backward, ZeroGradGivesZero) {
  Rng rng(9);
  Tensor input = oracles::random_tensor({2, 4, 4}, rng);
  MaxPoolResult r = maxpool2(input);
  Tensor grad_in =
      maxpool2_backward(Tensor({2, 2, 2}), r.argmax, input.shape());
  for (std::int64_t i = 0; i < grad_in.size(); ++i) {
    EXPECT_DOUBLE_EQ(grad_in[i], 0.0);
  }
}

TEST(MaxPool2Backward, CorruptIndicesRejected) {
  Tensor grad_out({1, 1, 1}, {1.0});
  std::vector<std::int64_t> bad{99};
  EXPECT_THROW(maxpool2_backward(grad_out, bad, {1, 2, 2}), CorruptionError);
}

TEST(MaxPool2Backward, FiniteDifferenceAwayFromTies) {
  Rng rng(13);
  Tensor input = oracles::random_tensor({1, 4, 4}, rng);  // ties improbable
  MaxPoolResult fwd = maxpool2(input);
  Tensor ones = Tensor::full(fwd.output.shape(), 1.0);
  Tensor analytic = maxpool2_backward(ones, fwd.argmax, input.shape());
  auto forward = [&](const std::vector<Tensor>& in) {
    MaxPoolResult r = maxpool2(in[0]);
    double s = 0.0;
    for (std::int64_t i = 0; i < r.output.size(); ++i) s += r.output[i];
    return s;
  };
  GradCheckReport report =
      grad_check(forward, {input}, {analytic}, 1e-5, 1e-6);
  EXPECT_TRUE(report.pass) << "max rel error " << report.max_rel_error;
}

TEST(TransposedConv2d, KernelStamping) {
  Tensor input({1, 1, 1}, {1.0});
  Tensor kernel({1, 1, 2, 2}, {1, 2, 3, 4});
  Tensor out = transposed_conv2d(input, kernel, make_conv_spec(2, 2, 2, 0));
  ASSERT_TRUE((out.shape() == std::vector<std::int64_t>{1, 2, 2}));
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], 2.0);
  EXPECT_DOUBLE_EQ(out[2], 3.0);
  EXPECT_DOUBLE_EQ(out[3], 4.0);
}

TEST(TransposedConv2d, SixteenTimesUpsamplingShape) {
  Tensor input({1, 2, 2});
  Tensor kernel({1, 1, 32, 32});
  Tensor out = transposed_conv2d(input, kernel, make_conv_spec(32, 32, 16, 8));
  EXPECT_EQ(out.dim(1), 32);
  EXPECT_EQ(out.dim(2), 32);
}

// The transpose/adjoint identity pins transposed_conv2d to
// conv2d_backward's grad_input path.
TEST(TransposedConv2d, MatchesConvBackwardInputPath) {
  Rng rng(21);
  const ConvSpec spec = make_conv_spec(3, 3, 2, 1);
  Tensor x = oracles::random_tensor({2, 7, 7}, rng);          // conv input
  Tensor kernels = oracles::random_tensor({3, 2, 3, 3}, rng);  // [F=3,C=2]
  Tensor bias({3});
  Tensor y = conv2d(x, kernels, bias, spec);  // [3, oh, ow]
  ConvGrads g = conv2d_backward(y, x, kernels, spec);
  Tensor got = transposed_conv2d(y, kernels, spec);
  ASSERT_TRUE(got.same_shape(g.grad_input));
  for (std::int64_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i], g.grad_input[i], 1e-12);
  }
}

TEST(TransposedConv2d, AdjointIdentityHolds) {
  Rng rng(31);
  for (int k = 0; k < 10; ++k) {
    const std::int64_t C = 1 + rng.uniform_int(3);
    const std::int64_t F = 1 + rng.uniform_int(3);
    const std::int64_t kh = 1 + rng.uniform_int(4);
    const std::int64_t kw = 1 + rng.uniform_int(4);
    const std::int64_t stride = 1 + rng.uniform_int(2);
    // Derive input extents from the output grid so conv and its
    // transpose are exact inverses in shape.
    const std::int64_t pt = rng.uniform_int(kh);
    const std::int64_t pb = rng.uniform_int(kh - pt);
    const std::int64_t pl = rng.uniform_int(kw);
    const std::int64_t pr = rng.uniform_int(kw - pl);
    const std::int64_t gh = 1 + rng.uniform_int(4);
    const std::int64_t gw = 1 + rng.uniform_int(4);
    const ConvSpec spec{kh, kw, stride, pt, pb, pl, pr};
    const std::int64_t H = (gh - 1) * stride + kh - pt - pb;
    const std::int64_t W = (gw - 1) * stride + kw - pl - pr;
    Tensor x = oracles::random_tensor({C, H, W}, rng);
    Tensor kernels = oracles::random_tensor({F, C, kh, kw}, rng);
    Tensor bias({F});
    Tensor cx = conv2d(x, kernels, bias, spec);
    ASSERT_EQ(cx.dim(1), gh);
    ASSERT_EQ(cx.dim(2), gw);
    Tensor y = oracles::random_tensor(cx.shape(), rng);
    Tensor ty = transposed_conv2d(y, kernels, spec);
    ASSERT_TRUE(ty.same_shape(x));
    const double lhs = oracles::dot(cx, y);
    const double rhs = oracles::dot(x, ty);
    const double denom = std::max({std::abs(lhs), std::abs(rhs), 1e-30});
    EXPECT_LT(std::abs(lhs - rhs) / denom, 1e-10) << "case " << k;
  }
}

TEST(TransposedConv2dBackward, FiniteDifferenceAgreement) {
  Rng rng(41);
  const ConvSpec spec = make_conv_spec(4, 4, 2, 1);
  Tensor input = oracles::random_tensor({2, 3, 3}, rng);
  Tensor kernels = oracles::random_tensor({2, 2, 4, 4}, rng);
  Tensor out = transposed_conv2d(input, kernels, spec);
  Tensor ones = Tensor::full(out.shape(), 1.0);
  TransposedConvGrads g =
      transposed_conv2d_backward(ones, input, kernels, spec);
  auto forward = [&](const std::vector<Tensor>& in) {
    Tensor o = transposed_conv2d(in[0], in[1], spec);
    double s = 0.0;
    for (std::int64_t i = 0; i < o.size(); ++i) s += o[i];
    return s;
  };
  GradCheckReport report = grad_check(forward, {input, kernels},
                                      {g.grad_input, g.grad_kernels}, 1e-5,
                                      1e-6);
  EXPECT_TRUE(report.pass) << "max rel error " << report.max_rel_error;
}

TEST(Relu, ForwardAndSubgradientAtZero) {
  Tensor input({3}, {-1.0, 0.0, 2.0});
  Tensor out = relu(input);
  EXPECT_DOUBLE_EQ(out[0], 0.0);
  EXPECT_DOUBLE_EQ(out[1], 0.0);
  EXPECT_DOUBLE_EQ(out[2], 2.0);
  Tensor grad = relu_backward(Tensor({3}, {5.0, 5.0, 5.0}), input);
  EXPECT_DOUBLE_EQ(grad[0], 0.0);
  EXPECT_DOUBLE_EQ(grad[1], 0.0);  // subgradient 0 at exactly 0
  EXPECT_DOUBLE_EQ(grad[2], 5.0);
}

TEST(Relu, FiniteDifferenceAwayFromZero) {
  Rng rng(51);
  Tensor input({20});
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const double v = 0.1 + rng.uniform();
    input[i] = rng.uniform() < 0.5 ? -v : v;  // bounded away from 0
  }
  Tensor ones = Tensor::full(input.shape(), 1.0);
  Tensor analytic = relu_backward(ones, input);
  auto forward = [&](const std::vector<Tensor>& in) {
    Tensor o = relu(in[0]);
    double s = 0.0;
    for (std::int64_t i = 0; i < o.size(); ++i) s += o[i];
    return s;
  };
  GradCheckReport report = grad_check(forward, {input}, {analytic}, 1e-5, 1e-6);
  EXPECT_TRUE(report.pass) << "max rel error " << report.max_rel_error;
}

TEST(Dropout, EvalModeIsIdentity) {
  Rng rng(61);
  Tensor input = oracles::random_tensor({4, 4}, rng);
  DropoutResult r = dropout(input, 0.7, RunMode::kEval, rng);
  for (std::int64_t i = 0; i < input.size(); ++i) {
    EXPECT_DOUBLE_EQ(r.output[i], input[i]);
  }
}

TEST(Dropout, RateZeroKeepsEverything) {
  Rng rng(62);
  Tensor input = oracles::random_tensor({10}, rng);
  DropoutResult r = dropout(input, 0.0, RunMode::kTrain, rng);
  for (std::int64_t i = 0; i < input.size(); ++i) {
    EXPECT_DOUBLE_EQ(r.output[i], input[i]);
    EXPECT_DOUBLE_EQ(r.mask[i], 1.0);
  }
}

TEST(Dropout, InvalidRateRejected) {
  Rng rng(63);
  Tensor input({2});
  EXPECT_THROW(dropout(input, 1.0, RunMode::kTrain, rng), ConfigError);
  EXPECT_THROW(dropout(input, -0.1, RunMode::kTrain, rng), ConfigError);
}

// Law of large numbers on the inverted-dropout scaling: the sample
// mean of dropout(1.0) stays near 1.
TEST(Dropout, InvertedScalingPreservesMean) {
  Rng rng = Rng(64).substream("dropout");
  Tensor input = Tensor::full({100000}, 1.0);
  DropoutResult r = dropout(input, 0.5, RunMode::kTrain, rng);
  double mean = 0.0;
  for (std::int64_t i = 0; i < r.output.size(); ++i) mean += r.output[i];
  mean /= static_cast<double>(r.output.size());
  EXPECT_GT(mean, 0.98);
  EXPECT_LT(mean, 1.02);
}

TEST(Dropout, BackwardUsesMask) {
  Rng rng(65);
  Tensor input = oracles::random_tensor({50}, rng);
  DropoutResult r = dropout(input, 0.4, RunMode::kTrain, rng);
  Tensor grad_out = Tensor::full(input.shape(), 2.0);
  Tensor grad_in = dropout_backward(grad_out, r.mask);
  for (std::int64_t i = 0; i < input.size(); ++i) {
    EXPECT_DOUBLE_EQ(grad_in[i], 2.0 * r.mask[i]);
  }
}

TEST(AvgPool, MeanOfGrid) {
  Tensor input({1, 2, 2}, {1, 2, 3, 4});
  Tensor out = avgpool_global(input);
  ASSERT_EQ(out.size(), 1);
  EXPECT_DOUBLE_EQ(out[0], 2.5);
}

TEST(AvgPool, ConstantStaysConstant) {
  Tensor input = Tensor::full({3, 5, 7}, -1.25);
  Tensor out = avgpool_global(input);
  for (std::int64_t c = 0; c < 3; ++c) {
    EXPECT_DOUBLE_EQ(out[c], -1.25);
  }
}

TEST(AvgPool, MatchesSummationOracle) {
  Rng rng(71);
  Tensor input = oracles::random_tensor({3, 5, 5}, rng);
  Tensor out = avgpool_global(input);
  for (std::int64_t c = 0; c < 3; ++c) {
    double acc = 0.0;
    for (std::int64_t y = 0; y < 5; ++y) {
      for (std::int64_t x = 0; x < 5; ++x) acc += input.at(c, y, x);
    }
    EXPECT_NEAR(out[c], acc / 25.0, 1e-12);
  }
}

TEST(Softmax, UniformLogitsGiveUniformProbs) {
  Tensor logits = Tensor::full({11}, 0.37);
  Tensor probs = softmax_classes(logits);
  for (std::int64_t c = 0; c < 11; ++c) {
    EXPECT_NEAR(probs[c], 1.0 / 11.0, 1e-15);
  }
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
  Tensor logits({2}, {1000.0, 0.0});
  Tensor probs = softmax_classes(logits);
  EXPECT_TRUE(probs.all_finite());
  EXPECT_NEAR(probs[0], 1.0, 1e-12);
  EXPECT_NEAR(probs[1], 0.0, 1e-12);
}

TEST(Softmax, RatiosMatchDirectFormula) {
  Rng rng(81);
  Tensor logits = oracles::random_tensor({5, 2, 2}, rng, -3.0, 3.0);
  Tensor probs = softmax_classes(logits);
  const std::int64_t positions = 4;
  for (std::int64_t j = 0; j < positions; ++j) {
    double sum = 0.0;
    for (std::int64_t c = 0; c < 5; ++c) {
      sum += probs[c * positions + j];
      EXPECT_GT(probs[c * positions + j], 0.0);
      for (std::int64_t d = 0; d < 5; ++d) {
        const double want =
            std::exp(logits[c * positions + j] - logits[d * positions + j]);
        const double got = probs[c * positions + j] / probs[d * positions + j];
        EXPECT_NEAR(got, want, 1e-9 * want);
      }
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(GradCheck, LinearMapIsExact) {
  Rng rng(91);
  Tensor input = oracles::random_tensor({1, 4, 4}, rng);
  Tensor kernels = oracles::random_tensor({2, 1, 3, 3}, rng);
  Tensor bias({2});
  const ConvSpec spec = make_conv_spec(3, 3, 1, 1);
  Tensor ones = Tensor::full(conv2d(input, kernels, bias, spec).shape(), 1.0);
  ConvGrads g = conv2d_backward(ones, input, kernels, spec);
  auto forward = [&](const std::vector<Tensor>& in) {
    Tensor o = conv2d(in[0], kernels, bias, spec);
    double s = 0.0;
    for (std::int64_t i = 0; i < o.size(); ++i) s += o[i];
    return s;
  };
  GradCheckReport report =
      grad_check(forward, {input}, {g.grad_input}, 1e-4, 1e-9);
  EXPECT_TRUE(report.pass) << "max rel error " << report.max_rel_error;
  EXPECT_EQ(report.kink_excluded, 0);
}

TEST(GradCheck, ReluKinkIsExcludedNotFailed) {
  Tensor input({3}, {-0.5, 0.0, 0.5});
  Tensor ones = Tensor::full({3}, 1.0);
  Tensor analytic = relu_backward(ones, input);
  auto forward = [&](const std::vector<Tensor>& in) {
    Tensor o = relu(in[0]);
    return o[0] + o[1] + o[2];
  };
  auto kink = [&](std::size_t, std::int64_t i) {
    return std::abs(input[i]) < 1e-8;
  };
  GradCheckReport report =
      grad_check(forward, {input}, {analytic}, 1e-5, 1e-6, kink);
  EXPECT_TRUE(report.pass);
  EXPECT_EQ(report.kink_excluded, 1);
  EXPECT_EQ(report.components_checked, 2);
}

TEST(Determinism, SameSeedSameBits) {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor input = oracles::random_tensor({2, 6, 6}, rng);
    Tensor kernels = oracles::random_tensor({3, 2, 3, 3}, rng);
    Tensor bias = oracles::random_tensor({3}, rng);
    Tensor out = conv2d(input, kernels, bias, make_conv_spec(3, 3, 1, 1));
    Rng drop = rng.substream("dropout");
    DropoutResult d = dropout(out, 0.3, RunMode::kTrain, drop);
    return d.output;
  };
  Tensor a = run(99);
  Tensor b = run(99);
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(),
                        sizeof(double) * static_cast<std::size_t>(a.size())),
            0);
}

// Every backward op passes grad_check on random smooth points.
TEST(GradCheck, AllBackwardOpsPassAtTolerance) {
  Rng rng(101);
  for (int rep = 0; rep < 3; ++rep) {
    const std::int64_t C = 1 + rng.uniform_int(3);
    const std::int64_t F = 1 + rng.uniform_int(3);
    Tensor input = oracles::random_tensor({C, 6, 6}, rng);
    Tensor kernels = oracles::random_tensor({F, C, 3, 3}, rng);
    Tensor bias = oracles::random_tensor({F}, rng);
    const ConvSpec spec = make_conv_spec(3, 3, 1, 1);
    Tensor ones = Tensor::full({F, 6, 6}, 1.0);
    ConvGrads g = conv2d_backward(ones, input, kernels, spec);
    auto forward = [&](const std::vector<Tensor>& in) {
      Tensor o = conv2d(in[0], in[1], in[2], spec);
      double s = 0.0;
      for (std::int64_t i = 0; i < o.size(); ++i) s += o[i];
      return s;
    };
    GradCheckReport report =
        grad_check(forward, {input, kernels, bias},
                   {g.grad_input, g.grad_kernels, g.grad_bias}, 1e-5, 1e-5);
    ASSERT_TRUE(report.pass) << "rep " << rep << " err "
                             << report.max_rel_error;
  }
}

}  // namespace
