#include <gtest/gtest.h>

#include "ddcnn/rng.hpp"
#include "ddcnn/gradcheck.hpp"
#include "ddcnn/model.hpp"

using namespace ddcnn;

namespace {

Tensor4<double> random_tensor(int n, int c, int h, int w, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor4<double> t(n, c, h, w);
  Rng rng(seed);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

Block<double> block(int c_in, int c_out, int k, bool bn, bool relu, std::uint64_t seed) {
  Block<double> b;
  b.conv = ConvLayer<double>(c_in, c_out, k);
  Rng rng(seed);
  for (double& v : b.conv.weight) v = rng.uniform(-0.5, 0.5);
  for (double& v : b.conv.bias) v = rng.uniform(-0.2, 0.2);
  if (bn) {
    b.bn = BatchNormLayer<double>(c_out);
    for (double& g : b.bn->gamma) g = rng.uniform(0.5, 1.5);
    for (double& v : b.bn->beta) v = rng.uniform(-0.3, 0.3);
  }
  b.relu = relu;
  return b;
}

}  // namespace

TEST(GradCheck, SingleConvLayer) {
  Network<double> net({block(2, 3, 3, false, false, 1)});
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  opt.samples = 1000;
  opt.check_input = true;
  const auto r = grad_check(net, random_tensor(2, 2, 5, 5, 2), random_tensor(2, 3, 5, 5, 3), Mode::Train, opt);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  EXPECT_EQ(r.skipped_kinks, 0u);
  EXPECT_EQ(r.checked, 2u * 3 * 9 + 3 + 2 * 2 * 25);
}

TEST(GradCheck, ConvBnReluStack) {
  Network<double> net({block(2, 4, 3, false, true, 1), block(4, 4, 3, true, true, 2), block(4, 2, 3, false, false, 3)});
  GradCheckOptions opt;
  opt.samples = 200;
  opt.seed = 5;
  opt.check_input = true;
  const auto r = grad_check(net, random_tensor(3, 2, 6, 6, 4), random_tensor(3, 2, 6, 6, 5), Mode::Train, opt);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  EXPECT_GT(r.checked, 150u);
}

TEST(GradCheck, EvalModeBatchNorm) {
  Network<double> net({block(2, 3, 3, true, true, 7), block(3, 2, 1, false, false, 8)});
  net.blocks()[0].bn->running_mean = {0.1, -0.2, 0.05};
  net.blocks()[0].bn->running_var = {0.8, 1.3, 0.5};
  GradCheckOptions opt;
  opt.samples = 100;
  // Eval-mode traces can only be backpropagated when batch norm is absent.
  EXPECT_THROW(grad_check(net, random_tensor(1, 2, 4, 4, 1), random_tensor(1, 2, 4, 4, 2), Mode::Eval, opt), Error);
}

TEST(GradCheck, DetectsCorruptedGradient) {
  Network<double> net({block(2, 3, 3, false, true, 1), block(3, 2, 3, false, false, 2)});
  const auto x = random_tensor(2, 2, 5, 5, 3);
  const auto target = random_tensor(2, 2, 5, 5, 4);
  ForwardTrace<double> trace;
  const auto loss = mse_loss(net.forward(x, Mode::Train, &trace, false), target);
  auto grads = net.backward(trace, loss.grad);
  for (auto& g : grads)
    for (double& v : g) v *= 1.1;
  const Probe probe = [&] {
    ForwardTrace<double> t;
    const auto y = net.forward(x, Mode::Train, &t, false);
    return ProbeResult{mse_loss(y, target).loss, activation_pattern(net, t)};
  };
  auto params = net.parameters();
  GradCheckOptions opt;
  const auto r = check_gradients(params, grads, probe, opt);
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_rel_error, 0.05);
}

TEST(GradCheck, KinkCrossingsAreSkipped) {
  // One input sits exactly on the ReLU kink; perturbing it flips the pattern.
  Network<double> net({block(1, 1, 1, false, true, 1)});
  net.blocks()[0].conv.weight[0] = 1.0;
  net.blocks()[0].conv.bias[0] = 0.0;
  Tensor4<double> x(1, 1, 1, 2, std::vector<double>{0.0, 0.5});
  GradCheckOptions opt;
  opt.check_input = true;
  const auto r = grad_check(net, x, Tensor4<double>(1, 1, 1, 2), Mode::Train, opt);
  EXPECT_GE(r.skipped_kinks, 1u);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(GradCheck, FullSeventeenLayerModel) {
  ModelConfig cfg;
  cfg.layers = 17;
  cfg.hidden_channels = 64;
  DenoiserModel model = DenoiserModel::create(DistortionType::GaussianNoise, cfg, 3);
  Network<double> net = model.net.cast<double>();
  const auto x = random_tensor(2, model.channels_in(), 4, 4, 9, 0.0, 1.0);
  const auto target = random_tensor(2, model.channels_out(), 4, 4, 10, 0.0, 1.0);
  GradCheckOptions opt;
  opt.tolerance = 1e-4;
  opt.samples = 96;
  const auto r = grad_check(net, x, target, Mode::Train, opt);
  EXPECT_TRUE(r.passed) << r.max_rel_error << " checked " << r.checked;
  EXPECT_GE(r.checked, 48u);
}

TEST(Network, ParameterOrderAndCounts) {
  Network<double> net({block(2, 3, 3, false, true, 1), block(3, 3, 3, true, true, 2)});
  EXPECT_EQ(net.parameter_array_count(), 6u);
  EXPECT_EQ(net.parameter_count(), 2u * 3 * 9 + 3 + 3 * 3 * 9 + 3 + 3 + 3);
  auto p = net.parameters();
  EXPECT_EQ(p[0].data(), net.blocks()[0].conv.weight.data());
  EXPECT_EQ(p[4].data(), net.blocks()[1].bn->gamma.data());
  EXPECT_EQ(p[5].data(), net.blocks()[1].bn->beta.data());
}

TEST(Network, InferMatchesEvalForwardAndLeavesStats) {
  Network<double> net({block(2, 3, 3, true, true, 1), block(3, 1, 3, false, false, 2)});
  net.blocks()[0].bn->running_mean = {0.2, 0.1, -0.1};
  const auto x = random_tensor(2, 2, 4, 4, 3);
  const auto a = net.infer(x);
  const auto b = net.forward(x, Mode::Eval);
  EXPECT_EQ(a, b);
  EXPECT_EQ(net.blocks()[0].bn->tracked_batches, 0);
}
