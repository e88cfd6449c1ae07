#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sigprune/errors.hpp"
#include "sigprune/network.hpp"
#include "sigprune/trainer.hpp"

using namespace sigprune;

namespace {

Architecture small_arch(double dropout = 0.0) {
  Architecture a;
  a.widths = {2, 3, 4};
  a.kernel = 3;
  a.dropout = dropout;
  a.input_length = 16;
  a.classes = 3;
  return a;
}

/// Perturb BN parameters away from the identity so their gradients are exercised.
void jitter_bn(Network& net, std::mt19937_64& rng) {
  for (auto& b : net.blocks) {
    b.bn.gamma = oracle::random_vector(b.bn.gamma.size(), rng, 0.5, 1.5);
    b.bn.beta = oracle::random_vector(b.bn.beta.size(), rng, -0.5, 0.5);
  }
}

}  // namespace

TEST(Network, OutputShapesAndProbabilities) {
  const auto net = init_network(small_arch(), 1);
  std::mt19937_64 rng(2);
  const auto x = oracle::random_tensor(5, 1, 16, rng);
  const auto logits = network_forward_eval(net, x);
  EXPECT_EQ(logits.rows(), 5u);
  EXPECT_EQ(logits.cols(), 3u);
  const auto p = softmax(logits);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (double v : p.row(r)) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Network, DefaultArchitectureShapes) {
  const auto net = init_network(Architecture{}, 42);
  EXPECT_EQ(net.total_kernels(), 16u + 32u + 64u);
  EXPECT_EQ(net.blocks[1].conv.in_channels, 16u);
  EXPECT_EQ(net.blocks[2].conv.in_channels, 32u);
  EXPECT_EQ(net.dense.in_features, 64u);
  // conv (c_out*c_in*k + c_out) + bn (2*c_out) per block, dense 64*2+2
  const std::size_t expect = (16 * 1 * 5 + 16 + 32) + (32 * 16 * 5 + 32 + 64) + (64 * 32 * 5 + 64 + 128) + (64 * 2 + 2);
  EXPECT_EQ(net.parameter_count(), expect);
  const auto logits = network_forward_eval(net, Tensor3(2, 1, 178));
  EXPECT_EQ(logits.cols(), 2u);
}

TEST(Network, EvalIsBatchIndependentAndDeterministic) {
  auto net = init_network(small_arch(0.3), 3);
  std::mt19937_64 rng(4);
  jitter_bn(net, rng);
  const auto x = oracle::random_tensor(6, 1, 16, rng);
  const auto all = network_forward_eval(net, x);
  EXPECT_EQ(all, network_forward_eval(net, x));
  for (std::size_t i = 0; i < 6; ++i) {
    Tensor3 one(1, 1, 16);
    std::copy(x.row(i, 0).begin(), x.row(i, 0).end(), one.row(0, 0).begin());
    const auto single = network_forward_eval(net, one);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(single(0, k), all(i, k), 1e-12);
  }
}

TEST(Network, ForwardAndBackwardLeaveParametersUntouched) {
  auto net = init_network(small_arch(0.3), 5);
  const Network before = net;
  std::mt19937_64 rng(6);
  const auto x = oracle::random_tensor(4, 1, 16, rng);
  ForwardCache cache;
  const auto logits = network_forward(net, x, Mode::Train, rng, cache);
  const std::vector<int> labels{0, 1, 2, 0};
  const auto loss = cross_entropy(softmax(logits), labels);
  network_backward(net, cache, loss.grad_logits);
  EXPECT_EQ(net, before);
  commit_running_stats(net, cache);
  EXPECT_NE(net.blocks[0].bn.running_mean, before.blocks[0].bn.running_mean);
}

TEST(Network, EndToEndGradientMatchesFiniteDifferences) {
  for (Mode mode : {Mode::Train, Mode::Eval}) {
    auto net = init_network(small_arch(), 7);
    std::mt19937_64 rng(8);
    jitter_bn(net, rng);
    for (auto& b : net.blocks) {
      b.bn.running_mean = oracle::random_vector(b.bn.running_mean.size(), rng, -0.2, 0.2);
      b.bn.running_var = oracle::random_vector(b.bn.running_var.size(), rng, 0.5, 2.0);
    }
    const auto x = oracle::random_tensor(4, 1, 16, rng);
    const std::vector<int> labels{0, 1, 2, 1};
    auto loss = [&] {
      std::mt19937_64 r(0);
      ForwardCache c;
      return cross_entropy(softmax(network_forward(net, x, mode, r, c)), labels).loss;
    };
    std::mt19937_64 r(0);
    ForwardCache cache;
    const auto result = cross_entropy(softmax(network_forward(net, x, mode, r, cache)), labels);
    auto grads = network_backward(net, cache, result.grad_logits);
    auto gslots = gradient_slots(grads);
    auto pslots = parameter_slots(net);
    std::erase_if(pslots, [](const ParamSlot& s) { return !s.trainable; });
    ASSERT_EQ(gslots.size(), pslots.size());
    for (std::size_t s = 0; s < pslots.size(); ++s) {
      const auto fd = oracle::central_diff(pslots[s].values, loss);
      EXPECT_LT(oracle::max_rel_error(gslots[s], fd, 1e-4), 1e-3) << pslots[s].name;
    }
  }
}

TEST(Network, InitIsSeededAndWithinHeBounds) {
  const auto a = init_network(Architecture{}, 11);
  EXPECT_EQ(a, init_network(Architecture{}, 11));
  EXPECT_NE(a, init_network(Architecture{}, 12));
  for (const auto& b : a.blocks) {
    const double bound = std::sqrt(6.0 / static_cast<double>(b.conv.in_channels * b.conv.width));
    for (double w : b.conv.weight) EXPECT_LE(std::abs(w), bound);
    for (double v : b.conv.bias) EXPECT_EQ(v, 0.0);
    for (double v : b.bn.gamma) EXPECT_EQ(v, 1.0);
    for (double v : b.bn.running_var) EXPECT_EQ(v, 1.0);
  }
  const double dense_bound = std::sqrt(6.0 / 64.0);
  for (double w : a.dense.weight) EXPECT_LE(std::abs(w), dense_bound);
}

TEST(Network, RejectsNonIncreasingWidths) {
  Architecture arch;
  arch.widths = {16, 16, 64};
  try {
    init_network(arch, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
  arch.widths = {16, 32, 64};
  arch.kernel = 4;
  EXPECT_THROW(init_network(arch, 1), Error);
}

TEST(Network, ParameterSlotOrder) {
  auto net = init_network(small_arch(), 1);
  const auto slots = parameter_slots(net);
  ASSERT_EQ(slots.size(), 3u * 6u + 2u);
  EXPECT_EQ(slots[0].name, "block0.conv.weight");
  EXPECT_EQ(slots[0].shape, (std::vector<std::size_t>{2, 1, 3}));
  EXPECT_TRUE(slots[0].decay);
  EXPECT_FALSE(slots[4].trainable);
  EXPECT_EQ(slots.back().name, "dense.bias");
}
