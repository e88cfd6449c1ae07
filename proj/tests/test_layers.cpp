#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sigprune/errors.hpp"
#include "sigprune/layers.hpp"

using namespace sigprune;

namespace {

Tensor3 tensor(std::size_t b, std::size_t c, std::size_t l, std::vector<double> values) {
  Tensor3 t(b, c, l);
  std::copy(values.begin(), values.end(), t.data().begin());
  return t;
}

std::vector<double> as_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

ConvParams random_conv(std::size_t cout, std::size_t cin, std::size_t k, std::mt19937_64& rng) {
  ConvParams p{cout, cin, k, oracle::random_vector(cout * cin * k, rng), oracle::random_vector(cout, rng)};
  return p;
}

/// Scalar probe: sum of output * fixed random weights, so its gradient w.r.t. the output is `probe`.
double probe_dot(std::span<const double> out, std::span<const double> probe) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * probe[i];
  return s;
}

}  // namespace

TEST(Conv1d, IdentityAndCentredDeltaKernels) {
  const auto x = tensor(1, 1, 3, {1, 2, 3});
  const auto a = conv1d_forward(x, {1, 1, 1, {1.0}, {0.0}});
  const auto b = conv1d_forward(x, {1, 1, 3, {0.0, 1.0, 0.0}, {0.0}});
  EXPECT_EQ(as_vector(a.data()), (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(as_vector(b.data()), (std::vector<double>{1, 2, 3}));
}

TEST(Conv1d, MatchesQuintupleLoop) {
  std::mt19937_64 rng(4);
  const auto x = oracle::random_tensor(2, 3, 16, rng);
  const auto p = random_conv(4, 3, 5, rng);
  const auto y = conv1d_forward(x, p);
  const auto expect = oracle::naive_conv(as_vector(x.data()), 2, 3, 16, p.weight, 4, 5, p.bias);
  EXPECT_LT(oracle::max_abs_diff(y.data(), expect), 1e-10);
}

TEST(Conv1d, ChannelMismatchIsShapeError) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(conv1d_forward(Tensor3(1, 2, 4), random_conv(3, 1, 3, rng)), Error);
}

TEST(Conv1d, BackwardZeroAndIdentityCases) {
  std::mt19937_64 rng(5);
  const auto x = oracle::random_tensor(2, 3, 9, rng);
  const auto p = random_conv(2, 3, 3, rng);
  const auto zero = conv1d_backward(x, p, Tensor3(2, 2, 9));
  for (double v : zero.input.data()) EXPECT_EQ(v, 0.0);
  for (double v : zero.weight) EXPECT_EQ(v, 0.0);
  for (double v : zero.bias) EXPECT_EQ(v, 0.0);

  const auto x1 = oracle::random_tensor(2, 1, 7, rng);
  const auto g = oracle::random_tensor(2, 1, 7, rng);
  const auto id = conv1d_backward(x1, {1, 1, 1, {1.0}, {0.0}}, g);
  EXPECT_EQ(id.input, g);
}

TEST(Conv1d, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  auto x = oracle::random_tensor(2, 3, 10, rng);
  auto p = random_conv(4, 3, 5, rng);
  const auto probe = oracle::random_vector(2 * 4 * 10, rng);
  auto loss = [&] { return probe_dot(conv1d_forward(x, p).data(), probe); };
  Tensor3 g(2, 4, 10);
  std::copy(probe.begin(), probe.end(), g.data().begin());
  const auto grads = conv1d_backward(x, p, g);
  EXPECT_LT(oracle::max_rel_error(grads.input.data(), oracle::central_diff(x.data(), loss)), 1e-4);
  EXPECT_LT(oracle::max_rel_error(grads.weight, oracle::central_diff(p.weight, loss)), 1e-4);
  EXPECT_LT(oracle::max_rel_error(grads.bias, oracle::central_diff(p.bias, loss)), 1e-4);
  // bias gradient is the plain sum of the output gradient
  for (std::size_t j = 0; j < 4; ++j) {
    double s = 0.0;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t t = 0; t < 10; ++t) s += g(n, j, t);
    EXPECT_NEAR(grads.bias[j], s, 1e-12);
  }
}

TEST(BatchNorm, NormalizedBatchIsFixedPoint) {
  auto x = tensor(2, 1, 2, {1.0, -1.0, 1.0, -1.0});
  BatchNormCache cache;
  auto p = BatchNormParams::identity(1);
  p.eps = 1e-12;
  const auto y = batchnorm_forward(x, p, Mode::Train, cache);
  EXPECT_LT(oracle::max_abs_diff(y.data(), x.data()), 1e-6);
}

TEST(BatchNorm, ConstantChannelMapsToBeta) {
  auto p = BatchNormParams::identity(2);
  p.beta = {0.25, -3.0};
  auto x = tensor(2, 2, 3, {7, 7, 7, 1, 2, 3, 7, 7, 7, 4, 5, 6});
  BatchNormCache cache;
  const auto y = batchnorm_forward(x, p, Mode::Train, cache);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t t = 0; t < 3; ++t) EXPECT_DOUBLE_EQ(y(n, 0, t), 0.25);
}

TEST(BatchNorm, RunningStatsUseMomentumAndEvalUsesThem) {
  auto p = BatchNormParams::identity(1);
  p.momentum = 0.25;
  const auto x = tensor(1, 1, 4, {1, 2, 3, 6});  // mean 3, population var 3.5
  BatchNormCache cache;
  batchnorm_forward(x, p, Mode::Train, cache);
  batchnorm_update_running(p, cache);
  EXPECT_DOUBLE_EQ(p.running_mean[0], 0.75 * 0.0 + 0.25 * 3.0);
  EXPECT_DOUBLE_EQ(p.running_var[0], 0.75 * 1.0 + 0.25 * 3.5);

  BatchNormCache eval_cache;
  const auto y = batchnorm_forward(x, p, Mode::Eval, eval_cache);
  const double inv = 1.0 / std::sqrt(p.running_var[0] + p.eps);
  EXPECT_DOUBLE_EQ(y(0, 0, 3), (6.0 - p.running_mean[0]) * inv);
}

TEST(BatchNorm, TrainModeNeedsTwoValues) {
  BatchNormCache cache;
  try {
    batchnorm_forward(Tensor3(1, 1, 1), BatchNormParams::identity(1), Mode::Train, cache);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateBatch);
  }
}

TEST(BatchNorm, BackwardMatchesFiniteDifferencesInBothModes) {
  std::mt19937_64 rng(8);
  for (Mode mode : {Mode::Train, Mode::Eval}) {
    auto x = oracle::random_tensor(3, 4, 6, rng);
    auto p = BatchNormParams::identity(4);
    p.gamma = oracle::random_vector(4, rng, 0.5, 1.5);
    p.beta = oracle::random_vector(4, rng);
    p.running_mean = oracle::random_vector(4, rng);
    p.running_var = oracle::random_vector(4, rng, 0.5, 2.0);
    const auto probe = oracle::random_vector(x.size(), rng);
    auto loss = [&] {
      BatchNormCache c;
      return probe_dot(batchnorm_forward(x, p, mode, c).data(), probe);
    };
    BatchNormCache cache;
    batchnorm_forward(x, p, mode, cache);
    Tensor3 g(3, 4, 6);
    std::copy(probe.begin(), probe.end(), g.data().begin());
    const auto grads = batchnorm_backward(p, cache, g);
    EXPECT_LT(oracle::max_rel_error(grads.input.data(), oracle::central_diff(x.data(), loss)), 1e-3);
    EXPECT_LT(oracle::max_rel_error(grads.gamma, oracle::central_diff(p.gamma, loss)), 1e-3);
    EXPECT_LT(oracle::max_rel_error(grads.beta, oracle::central_diff(p.beta, loss)), 1e-3);
  }
}

TEST(Relu, ForwardAndBackward) {
  const auto x = tensor(1, 1, 3, {-1, 0, 2});
  EXPECT_EQ(as_vector(relu_forward(x).data()), (std::vector<double>{0, 0, 2}));
  const auto pos = tensor(1, 1, 3, {0, 1, 5});
  EXPECT_EQ(relu_forward(pos), pos);
  const auto g = relu_backward(x, tensor(1, 1, 3, {1, 1, 1}));
  EXPECT_EQ(as_vector(g.data()), (std::vector<double>{0, 0, 1}));  // subgradient 0 at 0
}

TEST(Relu, BackwardMatchesFiniteDifferencesAwayFromZero) {
  std::mt19937_64 rng(12);
  auto x = oracle::random_tensor(2, 3, 8, rng);
  for (double& v : x.data())
    if (std::abs(v) < 1e-3) v = 0.5;
  const auto probe = oracle::random_vector(x.size(), rng);
  auto loss = [&] { return probe_dot(relu_forward(x).data(), probe); };
  Tensor3 g(2, 3, 8);
  std::copy(probe.begin(), probe.end(), g.data().begin());
  EXPECT_LT(oracle::max_abs_diff(relu_backward(x, g).data(), oracle::central_diff(x.data(), loss)), 1e-6);
}

TEST(Dropout, ZeroRateAndEvalModeAreIdentity) {
  std::mt19937_64 rng(1);
  const auto x = oracle::random_tensor(2, 2, 5, rng);
  DropoutMask mask;
  EXPECT_EQ(dropout_forward(x, 0.0, Mode::Train, rng, mask), x);
  EXPECT_EQ(dropout_forward(x, 0.7, Mode::Eval, rng, mask), x);
  EXPECT_TRUE(mask.scale.empty());
  EXPECT_THROW(dropout_forward(x, 1.0, Mode::Train, rng, mask), Error);
}

TEST(Dropout, MonteCarloSurvivalAndMean) {
  std::mt19937_64 rng(2024);
  Tensor3 x(1, 1, 1'000'000, 1.0);
  DropoutMask mask;
  const auto y = dropout_forward(x, 0.5, Mode::Train, rng, mask);
  std::size_t survivors = 0;
  double mean = 0.0;
  for (double v : y.data()) {
    survivors += v != 0.0;
    mean += v;
  }
  mean /= static_cast<double>(y.size());
  EXPECT_NEAR(static_cast<double>(survivors) / 1e6, 0.5, 0.002);
  EXPECT_NEAR(mean, 1.0, 0.005);
  // backward reuses the cached mask
  const auto g = dropout_backward(mask, x);
  EXPECT_EQ(g, y);
}

TEST(Dropout, MaskIsSeedDeterministic) {
  const Tensor3 x(2, 3, 50, 1.0);
  std::mt19937_64 a(5), b(5);
  DropoutMask ma, mb;
  EXPECT_EQ(dropout_forward(x, 0.3, Mode::Train, a, ma), dropout_forward(x, 0.3, Mode::Train, b, mb));
}

TEST(MaxPool, WindowsTruncationAndTies) {
  PoolCache cache;
  const auto y = maxpool1d_forward(tensor(1, 1, 4, {1, 3, 2, 0}), 2, cache);
  EXPECT_EQ(as_vector(y.data()), (std::vector<double>{3, 2}));
  EXPECT_EQ(maxpool1d_forward(Tensor3(1, 1, 5), 2, cache).length(), 2u);

  const auto tie = tensor(1, 1, 2, {4, 4});
  maxpool1d_forward(tie, 2, cache);
  const auto g = maxpool1d_backward(cache, tensor(1, 1, 1, {1.0}));
  EXPECT_EQ(as_vector(g.data()), (std::vector<double>{1.0, 0.0}));
}

TEST(MaxPool, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(21);
  auto x = oracle::random_tensor(2, 3, 9, rng);  // continuous draws: no ties
  const auto probe = oracle::random_vector(2 * 3 * 4, rng);
  auto loss = [&] {
    PoolCache c;
    return probe_dot(maxpool1d_forward(x, 2, c).data(), probe);
  };
  PoolCache cache;
  maxpool1d_forward(x, 2, cache);
  Tensor3 g(2, 3, 4);
  std::copy(probe.begin(), probe.end(), g.data().begin());
  EXPECT_LT(oracle::max_abs_diff(maxpool1d_backward(cache, g).data(), oracle::central_diff(x.data(), loss)), 1e-6);
}

TEST(Gap, MeanAndUniformGradient) {
  EXPECT_DOUBLE_EQ(gap_forward(tensor(1, 1, 2, {1, 3}))(0, 0, 0), 2.0);
  EXPECT_DOUBLE_EQ(gap_forward(Tensor3(1, 1, 7, 4.5))(0, 0, 0), 4.5);
  const auto g = gap_backward(4, tensor(1, 2, 1, {2.0, -1.0}));
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(g(0, 0, t), 0.5);
    EXPECT_EQ(g(0, 1, t), -0.25);
  }
  std::mt19937_64 rng(3);
  auto x = oracle::random_tensor(2, 2, 6, rng);
  const auto probe = oracle::random_vector(4, rng);
  auto loss = [&] { return probe_dot(gap_forward(x).data(), probe); };
  Tensor3 go(2, 2, 1);
  std::copy(probe.begin(), probe.end(), go.data().begin());
  EXPECT_LT(oracle::max_abs_diff(gap_backward(6, go).data(), oracle::central_diff(x.data(), loss)), 1e-9);
}

TEST(Dense, IdentityAndBiasOnly) {
  const auto x = tensor(1, 3, 1, {1.5, -2.0, 4.0});
  const DenseParams id{3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 0, 0}};
  EXPECT_EQ(as_vector(dense_forward(x, id).data()), (std::vector<double>{1.5, -2.0, 4.0}));
  const DenseParams affine{2, 3, {1, 2, 3, 4, 5, 6}, {0.5, -0.5}};
  EXPECT_EQ(as_vector(dense_forward(Tensor3(1, 3, 1), affine).data()), (std::vector<double>{0.5, -0.5}));
  EXPECT_THROW(dense_forward(Tensor3(1, 2, 1), affine), Error);
}

TEST(Dense, BackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(31);
  auto x = oracle::random_tensor(3, 5, 1, rng);
  DenseParams p{4, 5, oracle::random_vector(20, rng), oracle::random_vector(4, rng)};
  const auto probe = oracle::random_vector(12, rng);
  auto loss = [&] { return probe_dot(dense_forward(x, p).data(), probe); };
  Matrix g(3, 4);
  std::copy(probe.begin(), probe.end(), g.data().begin());
  const auto grads = dense_backward(x, p, g);
  EXPECT_LT(oracle::max_rel_error(grads.input.data(), oracle::central_diff(x.data(), loss)), 1e-5);
  EXPECT_LT(oracle::max_rel_error(grads.weight, oracle::central_diff(p.weight, loss)), 1e-5);
  EXPECT_LT(oracle::max_rel_error(grads.bias, oracle::central_diff(p.bias, loss)), 1e-5);
}

TEST(Softmax, UniformShiftInvariantAndStable) {
  const auto uniform = softmax(Matrix(1, 4, 0.0));
  for (double v : uniform.data()) EXPECT_DOUBLE_EQ(v, 0.25);

  std::mt19937_64 rng(8);
  Matrix r(5, 6);
  for (double& v : r.data()) v = std::normal_distribution<double>(0, 3)(rng);
  Matrix shifted = r;
  for (double& v : shifted.data()) v += 17.0;
  const auto a = softmax(r);
  const auto b = softmax(shifted);
  EXPECT_LT(oracle::max_abs_diff(a.data(), b.data()), 1e-12);
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }

  Matrix big(1, 2);
  big(0, 0) = 1000.0;
  const auto p = softmax(big);
  // exact value 1/(1+e^-1000): 1 to double precision; e^-1000 ~ 5.1e-435 underflows to 0
  EXPECT_EQ(p(0, 0), 1.0);
  EXPECT_EQ(p(0, 1), 0.0);
  EXPECT_TRUE(std::isfinite(p(0, 0)));
}
