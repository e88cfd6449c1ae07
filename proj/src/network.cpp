#include "sigprune/network.hpp"

#include <cmath>

#include <fmt/format.h>

#include "sigprune/errors.hpp"

namespace sigprune {

Architecture Network::architecture() const {
  Architecture arch;
  for (std::size_t b = 0; b < kNumBlocks; ++b) arch.widths[b] = blocks[b].conv.out_channels;
  arch.kernel = blocks[0].conv.width;
  arch.dropout = blocks[0].dropout;
  arch.input_length = input_length;
  arch.classes = dense.out_features;
  return arch;
}

std::size_t Network::total_kernels() const noexcept {
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.conv.out_channels;
  return total;
}

std::size_t Network::parameter_count() const noexcept {
  std::size_t total = dense.weight.size() + dense.bias.size();
  for (const auto& b : blocks) {
    total += b.conv.weight.size() + b.conv.bias.size() + b.bn.gamma.size() + b.bn.beta.size();
  }
  return total;
}

void Network::validate() const {
  std::size_t in = 1;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const auto& blk = blocks[b];
    blk.conv.validate();
    if (blk.conv.in_channels != in) {
      fail(ErrorKind::Shape, fmt::format("block {} expects {} input channels, previous block gives {}", b,
                                         blk.conv.in_channels, in));
    }
    const std::size_t c = blk.conv.out_channels;
    if (blk.bn.gamma.size() != c || blk.bn.beta.size() != c || blk.bn.running_mean.size() != c ||
        blk.bn.running_var.size() != c) {
      fail(ErrorKind::Shape, fmt::format("block {} batch norm does not have {} channels", b, c));
    }
    in = c;
  }
  if (dense.in_features != in) fail(ErrorKind::Shape, "dense input width differs from last conv width");
  if (dense.weight.size() != dense.in_features * dense.out_features || dense.bias.size() != dense.out_features) {
    fail(ErrorKind::Shape, "dense parameter sizes do not match declared shape");
  }
}

Network init_network_unchecked(const Architecture& arch, std::uint64_t seed) {
  if (arch.kernel % 2 == 0) fail(ErrorKind::Config, fmt::format("kernel width {} must be odd", arch.kernel));
  if (arch.classes < 2) fail(ErrorKind::Config, "need at least two classes");
  if (!(arch.dropout >= 0.0 && arch.dropout < 1.0)) fail(ErrorKind::Config, "dropout must lie in [0,1)");
  std::size_t len = arch.input_length;
  for (std::size_t b = 0; b < kNumBlocks; ++b) len /= 2;
  if (len < 1) fail(ErrorKind::Config, fmt::format("input length {} too short for three pooling stages", arch.input_length));

  std::mt19937_64 rng(seed);
  auto he_uniform = [&rng](std::vector<double>& w, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : w) v = dist(rng);
  };

  Network net;
  net.input_length = arch.input_length;
  std::size_t in = 1;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const std::size_t out = arch.widths[b];
    if (out < 1) fail(ErrorKind::Config, "channel widths must be positive");
    auto& blk = net.blocks[b];
    blk.conv.out_channels = out;
    blk.conv.in_channels = in;
    blk.conv.width = arch.kernel;
    blk.conv.weight.resize(out * in * arch.kernel);
    blk.conv.bias.assign(out, 0.0);
    he_uniform(blk.conv.weight, in * arch.kernel);
    blk.bn = BatchNormParams::identity(out);
    blk.dropout = arch.dropout;
    blk.pool_width = 2;
    in = out;
  }
  net.dense.out_features = arch.classes;
  net.dense.in_features = in;
  net.dense.weight.resize(arch.classes * in);
  net.dense.bias.assign(arch.classes, 0.0);
  he_uniform(net.dense.weight, in);
  return net;
}

Network init_network(const Architecture& arch, std::uint64_t seed) {
  const auto& w = arch.widths;
  if (!(w[0] < w[1] && w[1] < w[2])) {
    fail(ErrorKind::Config, fmt::format("channel widths ({},{},{}) must be strictly increasing", w[0], w[1], w[2]));
  }
  return init_network_unchecked(arch, seed);
}

Matrix network_forward(const Network& net, const Tensor3& x, Mode mode, std::mt19937_64& rng, ForwardCache& cache) {
  if (x.channels() != 1 || x.length() != net.input_length) {
    fail(ErrorKind::Shape, fmt::format("network expects (B,1,{}) input, got (B,{},{})", net.input_length, x.channels(),
                                       x.length()));
  }
  cache.mode = mode;
  Tensor3 h = x;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const auto& blk = net.blocks[b];
    auto& bc = cache.blocks[b];
    bc.input = std::move(h);
    bc.conv_out = conv1d_forward(bc.input, blk.conv);
    bc.bn_out = batchnorm_forward(bc.conv_out, blk.bn, mode, bc.bn);
    Tensor3 act = relu_forward(bc.bn_out);
    Tensor3 pooled = maxpool1d_forward(act, blk.pool_width, bc.pool);
    h = dropout_forward(pooled, blk.dropout, mode, rng, bc.dropout);
  }
  cache.gap_input = std::move(h);
  cache.gap_output = gap_forward(cache.gap_input);
  return dense_forward(cache.gap_output, net.dense);
}

Matrix network_forward_eval(const Network& net, const Tensor3& x) {
  std::mt19937_64 unused(0);
  ForwardCache cache;
  return network_forward(net, x, Mode::Eval, unused, cache);
}

NetworkGrads network_backward(const Network& net, const ForwardCache& cache, const Matrix& grad_logits) {
  NetworkGrads grads;
  auto dense = dense_backward(cache.gap_output, net.dense, grad_logits);
  grads.dense_weight = std::move(dense.weight);
  grads.dense_bias = std::move(dense.bias);
  Tensor3 g = gap_backward(cache.gap_input.length(), dense.input);
  for (std::size_t b = kNumBlocks; b-- > 0;) {
    const auto& blk = net.blocks[b];
    const auto& bc = cache.blocks[b];
    g = dropout_backward(bc.dropout, g);
    g = maxpool1d_backward(bc.pool, g);
    g = relu_backward(bc.bn_out, g);
    auto bn = batchnorm_backward(blk.bn, bc.bn, g);
    auto conv = conv1d_backward(bc.input, blk.conv, bn.input);
    grads.blocks[b] = {std::move(conv.weight), std::move(conv.bias), std::move(bn.gamma), std::move(bn.beta)};
    g = std::move(conv.input);
  }
  return grads;
}

void commit_running_stats(Network& net, const ForwardCache& cache) {
  if (cache.mode != Mode::Train) return;
  for (std::size_t b = 0; b < kNumBlocks; ++b) batchnorm_update_running(net.blocks[b].bn, cache.blocks[b].bn);
}

std::vector<ParamSlot> parameter_slots(Network& net) {
  std::vector<ParamSlot> slots;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    auto& blk = net.blocks[b];
    const std::size_t c = blk.conv.out_channels;
    const auto prefix = fmt::format("block{}.", b);
    slots.push_back({prefix + "conv.weight", {c, blk.conv.in_channels, blk.conv.width}, blk.conv.weight, true, true});
    slots.push_back({prefix + "conv.bias", {c}, blk.conv.bias, true, false});
    slots.push_back({prefix + "bn.gamma", {c}, blk.bn.gamma, true, false});
    slots.push_back({prefix + "bn.beta", {c}, blk.bn.beta, true, false});
    slots.push_back({prefix + "bn.running_mean", {c}, blk.bn.running_mean, false, false});
    slots.push_back({prefix + "bn.running_var", {c}, blk.bn.running_var, false, false});
  }
  slots.push_back({"dense.weight", {net.dense.out_features, net.dense.in_features}, net.dense.weight, true, true});
  slots.push_back({"dense.bias", {net.dense.out_features}, net.dense.bias, true, false});
  return slots;
}

std::vector<std::span<double>> gradient_slots(NetworkGrads& grads) {
  std::vector<std::span<double>> slots;
  for (auto& b : grads.blocks) {
    slots.emplace_back(b.conv_weight);
    slots.emplace_back(b.conv_bias);
    slots.emplace_back(b.bn_gamma);
    slots.emplace_back(b.bn_beta);
  }
  slots.emplace_back(grads.dense_weight);
  slots.emplace_back(grads.dense_bias);
  return slots;
}

std::vector<std::span<const double>> gradient_slots(const NetworkGrads& grads) {
  std::vector<std::span<const double>> slots;
  for (const auto& b : grads.blocks) {
    slots.emplace_back(b.conv_weight);
    slots.emplace_back(b.conv_bias);
    slots.emplace_back(b.bn_gamma);
    slots.emplace_back(b.bn_beta);
  }
  slots.emplace_back(grads.dense_weight);
  slots.emplace_back(grads.dense_bias);
  return slots;
}

NetworkGrads zero_grads(const Network& net) {
  NetworkGrads g;
  for (std::size_t b = 0; b < kNumBlocks; ++b) {
    const auto& blk = net.blocks[b];
    g.blocks[b] = {std::vector<double>(blk.conv.weight.size(), 0.0), std::vector<double>(blk.conv.bias.size(), 0.0),
                   std::vector<double>(blk.bn.gamma.size(), 0.0), std::vector<double>(blk.bn.beta.size(), 0.0)};
  }
  g.dense_weight.assign(net.dense.weight.size(), 0.0);
  g.dense_bias.assign(net.dense.bias.size(), 0.0);
  return g;
}

Tensor3 batch_from_rows(std::span<const double> samples, std::size_t length, std::span<const std::size_t> rows) {
  Tensor3 x(rows.size(), 1, length);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = samples.data() + rows[i] * length;
    std::copy(src, src + length, x.row(i, 0).begin());
  }
  return x;
}

}  // namespace sigprune
