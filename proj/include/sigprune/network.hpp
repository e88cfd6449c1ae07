#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sigprune/layers.hpp"
#include "sigprune/tensor.hpp"

namespace sigprune {

inline constexpr std::size_t kNumBlocks = 3;

/// (c1, c2, c3, k, p_drop, d, K)
struct Architecture {
  std::array<std::size_t, kNumBlocks> widths{16, 32, 64};
  std::size_t kernel = 5;
  double dropout = 0.2;
  std::size_t input_length = 178;
  std::size_t classes = 2;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Conv -> BN -> ReLU -> MaxPool -> Dropout.
struct Block {
  ConvParams conv;
  BatchNormParams bn;
  double dropout = 0.0;
  std::size_t pool_width = 2;

  friend bool operator==(const Block&, const Block&) = default;
};

/// Three blocks, global average pooling, then a dense classifier.
struct Network {
  std::array<Block, kNumBlocks> blocks;
  DenseParams dense;
  std::size_t input_length = 0;

  Architecture architecture() const;
  std::size_t classes() const noexcept { return dense.out_features; }
  std::size_t total_kernels() const noexcept;
  std::size_t parameter_count() const noexcept;
  void validate() const;

  friend bool operator==(const Network&, const Network&) = default;
};

/// He-uniform conv/dense weights, zero biases, identity batch norm. Requires c1 < c2 < c3.
Network init_network(const Architecture& arch, std::uint64_t seed);
/// As init_network but accepts any positive widths (used when re-initializing a pruned shape).
Network init_network_unchecked(const Architecture& arch, std::uint64_t seed);

struct BlockCache {
  Tensor3 input;
  Tensor3 conv_out;
  BatchNormCache bn;
  Tensor3 bn_out;
  DropoutMask dropout;
  PoolCache pool;
};

struct ForwardCache {
  Mode mode = Mode::Eval;
  std::array<BlockCache, kNumBlocks> blocks;
  Tensor3 gap_input;
  Tensor3 gap_output;
};

/// Gradient record congruent with the trainable parameters of a Network.
struct BlockGrads {
  std::vector<double> conv_weight;
  std::vector<double> conv_bias;
  std::vector<double> bn_gamma;
  std::vector<double> bn_beta;
};

struct NetworkGrads {
  std::array<BlockGrads, kNumBlocks> blocks;
  std::vector<double> dense_weight;
  std::vector<double> dense_bias;
};

/// `rng` drives dropout masks in train mode and is untouched in eval mode.
/// The network is not modified; call commit_running_stats to fold in train-mode batch statistics.
Matrix network_forward(const Network& net, const Tensor3& x, Mode mode, std::mt19937_64& rng, ForwardCache& cache);
Matrix network_forward_eval(const Network& net, const Tensor3& x);
NetworkGrads network_backward(const Network& net, const ForwardCache& cache, const Matrix& grad_logits);
void commit_running_stats(Network& net, const ForwardCache& cache);

/// One named parameter array. `decay` marks conv/dense weights for L2 regularization.
struct ParamSlot {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> values;
  bool trainable = true;
  bool decay = false;
};

/// Every stored array in canonical order (trainable ones plus batch-norm running stats).
std::vector<ParamSlot> parameter_slots(Network& net);
/// Gradient arrays in the order of the trainable entries of parameter_slots.
std::vector<std::span<double>> gradient_slots(NetworkGrads& grads);
std::vector<std::span<const double>> gradient_slots(const NetworkGrads& grads);
NetworkGrads zero_grads(const Network& net);

/// Pack a batch of dataset rows as a (B, 1, d) tensor.
Tensor3 batch_from_rows(std::span<const double> samples, std::size_t length, std::span<const std::size_t> rows);

}  // namespace sigprune
