#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "sigprune/tensor.hpp"

namespace sigprune {

enum class Mode { Train, Eval };

/// Weights are (out_channels, in_channels, width) row-major; stride 1, same padding.
struct ConvParams {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t width = 1;
  std::vector<double> weight;
  std::vector<double> bias;

  std::size_t padding() const noexcept { return width / 2; }
  void validate() const;

  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct BatchNormParams {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  std::size_t channels() const noexcept { return gamma.size(); }
  static BatchNormParams identity(std::size_t channels);

  friend bool operator==(const BatchNormParams&, const BatchNormParams&) = default;
};

/// Weights are (out_features, in_features) row-major.
struct DenseParams {
  std::size_t out_features = 0;
  std::size_t in_features = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  friend bool operator==(const DenseParams&, const DenseParams&) = default;
};

struct ConvGrads {
  Tensor3 input;
  std::vector<double> weight;
  std::vector<double> bias;
};

Tensor3 conv1d_forward(const Tensor3& x, const ConvParams& p);
ConvGrads conv1d_backward(const Tensor3& x, const ConvParams& p, const Tensor3& grad_out);

/// Per-channel state kept by a batch-norm forward pass for backward and for the running-stat update.
struct BatchNormCache {
  Mode mode = Mode::Eval;
  Tensor3 xhat;
  std::vector<double> inv_std;
  std::vector<double> batch_mean;
  std::vector<double> batch_var;
};

struct BatchNormGrads {
  Tensor3 input;
  std::vector<double> gamma;
  std::vector<double> beta;
};

/// Train mode normalizes with batch statistics; eval mode with running statistics.
/// Parameters are never modified here; see batchnorm_update_running.
Tensor3 batchnorm_forward(const Tensor3& x, const BatchNormParams& p, Mode mode, BatchNormCache& cache);
BatchNormGrads batchnorm_backward(const BatchNormParams& p, const BatchNormCache& cache, const Tensor3& grad_out);
/// new = (1 - momentum) * old + momentum * batch
void batchnorm_update_running(BatchNormParams& p, const BatchNormCache& cache);

Tensor3 relu_forward(const Tensor3& x);
/// Gradient passes where the forward input was strictly positive.
Tensor3 relu_backward(const Tensor3& x, const Tensor3& grad_out);

/// Inverted dropout. The mask holds 0 or 1/(1-p) per entry; empty in eval mode or when p == 0.
struct DropoutMask {
  std::vector<double> scale;
};

Tensor3 dropout_forward(const Tensor3& x, double p, Mode mode, std::mt19937_64& rng, DropoutMask& mask);
Tensor3 dropout_backward(const DropoutMask& mask, const Tensor3& grad_out);

/// Non-overlapping windows; the odd tail is dropped. argmax holds the winning input position per output.
struct PoolCache {
  std::size_t input_length = 0;
  std::size_t width = 2;
  std::vector<std::size_t> argmax;
};

Tensor3 maxpool1d_forward(const Tensor3& x, std::size_t width, PoolCache& cache);
Tensor3 maxpool1d_backward(const PoolCache& cache, const Tensor3& grad_out);

Tensor3 gap_forward(const Tensor3& x);
Tensor3 gap_backward(std::size_t length, const Tensor3& grad_out);

/// x is (B, in_features, 1); returns (B, out_features) logits.
Matrix dense_forward(const Tensor3& x, const DenseParams& p);

struct DenseGrads {
  Tensor3 input;
  std::vector<double> weight;
  std::vector<double> bias;
};

DenseGrads dense_backward(const Tensor3& x, const DenseParams& p, const Matrix& grad_logits);

/// Row-wise, max-subtracted.
Matrix softmax(const Matrix& logits);

}  // namespace sigprune
