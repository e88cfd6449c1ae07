#include "sigprune/layers.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sigprune/errors.hpp"
#include "sigprune/kernels.hpp"

namespace sigprune {

namespace {

kernels::ConvShape conv_shape(const Tensor3& x, const ConvParams& p) {
  return {x.batch(), p.in_channels, p.out_channels, x.length(), p.width};
}

kernels::ChannelShape channel_shape(const Tensor3& x) { return {x.batch(), x.channels(), x.length()}; }

}  // namespace

void ConvParams::validate() const {
  if (out_channels < 1 || in_channels < 1) fail(ErrorKind::Config, "conv layer needs at least one channel");
  if (width % 2 == 0) fail(ErrorKind::Config, fmt::format("kernel width {} must be odd", width));
  if (weight.size() != out_channels * in_channels * width || bias.size() != out_channels) {
    fail(ErrorKind::Shape, "conv parameter sizes do not match declared shape");
  }
}

BatchNormParams BatchNormParams::identity(std::size_t channels) {
  BatchNormParams p;
  p.gamma.assign(channels, 1.0);
  p.beta.assign(channels, 0.0);
  p.running_mean.assign(channels, 0.0);
  p.running_var.assign(channels, 1.0);
  return p;
}

Tensor3 conv1d_forward(const Tensor3& x, const ConvParams& p) {
  if (x.channels() != p.in_channels) {
    fail(ErrorKind::Shape, fmt::format("conv expects {} input channels, got {}", p.in_channels, x.channels()));
  }
  Tensor3 y(x.batch(), p.out_channels, x.length());
  kernels::parallel::conv1d_forward(conv_shape(x, p), x.data(), p.weight, p.bias, y.data());
  return y;
}

ConvGrads conv1d_backward(const Tensor3& x, const ConvParams& p, const Tensor3& grad_out) {
  if (x.channels() != p.in_channels || grad_out.channels() != p.out_channels || grad_out.batch() != x.batch() ||
      grad_out.length() != x.length()) {
    fail(ErrorKind::Shape, "conv backward shapes are inconsistent with the forward pass");
  }
  ConvGrads g{Tensor3(x.batch(), x.channels(), x.length()), std::vector<double>(p.weight.size()),
              std::vector<double>(p.out_channels)};
  kernels::parallel::conv1d_backward(conv_shape(x, p), x.data(), p.weight, grad_out.data(), g.input.data(), g.weight,
                                     g.bias);
  return g;
}

Tensor3 batchnorm_forward(const Tensor3& x, const BatchNormParams& p, Mode mode, BatchNormCache& cache) {
  const std::size_t channels = x.channels();
  if (channels != p.channels()) {
    fail(ErrorKind::Shape, fmt::format("batch norm expects {} channels, got {}", p.channels(), channels));
  }
  cache.mode = mode;
  cache.inv_std.assign(channels, 0.0);
  const std::vector<double>* mean = &p.running_mean;
  if (mode == Mode::Train) {
    if (x.batch() * x.length() < 2) fail(ErrorKind::DegenerateBatch, "train-mode batch norm needs B*L >= 2");
    cache.batch_mean.assign(channels, 0.0);
    cache.batch_var.assign(channels, 0.0);
    kernels::parallel::channel_moments(channel_shape(x), x.data(), cache.batch_mean, cache.batch_var);
    for (std::size_t c = 0; c < channels; ++c) cache.inv_std[c] = 1.0 / std::sqrt(cache.batch_var[c] + p.eps);
    mean = &cache.batch_mean;
  } else {
    cache.batch_mean.clear();
    cache.batch_var.clear();
    for (std::size_t c = 0; c < channels; ++c) cache.inv_std[c] = 1.0 / std::sqrt(p.running_var[c] + p.eps);
  }
  cache.xhat = Tensor3(x.batch(), channels, x.length());
  Tensor3 y(x.batch(), channels, x.length());
  kernels::parallel::batchnorm_apply(channel_shape(x), x.data(), *mean, cache.inv_std, p.gamma, p.beta,
                                     cache.xhat.data(), y.data());
  return y;
}

BatchNormGrads batchnorm_backward(const BatchNormParams& p, const BatchNormCache& cache, const Tensor3& grad_out) {
  const Tensor3& xhat = cache.xhat;
  if (!grad_out.same_shape(xhat)) fail(ErrorKind::Shape, "batch norm backward shape mismatch");
  const std::size_t channels = xhat.channels();
  BatchNormGrads g{Tensor3(xhat.batch(), channels, xhat.length()), std::vector<double>(channels),
                   std::vector<double>(channels)};
  if (cache.mode == Mode::Train) {
    kernels::parallel::batchnorm_backward(channel_shape(xhat), xhat.data(), cache.inv_std, p.gamma, grad_out.data(),
                                          g.input.data(), g.gamma, g.beta);
    return g;
  }
  // running statistics are constants in eval mode
  for (std::size_t n = 0; n < xhat.batch(); ++n)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t t = 0; t < xhat.length(); ++t) {
        const double go = grad_out(n, c, t);
        g.beta[c] += go;
        g.gamma[c] += go * xhat(n, c, t);
        g.input(n, c, t) = go * p.gamma[c] * cache.inv_std[c];
      }
  return g;
}

void batchnorm_update_running(BatchNormParams& p, const BatchNormCache& cache) {
  if (cache.mode != Mode::Train) return;
  for (std::size_t c = 0; c < p.channels(); ++c) {
    p.running_mean[c] = (1.0 - p.momentum) * p.running_mean[c] + p.momentum * cache.batch_mean[c];
    p.running_var[c] = (1.0 - p.momentum) * p.running_var[c] + p.momentum * cache.batch_var[c];
  }
}

Tensor3 relu_forward(const Tensor3& x) {
  Tensor3 y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor3 relu_backward(const Tensor3& x, const Tensor3& grad_out) {
  if (!x.same_shape(grad_out)) fail(ErrorKind::Shape, "relu backward shape mismatch");
  Tensor3 g = grad_out;
  const auto in = x.data();
  auto out = g.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!(in[i] > 0.0)) out[i] = 0.0;
  return g;
}

Tensor3 dropout_forward(const Tensor3& x, double p, Mode mode, std::mt19937_64& rng, DropoutMask& mask) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::Config, fmt::format("dropout rate {} outside [0,1)", p));
  mask.scale.clear();
  if (mode == Mode::Eval || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  mask.scale.resize(x.size());
  Tensor3 y = x;
  auto out = y.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask.scale[i] = uniform(rng) < p ? 0.0 : keep_scale;
    out[i] *= mask.scale[i];
  }
  return y;
}

Tensor3 dropout_backward(const DropoutMask& mask, const Tensor3& grad_out) {
  if (mask.scale.empty()) return grad_out;
  if (mask.scale.size() != grad_out.size()) fail(ErrorKind::Shape, "dropout mask does not match gradient");
  Tensor3 g = grad_out;
  auto out = g.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask.scale[i];
  return g;
}

Tensor3 maxpool1d_forward(const Tensor3& x, std::size_t width, PoolCache& cache) {
  if (width < 1) fail(ErrorKind::Config, "pool width must be >= 1");
  const std::size_t out_len = x.length() / width;
  cache.input_length = x.length();
  cache.width = width;
  cache.argmax.assign(x.batch() * x.channels() * out_len, 0);
  Tensor3 y(x.batch(), x.channels(), out_len);
  std::size_t slot = 0;
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < x.channels(); ++c) {
      const auto in = x.row(n, c);
      auto out = y.row(n, c);
      for (std::size_t o = 0; o < out_len; ++o, ++slot) {
        std::size_t best = o * width;
        for (std::size_t t = best + 1; t < (o + 1) * width; ++t)
          if (in[t] > in[best]) best = t;
        out[o] = in[best];
        cache.argmax[slot] = best;
      }
    }
  return y;
}

Tensor3 maxpool1d_backward(const PoolCache& cache, const Tensor3& grad_out) {
  if (cache.argmax.size() != grad_out.size()) fail(ErrorKind::Shape, "max-pool backward shape mismatch");
  Tensor3 g(grad_out.batch(), grad_out.channels(), cache.input_length);
  std::size_t slot = 0;
  for (std::size_t n = 0; n < grad_out.batch(); ++n)
    for (std::size_t c = 0; c < grad_out.channels(); ++c) {
      const auto go = grad_out.row(n, c);
      auto gi = g.row(n, c);
      for (std::size_t o = 0; o < go.size(); ++o, ++slot) gi[cache.argmax[slot]] += go[o];
    }
  return g;
}

Tensor3 gap_forward(const Tensor3& x) {
  if (x.length() < 1) fail(ErrorKind::Shape, "global average pooling needs length >= 1");
  Tensor3 y(x.batch(), x.channels(), 1);
  const double inv = 1.0 / static_cast<double>(x.length());
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < x.channels(); ++c) {
      double sum = 0.0;
      for (double v : x.row(n, c)) sum += v;
      y(n, c, 0) = sum * inv;
    }
  return y;
}

Tensor3 gap_backward(std::size_t length, const Tensor3& grad_out) {
  Tensor3 g(grad_out.batch(), grad_out.channels(), length);
  const double inv = 1.0 / static_cast<double>(length);
  for (std::size_t n = 0; n < g.batch(); ++n)
    for (std::size_t c = 0; c < g.channels(); ++c) {
      const double v = grad_out(n, c, 0) * inv;
      for (double& e : g.row(n, c)) e = v;
    }
  return g;
}

Matrix dense_forward(const Tensor3& x, const DenseParams& p) {
  if (x.channels() != p.in_features || x.length() != 1) {
    fail(ErrorKind::Shape, fmt::format("dense expects ({} x 1) inputs, got ({} x {})", p.in_features, x.channels(),
                                       x.length()));
  }
  Matrix logits(x.batch(), p.out_features);
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t o = 0; o < p.out_features; ++o) {
      double acc = p.bias[o];
      for (std::size_t i = 0; i < p.in_features; ++i) acc += p.weight[o * p.in_features + i] * x(n, i, 0);
      logits(n, o) = acc;
    }
  return logits;
}

DenseGrads dense_backward(const Tensor3& x, const DenseParams& p, const Matrix& grad_logits) {
  if (x.channels() != p.in_features || x.length() != 1 || grad_logits.rows() != x.batch() ||
      grad_logits.cols() != p.out_features) {
    fail(ErrorKind::Shape, "dense backward shape mismatch");
  }
  DenseGrads g{Tensor3(x.batch(), p.in_features, 1), std::vector<double>(p.weight.size(), 0.0),
               std::vector<double>(p.out_features, 0.0)};
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t o = 0; o < p.out_features; ++o) {
      const double go = grad_logits(n, o);
      g.bias[o] += go;
      for (std::size_t i = 0; i < p.in_features; ++i) {
        g.weight[o * p.in_features + i] += go * x(n, i, 0);
        g.input(n, i, 0) += go * p.weight[o * p.in_features + i];
      }
    }
  return g;
}

Matrix softmax(const Matrix& logits) {
  Matrix probs(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto z = logits.row(r);
    auto out = probs.row(r);
    const double top = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      out[k] = std::exp(z[k] - top);
      total += out[k];
    }
    for (double& v : out) v /= total;
  }
  return probs;
}

}  // namespace sigprune
