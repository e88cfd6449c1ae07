#include <algorithm>
#include <cstdint>

#include "sigprune/kernels.hpp"

namespace sigprune::kernels::parallel {

namespace {
using Index = std::int64_t;
}

void conv1d_forward(const ConvShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  const Index batch = static_cast<Index>(s.batch);
  const Index cout = static_cast<Index>(s.out_channels);
  const Index cin = static_cast<Index>(s.in_channels);
  const Index len = static_cast<Index>(s.length);
  const Index width = static_cast<Index>(s.width);
  const Index pad = static_cast<Index>(s.pad());

#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < batch; ++n) {
    for (Index co = 0; co < cout; ++co) {
      double* out = y.data() + (n * cout + co) * len;
      std::fill(out, out + len, b[static_cast<std::size_t>(co)]);
      for (Index ci = 0; ci < cin; ++ci) {
        const double* in = x.data() + (n * cin + ci) * len;
        const double* kernel = w.data() + (co * cin + ci) * width;
        for (Index kk = 0; kk < width; ++kk) {
          const double wv = kernel[kk];
          const Index shift = kk - pad;
          const Index lo = std::max<Index>(0, -shift);
          const Index hi = std::min<Index>(len, len - shift);
          for (Index t = lo; t < hi; ++t) out[t] += wv * in[t + shift];
        }
      }
    }
  }
}

void conv1d_backward(const ConvShape& s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> grad_y, std::span<double> grad_x, std::span<double> grad_w,
                     std::span<double> grad_b) {
  const Index batch = static_cast<Index>(s.batch);
  const Index cout = static_cast<Index>(s.out_channels);
  const Index cin = static_cast<Index>(s.in_channels);
  const Index len = static_cast<Index>(s.length);
  const Index width = static_cast<Index>(s.width);
  const Index pad = static_cast<Index>(s.pad());

  // weights and bias: one output channel per iteration
#pragma omp parallel for schedule(static)
  for (Index co = 0; co < cout; ++co) {
    double bias_acc = 0.0;
    double* gw = grad_w.data() + co * cin * width;
    std::fill(gw, gw + cin * width, 0.0);
    for (Index n = 0; n < batch; ++n) {
      const double* g = grad_y.data() + (n * cout + co) * len;
      for (Index t = 0; t < len; ++t) bias_acc += g[t];
      for (Index ci = 0; ci < cin; ++ci) {
        const double* in = x.data() + (n * cin + ci) * len;
        for (Index kk = 0; kk < width; ++kk) {
          const Index shift = kk - pad;
          const Index lo = std::max<Index>(0, -shift);
          const Index hi = std::min<Index>(len, len - shift);
          double acc = 0.0;
          for (Index t = lo; t < hi; ++t) acc += g[t] * in[t + shift];
          gw[ci * width + kk] += acc;
        }
      }
    }
    grad_b[static_cast<std::size_t>(co)] = bias_acc;
  }

  // inputs: one (sample, input channel) row per iteration
#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < batch; ++n) {
    for (Index ci = 0; ci < cin; ++ci) {
      double* gx = grad_x.data() + (n * cin + ci) * len;
      std::fill(gx, gx + len, 0.0);
      for (Index co = 0; co < cout; ++co) {
        const double* g = grad_y.data() + (n * cout + co) * len;
        const double* kernel = w.data() + (co * cin + ci) * width;
        for (Index kk = 0; kk < width; ++kk) {
          const double wv = kernel[kk];
          const Index shift = kk - pad;
          const Index lo = std::max<Index>(0, -shift);
          const Index hi = std::min<Index>(len, len - shift);
          for (Index t = lo; t < hi; ++t) gx[t + shift] += wv * g[t];
        }
      }
    }
  }
}

void channel_moments(const ChannelShape& s, std::span<const double> x, std::span<double> mean,
                     std::span<double> var) {
  const Index batch = static_cast<Index>(s.batch);
  const Index channels = static_cast<Index>(s.channels);
  const Index len = static_cast<Index>(s.length);
  const double count = static_cast<double>(s.batch * s.length);

#pragma omp parallel for schedule(static)
  for (Index c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (Index n = 0; n < batch; ++n) {
      const double* row = x.data() + (n * channels + c) * len;
      for (Index t = 0; t < len; ++t) sum += row[t];
    }
    const double mu = sum / count;
    double sq = 0.0;
    for (Index n = 0; n < batch; ++n) {
      const double* row = x.data() + (n * channels + c) * len;
      for (Index t = 0; t < len; ++t) {
        const double diff = row[t] - mu;
        sq += diff * diff;
      }
    }
    mean[static_cast<std::size_t>(c)] = mu;
    var[static_cast<std::size_t>(c)] = sq / count;
  }
}

void batchnorm_apply(const ChannelShape& s, std::span<const double> x, std::span<const double> mean,
                     std::span<const double> inv_std, std::span<const double> gamma, std::span<const double> beta,
                     std::span<double> xhat, std::span<double> y) {
  const Index batch = static_cast<Index>(s.batch);
  const Index channels = static_cast<Index>(s.channels);
  const Index len = static_cast<Index>(s.length);

#pragma omp parallel for collapse(2) schedule(static)
  for (Index n = 0; n < batch; ++n) {
    for (Index c = 0; c < channels; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      const Index base = (n * channels + c) * len;
      for (Index t = 0; t < len; ++t) {
        const double h = (x[static_cast<std::size_t>(base + t)] - mean[cu]) * inv_std[cu];
        xhat[static_cast<std::size_t>(base + t)] = h;
        y[static_cast<std::size_t>(base + t)] = gamma[cu] * h + beta[cu];
      }
    }
  }
}

void batchnorm_backward(const ChannelShape& s, std::span<const double> xhat, std::span<const double> inv_std,
                        std::span<const double> gamma, std::span<const double> grad_y, std::span<double> grad_x,
                        std::span<double> grad_gamma, std::span<double> grad_beta) {
  const Index batch = static_cast<Index>(s.batch);
  const Index channels = static_cast<Index>(s.channels);
  const Index len = static_cast<Index>(s.length);
  const double count = static_cast<double>(s.batch * s.length);

#pragma omp parallel for schedule(static)
  for (Index c = 0; c < channels; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (Index n = 0; n < batch; ++n) {
      const Index base = (n * channels + c) * len;
      for (Index t = 0; t < len; ++t) {
        const double g = grad_y[static_cast<std::size_t>(base + t)];
        sum_g += g;
        sum_gx += g * xhat[static_cast<std::size_t>(base + t)];
      }
    }
    grad_beta[cu] = sum_g;
    grad_gamma[cu] = sum_gx;
    const double scale = gamma[cu] * inv_std[cu] / count;
    for (Index n = 0; n < batch; ++n) {
      const Index base = (n * channels + c) * len;
      for (Index t = 0; t < len; ++t) {
        const auto i = static_cast<std::size_t>(base + t);
        grad_x[i] = scale * (count * grad_y[i] - sum_g - xhat[i] * sum_gx);
      }
    }
  }
}

}  // namespace sigprune::kernels::parallel
