#include <cmath>

#include "sigprune/kernels.hpp"

namespace sigprune::kernels::reference {

namespace {

std::size_t at(std::size_t n, std::size_t c, std::size_t t, std::size_t channels, std::size_t len) {
  return (n * channels + c) * len + t;
}

// input index feeding output position t through tap kk, or false when it falls in the padding
bool tap(std::size_t t, std::size_t kk, std::size_t pad, std::size_t len, std::size_t& src) {
  const auto pos = static_cast<long long>(t) + static_cast<long long>(kk) - static_cast<long long>(pad);
  if (pos < 0 || pos >= static_cast<long long>(len)) return false;
  src = static_cast<std::size_t>(pos);
  return true;
}

}  // namespace

void conv1d_forward(const ConvShape& s, std::span<const double> x, std::span<const double> w,
                    std::span<const double> b, std::span<double> y) {
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t co = 0; co < s.out_channels; ++co)
      for (std::size_t t = 0; t < s.length; ++t) {
        double acc = b[co];
        for (std::size_t ci = 0; ci < s.in_channels; ++ci)
          for (std::size_t kk = 0; kk < s.width; ++kk) {
            std::size_t src = 0;
            if (tap(t, kk, s.pad(), s.length, src))
              acc += w[(co * s.in_channels + ci) * s.width + kk] * x[at(n, ci, src, s.in_channels, s.length)];
          }
        y[at(n, co, t, s.out_channels, s.length)] = acc;
      }
}

void conv1d_backward(const ConvShape& s, std::span<const double> x, std::span<const double> w,
                     std::span<const double> grad_y, std::span<double> grad_x, std::span<double> grad_w,
                     std::span<double> grad_b) {
  for (auto& v : grad_x) v = 0.0;
  for (auto& v : grad_w) v = 0.0;
  for (auto& v : grad_b) v = 0.0;
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t co = 0; co < s.out_channels; ++co)
      for (std::size_t t = 0; t < s.length; ++t) {
        const double g = grad_y[at(n, co, t, s.out_channels, s.length)];
        grad_b[co] += g;
        for (std::size_t ci = 0; ci < s.in_channels; ++ci)
          for (std::size_t kk = 0; kk < s.width; ++kk) {
            std::size_t src = 0;
            if (!tap(t, kk, s.pad(), s.length, src)) continue;
            const std::size_t wi = (co * s.in_channels + ci) * s.width + kk;
            const std::size_t xi = at(n, ci, src, s.in_channels, s.length);
            grad_w[wi] += g * x[xi];
            grad_x[xi] += g * w[wi];
          }
      }
}

void channel_moments(const ChannelShape& s, std::span<const double> x, std::span<double> mean,
                     std::span<double> var) {
  const double count = static_cast<double>(s.batch * s.length);
  for (std::size_t c = 0; c < s.channels; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < s.batch; ++n)
      for (std::size_t t = 0; t < s.length; ++t) sum += x[at(n, c, t, s.channels, s.length)];
    mean[c] = sum / count;
    double sq = 0.0;
    for (std::size_t n = 0; n < s.batch; ++n)
      for (std::size_t t = 0; t < s.length; ++t) sq += std::pow(x[at(n, c, t, s.channels, s.length)] - mean[c], 2);
    var[c] = sq / count;
  }
}

void batchnorm_apply(const ChannelShape& s, std::span<const double> x, std::span<const double> mean,
                     std::span<const double> inv_std, std::span<const double> gamma, std::span<const double> beta,
                     std::span<double> xhat, std::span<double> y) {
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t c = 0; c < s.channels; ++c)
      for (std::size_t t = 0; t < s.length; ++t) {
        const std::size_t i = at(n, c, t, s.channels, s.length);
        xhat[i] = (x[i] - mean[c]) * inv_std[c];
        y[i] = gamma[c] * xhat[i] + beta[c];
      }
}

void batchnorm_backward(const ChannelShape& s, std::span<const double> xhat, std::span<const double> inv_std,
                        std::span<const double> gamma, std::span<const double> grad_y, std::span<double> grad_x,
                        std::span<double> grad_gamma, std::span<double> grad_beta) {
  const double count = static_cast<double>(s.batch * s.length);
  for (std::size_t c = 0; c < s.channels; ++c) {
    double dbeta = 0.0;
    double dgamma = 0.0;
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t n = 0; n < s.batch; ++n)
      for (std::size_t t = 0; t < s.length; ++t) {
        const std::size_t i = at(n, c, t, s.channels, s.length);
        dbeta += grad_y[i];
        dgamma += grad_y[i] * xhat[i];
        mean_dxhat += grad_y[i] * gamma[c];
        mean_dxhat_xhat += grad_y[i] * gamma[c] * xhat[i];
      }
    mean_dxhat /= count;
    mean_dxhat_xhat /= count;
    grad_beta[c] = dbeta;
    grad_gamma[c] = dgamma;
    for (std::size_t n = 0; n < s.batch; ++n)
      for (std::size_t t = 0; t < s.length; ++t) {
        const std::size_t i = at(n, c, t, s.channels, s.length);
        grad_x[i] = inv_std[c] * (grad_y[i] * gamma[c] - mean_dxhat - xhat[i] * mean_dxhat_xhat);
      }
  }
}

}  // namespace sigprune::kernels::reference
