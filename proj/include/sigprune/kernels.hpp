#pragma once

// Hot loops of the network. `parallel` is what the layers call; `reference`
// is a plain serial transcription kept for tests and the benchmark.
//
// Every parallel kernel partitions work so that each output element is
// written by exactly one thread and reduced in a fixed order, so results do
// not depend on the thread count.

#include <cstddef>
#include <span>

namespace sigprune::kernels {

struct ConvShape {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t length = 0;
  std::size_t width = 1;  // odd

  std::size_t pad() const noexcept { return width / 2; }
  std::size_t input_size() const noexcept { return batch * in_channels * length; }
  std::size_t output_size() const noexcept { return batch * out_channels * length; }
  std::size_t weight_size() const noexcept { return out_channels * in_channels * width; }
};

struct ChannelShape {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t length = 0;

  std::size_t size() const noexcept { return batch * channels * length; }
};

#define SIGPRUNE_KERNEL_DECLS                                                                              \
  void conv1d_forward(const ConvShape& s, std::span<const double> x, std::span<const double> w,            \
                      std::span<const double> b, std::span<double> y);                                     \
  void conv1d_backward(const ConvShape& s, std::span<const double> x, std::span<const double> w,           \
                       std::span<const double> grad_y, std::span<double> grad_x, std::span<double> grad_w, \
                       std::span<double> grad_b);                                                          \
  /* population mean/variance per channel over (batch, length) */                                         \
  void channel_moments(const ChannelShape& s, std::span<const double> x, std::span<double> mean,           \
                       std::span<double> var);                                                             \
  void batchnorm_apply(const ChannelShape& s, std::span<const double> x, std::span<const double> mean,     \
                       std::span<const double> inv_std, std::span<const double> gamma,                     \
                       std::span<const double> beta, std::span<double> xhat, std::span<double> y);         \
  /* gradient through batch statistics (train mode) */                                                     \
  void batchnorm_backward(const ChannelShape& s, std::span<const double> xhat,                             \
                          std::span<const double> inv_std, std::span<const double> gamma,                  \
                          std::span<const double> grad_y, std::span<double> grad_x,                        \
                          std::span<double> grad_gamma, std::span<double> grad_beta);

namespace parallel {
SIGPRUNE_KERNEL_DECLS
}  // namespace parallel

namespace reference {
SIGPRUNE_KERNEL_DECLS
}  // namespace reference

#undef SIGPRUNE_KERNEL_DECLS

}  // namespace sigprune::kernels
