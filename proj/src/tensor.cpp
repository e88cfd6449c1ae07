#include "sigprune/tensor.hpp"

namespace sigprune {

Tensor3::Tensor3(std::size_t batch, std::size_t channels, std::size_t length, double fill)
    : batch_(batch), channels_(channels), length_(length), data_(batch * channels * length, fill) {}

}  // namespace sigprune
