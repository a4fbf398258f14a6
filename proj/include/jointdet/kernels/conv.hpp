#pragma once

#include <span>

#include "jointdet/tensor.hpp"

namespace jointdet::kernels {

/// Square-kernel 2-D convolution geometry. Weights are laid out
/// [out_channels][in_channels][kernel][kernel].
struct ConvShape {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int pad = 1;

    int out_size(int in) const { return (in + 2 * pad - kernel) / stride + 1; }
    std::size_t weight_count() const
    {
        return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
    }
};

// OpenMP kernels (im2col + row-parallel products). Every output element is
// produced by exactly one thread with a fixed summation order, so results do
// not depend on the thread count.

void conv2d_forward(const ConvShape& shape, const Tensor3& input, std::span<const double> weight,
                    std::span<const double> bias, Tensor3& output);

/// Accumulates into d_weight and d_bias; overwrites *d_input when non-null.
void conv2d_backward(const ConvShape& shape, const Tensor3& input, std::span<const double> weight,
                     const Tensor3& d_output, std::span<double> d_weight, std::span<double> d_bias,
                     Tensor3* d_input);

/// Serial direct-loop convolution. Slow; kept as the oracle for the parallel kernels.
namespace reference {

void conv2d_forward(const ConvShape& shape, const Tensor3& input, std::span<const double> weight,
                    std::span<const double> bias, Tensor3& output);

void conv2d_backward(const ConvShape& shape, const Tensor3& input, std::span<const double> weight,
                     const Tensor3& d_output, std::span<double> d_weight, std::span<double> d_bias,
                     Tensor3* d_input);

}  // namespace reference

}  // namespace jointdet::kernels
