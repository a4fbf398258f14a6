#include "jointdet/errors.hpp"
#include "jointdet/kernels/conv.hpp"

namespace jointdet::kernels::reference {

namespace {

void check(const ConvShape& shape, const Tensor3& input, std::span<const double> weight, std::span<const double> bias)
{
    if (input.channels != shape.in_channels || weight.size() != shape.weight_count() ||
        bias.size() != static_cast<std::size_t>(shape.out_channels)) {
        throw ArgumentError("conv2d: tensor shape does not match convolution geometry");
    }
}

}  // namespace

void conv2d_forward(const ConvShape& shape, const Tensor3& input, std::span<const double> weight,
                    std::span<const double> bias, Tensor3& output)
{
    check(shape, input, weight, bias);
    const int k = shape.kernel;
    const int oh = shape.out_size(input.height);
    const int ow = shape.out_size(input.width);
    output = Tensor3(shape.out_channels, oh, ow);

    for (int oc = 0; oc < shape.out_channels; ++oc) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = bias[oc];
                for (int ic = 0; ic < shape.in_channels; ++ic) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * shape.stride + ky - shape.pad;
                        if (iy < 0 || iy >= input.height) {
                            continue;
                        }
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * shape.stride + kx - shape.pad;
                            if (ix < 0 || ix >= input.width) {
                                continue;
                            }
                            acc += weight[((oc * shape.in_channels + ic) * k + ky) * k + kx] * input.at(ic, iy, ix);
                        }
                    }
                }
                output.at(oc, oy, ox) = acc;
            }
        }
    }
}

void conv2d_backward(const ConvShape& shape, const Tensor3& input, std::span<const double> weight,
                     const Tensor3& d_output, std::span<double> d_weight, std::span<double> d_bias,
                     Tensor3* d_input)
{
    check(shape, input, weight, d_bias);
    const int k = shape.kernel;
    if (d_input != nullptr) {
        *d_input = Tensor3(input.channels, input.height, input.width);
    }
    for (int oc = 0; oc < shape.out_channels; ++oc) {
        for (int oy = 0; oy < d_output.height; ++oy) {
            for (int ox = 0; ox < d_output.width; ++ox) {
                const double g = d_output.at(oc, oy, ox);
                d_bias[oc] += g;
                for (int ic = 0; ic < shape.in_channels; ++ic) {
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * shape.stride + ky - shape.pad;
                        if (iy < 0 || iy >= input.height) {
                            continue;
                        }
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * shape.stride + kx - shape.pad;
                            if (ix < 0 || ix >= input.width) {
                                continue;
                            }
                            const std::size_t w = ((oc * shape.in_channels + ic) * k + ky) * k + kx;
                            d_weight[w] += g * input.at(ic, iy, ix);
                            if (d_input != nullptr) {
                                d_input->at(ic, iy, ix) += g * weight[w];
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace jointdet::kernels::reference
