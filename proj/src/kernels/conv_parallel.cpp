#include <omp.h>

#include <algorithm>
#include <vector>

#include "jointdet/errors.hpp"
#include "jointdet/kernels/conv.hpp"

namespace jointdet::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = std::size_t{1} << 16;

void check(const ConvShape& shape, const Tensor3& input, std::span<const double> weight, std::size_t bias_size)
{
    if (input.channels != shape.in_channels || weight.size() != shape.weight_count() ||
        bias_size != static_cast<std::size_t>(shape.out_channels)) {
        throw ArgumentError("conv2d: tensor shape does not match convolution geometry");
    }
}

bool is_pointwise(const ConvShape& shape)
{
    return shape.kernel == 1 && shape.stride == 1 && shape.pad == 0;
}

// Unfolds the input into a (in_channels*k*k) x (oh*ow) matrix.
void im2col(const ConvShape& shape, const Tensor3& input, int oh, int ow, std::vector<double>& col)
{
    const int k = shape.kernel;
    const std::size_t cols = static_cast<std::size_t>(oh) * ow;
    col.assign(static_cast<std::size_t>(shape.in_channels) * k * k * cols, 0.0);
    for (int ic = 0; ic < shape.in_channels; ++ic) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = col.data() + ((static_cast<std::size_t>(ic) * k + ky) * k + kx) * cols;
                for (int oy = 0; oy < oh; ++oy) {
                    const int iy = oy * shape.stride + ky - shape.pad;
                    if (iy < 0 || iy >= input.height) {
                        continue;
                    }
                    const double* src = input.data.data() + ic * input.plane() + static_cast<std::size_t>(iy) * input.width;
                    double* dst = row + static_cast<std::size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int ix = ox * shape.stride + kx - shape.pad;
                        if (ix >= 0 && ix < input.width) {
                            dst[ox] = src[ix];
                        }
                    }
                }
            }
        }
    }
}

std::span<const double> unfolded(const ConvShape& shape, const Tensor3& input, int oh, int ow,
                                 std::vector<double>& scratch)
{
    if (is_pointwise(shape)) {
        return input.data;
    }
    im2col(shape, input, oh, ow, scratch);
    return scratch;
}

}  // namespace

void conv2d_forward(const ConvShape& shape, const Tensor3& input, std::span<const double> weight,
                    std::span<const double> bias, Tensor3& output)
{
    check(shape, input, weight, bias.size());
    const int oh = shape.out_size(input.height);
    const int ow = shape.out_size(input.width);
    const std::size_t cols = static_cast<std::size_t>(oh) * ow;
    const std::size_t rows = static_cast<std::size_t>(shape.in_channels) * shape.kernel * shape.kernel;

    thread_local std::vector<double> scratch;
    const auto col = unfolded(shape, input, oh, ow, scratch);
    output = Tensor3(shape.out_channels, oh, ow);

    const bool parallel = rows * cols * shape.out_channels >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
    for (int oc = 0; oc < shape.out_channels; ++oc) {
        double* out = output.data.data() + oc * cols;
        std::fill(out, out + cols, bias[oc]);
        const double* w = weight.data() + oc * rows;
        for (std::size_t r = 0; r < rows; ++r) {
            const double wr = w[r];
            const double* src = col.data() + r * cols;
            for (std::size_t p = 0; p < cols; ++p) {
                out[p] += wr * src[p];
            }
        }
    }
}

void conv2d_backward(const ConvShape& shape, const Tensor3& input, std::span<const double> weight,
                     const Tensor3& d_output, std::span<double> d_weight, std::span<double> d_bias,
                     Tensor3* d_input)
{
    check(shape, input, weight, d_bias.size());
    const int oh = d_output.height;
    const int ow = d_output.width;
    if (d_output.channels != shape.out_channels || oh != shape.out_size(input.height) ||
        ow != shape.out_size(input.width)) {
        throw ArgumentError("conv2d_backward: gradient shape does not match output");
    }
    const int k = shape.kernel;
    const std::size_t cols = static_cast<std::size_t>(oh) * ow;
    const std::size_t rows = static_cast<std::size_t>(shape.in_channels) * k * k;

    thread_local std::vector<double> scratch;
    const auto col = unfolded(shape, input, oh, ow, scratch);
    const bool parallel = rows * cols * shape.out_channels >= kParallelWork;

#pragma omp parallel for schedule(static) if (parallel)
    for (int oc = 0; oc < shape.out_channels; ++oc) {
        const double* g = d_output.data.data() + oc * cols;
        double* dw = d_weight.data() + oc * rows;
        double bsum = 0.0;
        for (std::size_t p = 0; p < cols; ++p) {
            bsum += g[p];
        }
        d_bias[oc] += bsum;
        for (std::size_t r = 0; r < rows; ++r) {
            const double* src = col.data() + r * cols;
            double acc = 0.0;
            for (std::size_t p = 0; p < cols; ++p) {
                acc += g[p] * src[p];
            }
            dw[r] += acc;
        }
    }

    if (d_input == nullptr) {
        return;
    }
    *d_input = Tensor3(input.channels, input.height, input.width);

    // Each thread owns whole input channels: it builds the matching rows of
    // d(col) and folds them back, so no two threads touch the same pixel.
#pragma omp parallel if (parallel)
    {
        std::vector<double> drow(cols);
#pragma omp for schedule(static)
        for (int ic = 0; ic < shape.in_channels; ++ic) {
            double* din = d_input->data.data() + ic * input.plane();
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const std::size_t r = (static_cast<std::size_t>(ic) * k + ky) * k + kx;
                    std::fill(drow.begin(), drow.end(), 0.0);
                    for (int oc = 0; oc < shape.out_channels; ++oc) {
                        const double w = weight[oc * rows + r];
                        const double* g = d_output.data.data() + oc * cols;
                        for (std::size_t p = 0; p < cols; ++p) {
                            drow[p] += w * g[p];
                        }
                    }
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * shape.stride + ky - shape.pad;
                        if (iy < 0 || iy >= input.height) {
                            continue;
                        }
                        double* dst = din + static_cast<std::size_t>(iy) * input.width;
                        const double* src = drow.data() + static_cast<std::size_t>(oy) * ow;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * shape.stride + kx - shape.pad;
                            if (ix >= 0 && ix < input.width) {
                                dst[ix] += src[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace jointdet::kernels
