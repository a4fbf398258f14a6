// Parallel im2col convolution against the serial direct-loop reference.
#include <benchmark/benchmark.h>

#include <omp.h>

#include "jointdet/kernels/conv.hpp"
#include "jointdet/rng.hpp"

using namespace jointdet;
using namespace jointdet::kernels;

namespace {

struct Problem {
    ConvShape shape;
    Tensor3 input, output, d_output, d_input;
    std::vector<double> weight, bias, d_weight, d_bias;
};

Problem make_problem(int in_c, int out_c, int size, int kernel, int stride)
{
    Problem p;
    p.shape = {in_c, out_c, kernel, stride, kernel / 2};
    Rng rng = make_rng(7, {static_cast<std::uint64_t>(in_c), static_cast<std::uint64_t>(size)});
    p.input = Tensor3(in_c, size, size);
    for (auto& v : p.input.data) v = uniform(rng, -1.0, 1.0);
    p.weight.resize(p.shape.weight_count());
    for (auto& v : p.weight) v = uniform(rng, -0.1, 0.1);
    p.bias.assign(static_cast<std::size_t>(out_c), 0.01);
    const int out = p.shape.out_size(size);
    p.d_output = Tensor3(out_c, out, out);
    for (auto& v : p.d_output.data) v = uniform(rng, -1.0, 1.0);
    p.d_weight.assign(p.weight.size(), 0.0);
    p.d_bias.assign(p.bias.size(), 0.0);
    return p;
}

template <bool Parallel>
void BM_Forward(benchmark::State& state)
{
    Problem p = make_problem(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                             static_cast<int>(state.range(2)), 3, 1);
    for (auto _ : state) {
        if constexpr (Parallel) {
            conv2d_forward(p.shape, p.input, p.weight, p.bias, p.output);
        } else {
            reference::conv2d_forward(p.shape, p.input, p.weight, p.bias, p.output);
        }
        benchmark::DoNotOptimize(p.output.data.data());
    }
    state.counters["threads"] = omp_get_max_threads();
}

template <bool Parallel>
void BM_Backward(benchmark::State& state)
{
    Problem p = make_problem(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)),
                             static_cast<int>(state.range(2)), 3, 1);
    for (auto _ : state) {
        if constexpr (Parallel) {
            conv2d_backward(p.shape, p.input, p.weight, p.d_output, p.d_weight, p.d_bias, &p.d_input);
        } else {
            reference::conv2d_backward(p.shape, p.input, p.weight, p.d_output, p.d_weight, p.d_bias, &p.d_input);
        }
        benchmark::DoNotOptimize(p.d_input.data.data());
    }
    state.counters["threads"] = omp_get_max_threads();
}

void shapes(benchmark::internal::Benchmark* b)
{
    b->Args({3, 8, 64})->Args({8, 16, 32})->Args({16, 32, 16})->Args({32, 64, 32});
    b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_Forward<true>)->Apply(shapes)->Name("conv_forward/parallel");
BENCHMARK(BM_Forward<false>)->Apply(shapes)->Name("conv_forward/reference");
BENCHMARK(BM_Backward<true>)->Apply(shapes)->Name("conv_backward/parallel");
BENCHMARK(BM_Backward<false>)->Apply(shapes)->Name("conv_backward/reference");

BENCHMARK_MAIN();
