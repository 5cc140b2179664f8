#include <benchmark/benchmark.h>

#include "bdf/ops.hpp"
#include "bdf/rng.hpp"

namespace {

bdf::Tensor random_tensor(std::vector<int> shape, std::uint64_t seed) {
    bdf::Rng rng(seed);
    bdf::Tensor t(std::move(shape));
    for (auto& v : t.data) v = rng.uniform(-1.0f, 1.0f);
    return t;
}

void BM_Conv2dForward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const auto x = random_tensor({c, 28, 28}, 1);
    const auto w = random_tensor({2 * c, c, 3, 3}, 2);
    const auto b = random_tensor({2 * c}, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bdf::conv2d_forward(x, w, b, 1, 1));
    }
}
BENCHMARK(BM_Conv2dForward)->Arg(8)->Arg(16);

void BM_Conv2dBackward(benchmark::State& state) {
    const int c = static_cast<int>(state.range(0));
    const auto x = random_tensor({c, 28, 28}, 1);
    const auto w = random_tensor({2 * c, c, 3, 3}, 2);
    const auto d = random_tensor({2 * c, 28, 28}, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bdf::conv2d_backward(x, w, 1, 1, d));
    }
}
BENCHMARK(BM_Conv2dBackward)->Arg(8)->Arg(16);

void BM_Maxpool(benchmark::State& state) {
    const auto x = random_tensor({16, 28, 28}, 5);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bdf::maxpool2_forward(x));
    }
}
BENCHMARK(BM_Maxpool);

void BM_SoftmaxXent(benchmark::State& state) {
    const auto logits = random_tensor({43}, 6);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bdf::softmax_xent(logits, 7));
    }
}
BENCHMARK(BM_SoftmaxXent);

}  // namespace
