#include <benchmark/benchmark.h>

#include "bdf/gradcam.hpp"
#include "bdf/model.hpp"
#include "bdf/rng.hpp"

namespace {

bdf::Tensor random_image(std::uint64_t seed) {
    bdf::Rng rng(seed);
    bdf::Tensor t({1, 28, 28});
    for (auto& v : t.data) v = rng.uniform();
    return t;
}

void BM_ModelForward(benchmark::State& state) {
    const auto params = bdf::ModelParams::init(10, 1, 28, 28, 42);
    const auto img = random_image(7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bdf::forward(params, img));
    }
}
BENCHMARK(BM_ModelForward);

void BM_ModelBackwardParams(benchmark::State& state) {
    const auto params = bdf::ModelParams::init(10, 1, 28, 28, 42);
    const auto img = random_image(7);
    const auto trace = bdf::forward(params, img);
    bdf::Tensor d({10});
    d.at(3) = 1.0f;
    for (auto _ : state) {
        benchmark::DoNotOptimize(bdf::backward_params(params, trace, d));
    }
}
BENCHMARK(BM_ModelBackwardParams);

void BM_ModelBackwardToInput(benchmark::State& state) {
    const auto params = bdf::ModelParams::init(10, 1, 28, 28, 42);
    const auto img = random_image(7);
    const auto trace = bdf::forward(params, img);
    bdf::Tensor d({10});
    d.at(3) = 1.0f;
    for (auto _ : state) {
        benchmark::DoNotOptimize(bdf::backward_to_input(params, trace, d));
    }
}
BENCHMARK(BM_ModelBackwardToInput);

void BM_GradCam(benchmark::State& state) {
    const auto params = bdf::ModelParams::init(10, 1, 28, 28, 42);
    const auto img = random_image(7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(bdf::grad_cam(params, img, 3));
    }
}
BENCHMARK(BM_GradCam);

}  // namespace
