#include <benchmark/benchmark.h>

#include "stylediff/autodiff.hpp"
#include "stylediff/rng.hpp"

using namespace stylediff;

static void BM_Conv2d32(benchmark::State& state) {
    Rng rng(1);
    Tensor x = rng.normal_tensor({12, 32, 32});
    Tensor w = rng.normal_tensor({12, 12, 3, 3});
    Tensor b = rng.normal_tensor({12});
    NoGradGuard ng;
    for (auto _ : state) {
        Var out = conv2d(constant(x), constant(w), constant(b), 1, 1);
        benchmark::DoNotOptimize(out->value.data());
    }
}
BENCHMARK(BM_Conv2d32);

BENCHMARK_MAIN();
