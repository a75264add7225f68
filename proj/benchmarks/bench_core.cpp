#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "wcs/sampling.hpp"
#include "wcs/solver.hpp"

using namespace wcs;

namespace {

Image test_image(std::size_t rows, std::size_t cols) {
    Image img(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            img(r, c) = 0.5 + 0.3 * std::sin(0.07 * static_cast<double>(r)) * std::cos(0.11 * static_cast<double>(c));
        }
    }
    return img;
}

void BM_DwtFlat(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto layout = make_layout(n, 2);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    std::vector<double> block(n * n), coeffs(layout.total);
    for (double& v : block) v = g(rng);
    for (auto _ : state) {
        dwt_flat(block, layout, coeffs);
        idwt_flat(coeffs, layout, block);
        benchmark::DoNotOptimize(block.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_DwtFlat)->Arg(32)->Arg(64)->Arg(128);

void BM_MakeOperator(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Image img = test_image(n, n);
    const auto plan = plan_for_image(img, n, 2, Rate{1, 4}, AllocationConfig{}, 7);
    for (auto _ : state) benchmark::DoNotOptimize(make_operator(plan));
}
BENCHMARK(BM_MakeOperator)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SampleImage(benchmark::State& state) {
    const Image img = test_image(256, 256);
    const auto plan = plan_for_image(img, 128, 2, Rate{1, 4}, AllocationConfig{}, 7);
    const auto op = make_operator(plan);
    for (auto _ : state) benchmark::DoNotOptimize(sample_image(img, plan, op, 1));
}
BENCHMARK(BM_SampleImage)->Unit(benchmark::kMillisecond);

void BM_SolverIterations(benchmark::State& state) {
    const Image img = test_image(256, 256);
    const auto plan = plan_for_image(img, 128, 2, Rate{1, 4}, AllocationConfig{}, 7);
    const auto op = make_operator(plan);
    const auto ms = sample_image(img, plan, op, 1);
    SolverConfig cfg;
    cfg.max_iters = static_cast<int>(state.range(0));
    cfg.rel_tol = 1e-300;
    for (auto _ : state) benchmark::DoNotOptimize(reconstruct(ms, op, cfg, nullptr, 1));
    state.counters["iters"] = static_cast<double>(cfg.max_iters);
}
BENCHMARK(BM_SolverIterations)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
