// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 milpool authors
//
// Compares the serial reference implementations against the OpenMP kernels.
// The per-class arithmetic is identical; the kernels parallelize over class
// columns, so the gap widens with the class count. Run with
//   ./bench/milpool_bench [--benchmark_filter=...]

#include <random>

#include <benchmark/benchmark.h>
#include <omp.h>

#include "milpool/gradients.hpp"
#include "milpool/pooling.hpp"
#include "milpool/reference.hpp"

namespace {

using namespace milpool;

struct Inputs {
    FrameScores scores;
    FrameWeights weights;
};

Inputs make_inputs(std::size_t frames, std::size_t classes) {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> dist(0.05, 0.95);
    Inputs in;
    in.scores.values = Matrix(frames, classes);
    for (std::size_t i = 0; i < in.scores.values.size(); ++i)
        in.scores.values.data()[i] = dist(rng);
    in.weights = compute_weights(in.scores, PoolingFunction::kLinearSoftmax);
    return in;
}

const StagePlan kThreeStage{{5, 5, 5}};

void BM_pool_hierarchical_reference(benchmark::State& state) {
    const Inputs in = make_inputs(125, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        ClipProbability y = ref::pool_hierarchical(in.scores, in.weights, kThreeStage);
        benchmark::DoNotOptimize(y);
    }
}
BENCHMARK(BM_pool_hierarchical_reference)->Arg(17)->Arg(128)->Arg(1024);

void BM_pool_hierarchical_omp(benchmark::State& state) {
    const Inputs in = make_inputs(125, static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        ClipProbability y = pool_hierarchical(in.scores, in.weights, kThreeStage);
        benchmark::DoNotOptimize(y);
    }
}
BENCHMARK(BM_pool_hierarchical_omp)->Arg(17)->Arg(128)->Arg(1024);

void BM_grad_hierarchical_threads(benchmark::State& state) {
    const Inputs in = make_inputs(125, static_cast<std::size_t>(state.range(0)));
    omp_set_num_threads(static_cast<int>(state.range(1)));
    for (auto _ : state) {
        PoolingGradients g =
            grad_hierarchical(in.scores, in.weights, PoolingFunction::kLinearSoftmax, kThreeStage);
        benchmark::DoNotOptimize(g);
    }
    omp_set_num_threads(omp_get_num_procs());
}
BENCHMARK(BM_grad_hierarchical_threads)
    ->Args({128, 1})
    ->Args({128, 2})
    ->Args({1024, 1})
    ->Args({1024, 2});

void BM_finite_difference_check(benchmark::State& state) {
    const Inputs in = make_inputs(125, 2);
    omp_set_num_threads(static_cast<int>(state.range(0)));
    for (auto _ : state) {
        double err = finite_difference_check(in.scores, in.weights,
                                             PoolingFunction::kLinearSoftmax, kThreeStage, 1e-5);
        benchmark::DoNotOptimize(err);
    }
    omp_set_num_threads(omp_get_num_procs());
}
BENCHMARK(BM_finite_difference_check)->Arg(1)->Arg(2);

}  // namespace

BENCHMARK_MAIN();
