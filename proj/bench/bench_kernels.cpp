// Serial reference vs OpenMP kernels, plus the two instance-parallel
// verification sweeps. Run with --benchmark_time_unit=ms for readable output.

#include <benchmark/benchmark.h>

#include "bankfuse/infotheory.hpp"
#include "bankfuse/kernels.hpp"
#include "bankfuse/rng.hpp"

using namespace bankfuse;

namespace {
Matrix random_matrix(int rows, int cols, uint64_t seed) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (auto& v : m.data) v = rng.uniform(-1.0, 1.0);
    return m;
}
}  // namespace

static void BM_matmul_serial(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
    Matrix out;
    for (auto _ : state) {
        kernels::matmul_serial(a, b, out);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_matmul_serial)->Arg(64)->Arg(128)->Arg(256)->Arg(512);

static void BM_matmul_omp(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
    Matrix out;
    for (auto _ : state) {
        kernels::matmul_omp(a, b, out);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_matmul_omp)->Arg(64)->Arg(128)->Arg(256)->Arg(512);

static void BM_softmax_rows_serial(benchmark::State& state) {
    const Matrix x = random_matrix(static_cast<int>(state.range(0)), 256, 3);
    Matrix out;
    for (auto _ : state) {
        kernels::softmax_rows_serial(x, out);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_softmax_rows_serial)->Arg(1024)->Arg(8192);

static void BM_softmax_rows_omp(benchmark::State& state) {
    const Matrix x = random_matrix(static_cast<int>(state.range(0)), 256, 3);
    Matrix out;
    for (auto _ : state) {
        kernels::softmax_rows_omp(x, out);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_softmax_rows_omp)->Arg(1024)->Arg(8192);

static void BM_sigmoid_serial(benchmark::State& state) {
    const Matrix x = random_matrix(static_cast<int>(state.range(0)), 512, 4);
    Matrix out;
    for (auto _ : state) {
        kernels::map_sigmoid_serial(x, out);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_sigmoid_serial)->Arg(512)->Arg(4096);

static void BM_sigmoid_omp(benchmark::State& state) {
    const Matrix x = random_matrix(static_cast<int>(state.range(0)), 512, 4);
    Matrix out;
    for (auto _ : state) {
        kernels::map_sigmoid_omp(x, out);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_sigmoid_omp)->Arg(512)->Arg(4096);

static void BM_sum_chunked_serial(benchmark::State& state) {
    const Matrix x = random_matrix(static_cast<int>(state.range(0)), 1024, 5);
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::sum_all_chunked_serial(x.data.data(), x.size()));
}
BENCHMARK(BM_sum_chunked_serial)->Arg(1024)->Arg(16384);

static void BM_sum_omp(benchmark::State& state) {
    const Matrix x = random_matrix(static_cast<int>(state.range(0)), 1024, 5);
    for (auto _ : state) benchmark::DoNotOptimize(kernels::sum_all(x.data.data(), x.size()));
}
BENCHMARK(BM_sum_omp)->Arg(1024)->Arg(16384);

// the verification sweeps parallelize across instances
static void BM_aggregation_sweep(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(aggregation_sweep(static_cast<int>(state.range(0)), 42, 4));
}
BENCHMARK(BM_aggregation_sweep)->Arg(100)->Arg(500);

static void BM_dpi_sweep(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(dpi_sweep(static_cast<int>(state.range(0)), 42, 4));
}
BENCHMARK(BM_dpi_sweep)->Arg(100)->Arg(500);

BENCHMARK_MAIN();
