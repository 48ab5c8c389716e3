#include <benchmark/benchmark.h>

#include <omp.h>

#include "nestlab/config.hpp"
#include "nestlab/nest.hpp"
#include "nestlab/oracle.hpp"
#include "nestlab/scan.hpp"
#include "nestlab/stats.hpp"

using namespace nestlab;

// Each kernel runs with Exec::Serial (arg 0) and Exec::Parallel (arg 1).

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

void label(benchmark::State& st) {
    st.SetLabel(st.range(0) == 0 ? "serial" : "parallel/" + std::to_string(omp_get_max_threads()));
}

void BM_Scan(benchmark::State& st) {
    const auto fam = config::parse_family_name("quadratic");
    scan::ScanWindow w{{{1.5, 2.0}}, std::nullopt};
    scan::ScanOptions opt{.samples = 200, .seed = 42, .exec = exec_of(st)};
    for (auto _ : st) {
        benchmark::DoNotOptimize(scan::scan_range(fam, w, {}, opt));
    }
    st.SetItemsProcessed(st.iterations() * opt.samples);
    label(st);
}

void BM_GridOracle(benchmark::State& st) {
    const auto m = maps::MapInstance::normalized_quadratic_a(1.9);
    const auto nest = nest::build_nest(m, {.max_levels = 2});
    for (auto _ : st) {
        benchmark::DoNotOptimize(oracle::grid_branches(m, nest.levels[1], 200000, 20000, exec_of(st), 1e-5 * nest.levels[1].interval.length()));
    }
    st.SetItemsProcessed(st.iterations() * 200000);
    label(st);
}

void BM_BCETree(benchmark::State& st) {
    const auto m = maps::MapInstance::quadratic(2.0);
    for (auto _ : st) {
        benchmark::DoNotOptimize(stats::bce_min_exponent(m, 16, exec_of(st)));
    }
    label(st);
}

void BM_HyperbolicityGrid(benchmark::State& st) {
    const auto m = maps::MapInstance::normalized_quadratic_a(1.9);
    for (auto _ : st) {
        benchmark::DoNotOptimize(stats::hyperbolicity_outside(m, 0.05, 200, 20000, 10, exec_of(st)));
    }
    st.SetItemsProcessed(st.iterations() * 20000);
    label(st);
}

} // namespace

BENCHMARK(BM_Scan)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_GridOracle)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BCETree)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_HyperbolicityGrid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
