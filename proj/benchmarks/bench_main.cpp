#include <benchmark/benchmark.h>

#include "ratweyl/inverse.hpp"
#include "ratweyl/presets.hpp"

using namespace ratweyl;

namespace {

Eigen::Matrix2cd sample_matrix() {
    Eigen::Matrix2cd a;
    a << cplx(0.3, -1.2), cplx(0.5, 0.1), cplx(-0.2, 0.7), cplx(-0.1, 2.0);
    return a;
}

void BM_expm2(benchmark::State& state) {
    const Eigen::Matrix2cd a = sample_matrix();
    for (auto _ : state) benchmark::DoNotOptimize(expm2(a));
}
BENCHMARK(BM_expm2);

void BM_fundamental_endpoint(benchmark::State& state) {
    const double zeta = static_cast<double>(state.range(0));
    GridSpec grid(1.0, 256);
    auto pot = presets::smooth_beta(grid);
    const PoleSet poles = presets::two_pole();
    const cplx lambda = map_mu_to_lambda(0, cplx(zeta, -8.0), poles);
    for (auto _ : state)
        benchmark::DoNotOptimize(fundamental_endpoint(pot, poles, lambda, 1.0, OdeOptions{}));
    state.SetLabel("steps=" + std::to_string(recommended_steps(poles, lambda, 1.0, OdeOptions{})));
}
BENCHMARK(BM_fundamental_endpoint)->Arg(4)->Arg(64)->Arg(512);

void BM_wt_sample(benchmark::State& state) {
    GridSpec grid(1.0, 256);
    auto pot = presets::smooth_beta(grid);
    const PoleSet poles = presets::two_pole();
    for (auto _ : state)
        benchmark::DoNotOptimize(wt_sample(pot, poles, 0, cplx(64.0, -8.0), 1.0));
}
BENCHMARK(BM_wt_sample);

void BM_resolvent_apply(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    GridSpec grid(1.0, n);
    PoleSet poles{{0.5}, {1}};
    Eigen::VectorXcd f = Eigen::VectorXcd::Ones(grid.nodes());
    for (auto _ : state)
        benchmark::DoNotOptimize(resolvent_apply(poles, 0, cplx(0.5, 4.0), grid, f));
}
BENCHMARK(BM_resolvent_apply)->Arg(128)->Arg(512);

void BM_assemble_S(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    GridSpec grid(1.0, n);
    auto cols = presets::smooth_columns(grid);
    const PoleSet poles = presets::two_pole();
    for (auto _ : state) benchmark::DoNotOptimize(assemble_S(cols, poles, grid));
}
BENCHMARK(BM_assemble_S)->Arg(64)->Arg(128)->Arg(256);

void BM_inverse_sweep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    GridSpec grid(1.0, n);
    SNode node = assemble_S(presets::smooth_columns(grid), presets::two_pole(), grid);
    for (auto _ : state) benchmark::DoNotOptimize(inverse_sweep(node));
}
BENCHMARK(BM_inverse_sweep)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_synth_phi2(benchmark::State& state) {
    WeylData data;
    data.poles = presets::two_pole();
    data.eta = -8.0;
    data.zeta = make_zeta_grid(256.0, 1024);
    data.samples.assign(2, std::vector<cplx>(1024));
    for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 1024; ++j) {
            const cplx mu(data.zeta[j], data.eta);
            data.samples[k][j] = 0.2 - 0.6 / (2.0 + 2.0 * iu * mu);
        }
    GridSpec grid(1.0, 256);
    for (auto _ : state) benchmark::DoNotOptimize(synth_phi2(data, grid));
}
BENCHMARK(BM_synth_phi2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
