#include <benchmark/benchmark.h>

#include "heatlab/bath.hpp"
#include "heatlab/chain.hpp"
#include "heatlab/fit.hpp"
#include "heatlab/greens.hpp"
#include "heatlab/steady_state.hpp"

using namespace heatlab;

namespace {

ChainParams params(int K, int N) {
    ChainParams p;
    p.K = K;
    p.N = N;
    return p;
}

struct Instance {
    SystemSpectrum spectrum;
    CouplingKernel x1;
    CouplingKernel x2;
};

Instance instance(int K, int N) {
    const ChainParams p = params(K, N);
    RngStream rng(3);
    const ChainHamiltonian h = sample_chain_hamiltonian(p, rng);
    Instance inst{diagonalize_chain(h), {}, {}};
    BathSpec b1, b2;
    b1.delta = b2.delta = 10.0 * spectral_range_estimate(h);
    b2.end = ChainEnd::Right;
    inst.x1 = eigenbasis_coupling(build_surface_operator(b1, p), b1, inst.spectrum);
    inst.x2 = eigenbasis_coupling(build_surface_operator(b2, p), b2, inst.spectrum);
    return inst;
}

void BM_Diagonalize(benchmark::State& state) {
    const ChainParams p = params(static_cast<int>(state.range(0)), 100);
    RngStream rng(1);
    const ChainHamiltonian h = sample_chain_hamiltonian(p, rng);
    for (auto _ : state) benchmark::DoNotOptimize(diagonalize_chain(h));
}
BENCHMARK(BM_Diagonalize)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_PasturSolve(benchmark::State& state) {
    const ChainParams p = params(static_cast<int>(state.range(0)), 100);
    const std::vector<double> grid = linspace(-2.5, 2.5, 401);
    for (auto _ : state) benchmark::DoNotOptimize(pastur_solve(p, grid, 0.02));
}
BENCHMARK(BM_PasturSolve)->Arg(2)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_StationaryExact(benchmark::State& state) {
    const Instance inst = instance(static_cast<int>(state.range(0)), 50);
    const RateMatrix w1 = rate_matrix(inst.x1, 0.8, inst.spectrum);
    const RateMatrix w2 = rate_matrix(inst.x2, 1.2, inst.spectrum);
    for (auto _ : state) benchmark::DoNotOptimize(stationary_exact(w1, w2));
}
BENCHMARK(BM_StationaryExact)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_LinearizedSolve(benchmark::State& state) {
    const Instance inst = instance(static_cast<int>(state.range(0)), 50);
    const PerturbationObjects p1 = perturbation_objects(inst.x1, 1.0, inst.spectrum);
    const PerturbationObjects p2 = perturbation_objects(inst.x2, 1.0, inst.spectrum);
    for (auto _ : state) benchmark::DoNotOptimize(linearized_solve(p1, p2, 0.5, 0.01));
}
BENCHMARK(BM_LinearizedSolve)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
