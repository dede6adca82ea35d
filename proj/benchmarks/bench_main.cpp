#include <benchmark/benchmark.h>

#include "nlbs/closed_form.hpp"
#include "nlbs/fd_solver.hpp"

namespace {

const nlbs::MarketParams kMarket{0.35, 0.1, 0.0};
const nlbs::ClosedFormParams kMember =
    nlbs::ClosedFormParams::explicit_family(0.5, 0.0, 0.0, 0.35);

void BM_invariant_u(benchmark::State& state) {
    double S = 0.1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(nlbs::invariant_u(S, 0.5, kMember, kMarket));
        S = S < 2.0 ? S + 1e-3 : 0.1;
    }
}
BENCHMARK(BM_invariant_u);

void BM_implicit_call_full(benchmark::State& state) {
    const nlbs::GridSpec grid{0.1, 2.0, static_cast<std::size_t>(state.range(0)), 18, 0.9};
    const nlbs::Payoff call = nlbs::Call{0.914, 1.0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(nlbs::implicit_solve_backward(call, grid, kMarket));
    }
}
BENCHMARK(BM_implicit_call_full)->Arg(39)->Arg(78);

void BM_implicit_benchmark_layerset(benchmark::State& state) {
    const nlbs::GridSpec grid{0.1, 2.0, 42, 30, 0.1};
    const nlbs::Payoff snap = nlbs::ClosedFormSnapshot{kMember, kMarket, 0.1};
    nlbs::SolverConfig cfg;
    cfg.newton_tol = 1e-7;
    cfg.boundary_policy = nlbs::BoundaryPolicy::exact_closed_form;
    for (auto _ : state) {
        benchmark::DoNotOptimize(nlbs::implicit_solve_backward(snap, grid, kMarket, cfg));
    }
}
BENCHMARK(BM_implicit_benchmark_layerset);

void BM_linear_fd(benchmark::State& state) {
    const nlbs::GridSpec grid{0.1, 2.0, 39, 18, 0.9};
    const nlbs::MarketParams p{0.35, 0.0, 0.02};
    const nlbs::Payoff call = nlbs::Call{0.914, 1.0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(nlbs::linear_fd_solve(call, grid, p));
    }
}
BENCHMARK(BM_linear_fd);

}  // namespace

BENCHMARK_MAIN();
