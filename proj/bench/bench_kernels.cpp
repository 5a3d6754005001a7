// Serial vs OpenMP Jacobi sweep and residual audit on an n^3 block.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "itercomm/solver/kernels.hpp"
#include "itercomm/solver/problem.hpp"

using namespace itercomm::solver;

namespace {

struct Fixture {
  DiscreteSystem sys;
  std::vector<double> u, b, un, r;
  SweepArgs args;

  explicit Fixture(int n) {
    ProblemSpec s;
    s.n = n;
    sys = discretize(s);
    const std::size_t m = static_cast<std::size_t>(n) * n * n;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    u.resize(m);
    b.resize(m);
    for (auto& x : u) x = d(rng);
    for (auto& x : b) x = d(rng);
    un.resize(m);
    r.resize(m);
    args.ext = {n, n, n};
    args.u_old = u.data();
    args.rhs = b.data();
    args.stencil = sys.stencil;
    args.u_new = un.data();
    args.residual = r.data();
  }
};

void sweep(benchmark::State& st, KernelKind kind) {
  Fixture f(static_cast<int>(st.range(0)));
  for (auto _ : st) {
    jacobi_sweep(kind, f.args);
    benchmark::DoNotOptimize(f.un.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.u.size()));
}

void residual(benchmark::State& st, bool parallel) {
  Fixture f(static_cast<int>(st.range(0)));
  for (auto _ : st) {
    double v = parallel ? global_residual_inf_openmp(f.sys, f.u.data(), f.b.data())
                        : global_residual_inf_serial(f.sys, f.u.data(), f.b.data());
    benchmark::DoNotOptimize(v);
  }
  st.SetItemsProcessed(st.iterations() * static_cast<std::int64_t>(f.u.size()));
}

}  // namespace

BENCHMARK_CAPTURE(sweep, serial, KernelKind::serial)->Arg(16)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK_CAPTURE(sweep, openmp, KernelKind::openmp)->Arg(16)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK_CAPTURE(residual, serial, false)->Arg(32)->Arg(64)->Arg(128);
BENCHMARK_CAPTURE(residual, openmp, true)->Arg(32)->Arg(64)->Arg(128);

BENCHMARK_MAIN();
