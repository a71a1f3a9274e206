// Serial reference against OpenMP kernels.

#include <random>

#include <benchmark/benchmark.h>

#include "koopmoo/abm.hpp"
#include "koopmoo/gedmd.hpp"
#include "koopmoo/moo.hpp"

using namespace koopmoo;

namespace {

Exec policy(const benchmark::State& state) { return state.range(0) == 0 ? Exec::serial : Exec::parallel; }

std::vector<SamplePoint> poly_samples(int m) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<SamplePoint> out;
  for (int k = 0; k < m; ++k) {
    Vector x(3);
    x << unif(rng), unif(rng), unif(rng);
    Vector b = -x;
    b(0) += x(1) * x(2);
    out.push_back({x, b, Matrix::Identity(3, 3) * (1.0 + x.squaredNorm())});
  }
  return out;
}

void BM_build_matrices(benchmark::State& state) {
  const auto dict = Dictionary::monomials(3, 5);
  const auto samples = poly_samples(2000);
  for (auto _ : state) benchmark::DoNotOptimize(build_matrices(dict, samples, policy(state)));
}

void BM_km_estimate(benchmark::State& state) {
  const auto prop = voter_propagator(VoterParams{});
  for (auto _ : state) {
    benchmark::DoNotOptimize(km_estimate(prop, Vector::Constant(1, 0.4), Vector::Zero(2), 0.01, 4000, 3, policy(state)));
  }
}

void BM_ensemble_mean(benchmark::State& state) {
  const auto p = SirParams::two_group(1000.0, 0.2, 0.02, 0.015, 0.015, 0.1, 0.01);
  Vector x0(4);
  x0 << 0.79, 0.19, 0.01, 0.01;
  const auto schedule = ControlSchedule::constant(Vector::Zero(2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ensemble_mean(
        [&](Rng& rng) {
          const auto t = simulate_sir(p, schedule, x0, 200.0, 1.0, rng(), 200);
          return Vector(t.states.row(t.states.rows() - 1).transpose());
        },
        200, 5, policy(state)));
  }
}

void BM_nondominance_filter(benchmark::State& state) {
  const Evaluator f = [](const Vector& y) {
    Vector v(2);
    v << y.squaredNorm(), (y - Vector::Ones(y.size())).squaredNorm();
    return v;
  };
  Vector lo = Vector::Constant(2, -1.0);
  Vector hi = Vector::Constant(2, 2.0);
  for (auto _ : state) {
    state.PauseTiming();
    BoxTree tree(Box::from_bounds(lo, hi));
    for (int k = 0; k < 8; ++k) tree.subdivide();
    ParetoArchive archive;
    state.ResumeTiming();
    benchmark::DoNotOptimize(nondominance_filter(tree, f, archive, {20, 1, policy(state)}));
  }
}

}  // namespace

BENCHMARK(BM_build_matrices)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_km_estimate)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ensemble_mean)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_nondominance_filter)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
