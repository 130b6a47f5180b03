#include <benchmark/benchmark.h>

#include "echolab/model_registry.hpp"
#include "echolab/models.hpp"
#include "echolab/synth.hpp"

using namespace echolab;

static void BM_HoleDecay(benchmark::State& state) {
  const DecayModelParams p(0.436, 82e-6, 2.364e-3);
  double t = 1e-6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(models::hole_decay_fraction(t, p));
    t = t < 1e-2 ? t * 1.01 : 1e-6;
  }
}
BENCHMARK(BM_HoleDecay);

static void BM_StimulatedEcho(benchmark::State& state) {
  const DiffusionParams d(152e3, 930e3, 227e3);
  const DecayModelParams p(0.23, 83e-6, 2.4e-3);
  double tw = 1e-6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(models::stimulated_echo_intensity(200e-9, tw, 1.0, d, p));
    tw = tw < 1e-3 ? tw * 1.01 : 1e-6;
  }
}
BENCHMARK(BM_StimulatedEcho);

static void BM_JacobianThreePulse(benchmark::State& state) {
  const auto grid = synth::reference_schedule(synth::ScheduleKind::k3ppe).values;
  const NamedValues p{{"gamma0", 152e3}, {"gamma_sd", 930e3}, {"rate", 227e3}, {"t1e", 83e-6},
                      {"b", 0.23},       {"t1b", 2.4e-3},     {"i0", 1.0}};
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit::jacobian("3ppe", p, grid, fit::SeriesContext{0, 200e-9}));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(grid.size()));
}
BENCHMARK(BM_JacobianThreePulse);
BENCHMARK_MAIN();
