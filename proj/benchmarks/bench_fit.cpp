#include <benchmark/benchmark.h>

#include "echolab/procedures.hpp"
#include "echolab/synth.hpp"

using namespace echolab;

static void BM_FitHoleDecay(benchmark::State& state) {
  const auto data = synth::synthesize("hole-decay", {{"b", 0.436}, {"t1e", 82e-6}, {"t1b", 2.364e-3}, {"amplitude", 1.0}},
                                      synth::reference_schedule(synth::ScheduleKind::kShbDecay), {0.02, 0.0, 3});
  for (auto _ : state) benchmark::DoNotOptimize(fit::fit_hole_decay(data));
}
BENCHMARK(BM_FitHoleDecay)->Unit(benchmark::kMicrosecond);

static void BM_FitMims(benchmark::State& state) {
  const auto data = synth::synthesize("mims", {{"i0", 1.0}, {"t2", 1.580e-6}, {"x", 1.072}},
                                      synth::reference_schedule(synth::ScheduleKind::k2ppe), {0.03, 0.0, 3});
  for (auto _ : state) benchmark::DoNotOptimize(fit::fit_mims(data));
}
BENCHMARK(BM_FitMims)->Unit(benchmark::kMicrosecond);

static void BM_FitThreePulseJoint(benchmark::State& state) {
  const auto sets = synth::synthesize_sets(
      "3ppe",
      {{"gamma0", 152e3}, {"gamma_sd", 930e3}, {"rate", 227e3}, {"t1e", 83e-6}, {"b", 0.23}, {"t1b", 2.4e-3}, {"i0", 1.0}},
      synth::reference_schedule(synth::ScheduleKind::k3ppe), {0.03, 1e-3, 3});
  for (auto _ : state) benchmark::DoNotOptimize(fit::fit_3ppe_joint(sets, 2.4e-3));
}
BENCHMARK(BM_FitThreePulseJoint)->Unit(benchmark::kMicrosecond);

static void BM_RoundtripHoleDecay(benchmark::State& state) {
  synth::RoundtripConfig c{"hole-decay",
                           {{"b", 0.436}, {"t1e", 82e-6}, {"t1b", 2.364e-3}, {"amplitude", 1.0}},
                           synth::reference_schedule(synth::ScheduleKind::kShbDecay),
                           {0.02, 0.0, 1},
                           static_cast<std::size_t>(state.range(0)),
                           {{"t1e", {0.05}}}};
  for (auto _ : state) benchmark::DoNotOptimize(synth::montecarlo_roundtrip(c));
}
BENCHMARK(BM_RoundtripHoleDecay)->Arg(100)->Unit(benchmark::kMillisecond);
