#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "echolab/error.hpp"
#include "echolab/model_registry.hpp"
#include "echolab/synth.hpp"
#include "echolab/trace_io.hpp"
#include "support.hpp"

namespace echolab::synth {
namespace {

const NamedValues kMims{{"i0", 1.0}, {"t2", 1.580e-6}, {"x", 1.072}};
const NamedValues kEcho{{"gamma0", 152e3}, {"gamma_sd", 930e3}, {"rate", 227e3}, {"t1e", 83e-6},
                        {"b", 0.23},       {"t1b", 2.4e-3},     {"i0", 1.0}};

TEST(Schedule, TwoPulseGrid) {
  const auto s = reference_schedule(ScheduleKind::k2ppe);
  ASSERT_EQ(s.values.size(), 69u);
  EXPECT_EQ(s.values.front(), 100e-9);
  EXPECT_EQ(s.values.back(), 1.8e-6);
  EXPECT_NEAR(s.values[1] - s.values[0], 25e-9, 1e-20);
}

TEST(Schedule, ThreePulseGrid) {
  const auto s = reference_schedule(ScheduleKind::k3ppe);
  EXPECT_EQ(s.delays, (std::vector<double>{120e-9, 200e-9, 280e-9}));
  EXPECT_EQ(s.values.front(), 1e-6);
  EXPECT_LE(s.values.back(), 400e-6);
  EXPECT_EQ(s.values.size(), 80u);
  const auto coarse = reference_schedule(ScheduleKind::k3ppe, {.ppe3_step = 10e-6});
  EXPECT_EQ(coarse.values.size(), 40u);
}

TEST(Schedule, LogSpacedGrids) {
  const auto shb = reference_schedule(ScheduleKind::kShbDecay);
  ASSERT_EQ(shb.values.size(), 40u);
  EXPECT_EQ(shb.values.front(), 10e-6);
  EXPECT_EQ(shb.values.back(), 15e-3);
  const auto field = reference_schedule(ScheduleKind::kShbDecayBfield);
  ASSERT_EQ(field.values.size(), 20u);
  EXPECT_EQ(field.values.front(), 0.1);
  EXPECT_EQ(field.values.back(), 6.0);
  const auto power = reference_schedule(ScheduleKind::kPowerSweep);
  ASSERT_EQ(power.values.size(), 10u);
  EXPECT_EQ(power.values.front(), 4e-6);
  EXPECT_EQ(power.values.back(), 400e-6);
  const double ratio = shb.values[1] / shb.values[0];
  for (std::size_t i = 2; i < shb.values.size(); ++i) EXPECT_NEAR(shb.values[i] / shb.values[i - 1], ratio, 1e-9);
}

TEST(Schedule, AllGridsStrictlyIncreasing) {
  for (auto kind : {ScheduleKind::kShbDecay, ScheduleKind::kShbDecayBfield, ScheduleKind::k2ppe, ScheduleKind::k3ppe,
                    ScheduleKind::kStarkSweep, ScheduleKind::kPowerSweep}) {
    const auto s = reference_schedule(kind);
    ASSERT_FALSE(s.values.empty());
    for (std::size_t i = 1; i < s.values.size(); ++i) EXPECT_LT(s.values[i - 1], s.values[i]) << to_string(kind);
  }
}

TEST(Schedule, Tags) {
  EXPECT_EQ(parse_schedule_kind("shb-decay-bfield"), ScheduleKind::kShbDecayBfield);
  EXPECT_EQ(to_string(ScheduleKind::kPowerSweep), "power-sweep");
  EXPECT_THROW(parse_schedule_kind("4ppe"), InvalidArgument);
}

TEST(Synthesize, NoiselessEqualsModel) {
  const auto schedule = reference_schedule(ScheduleKind::k2ppe);
  const auto series = synthesize("mims", kMims, schedule, {});
  const auto& model = fit::find_model("mims");
  ASSERT_EQ(series.size(), schedule.values.size());
  for (const auto& p : series.points()) {
    EXPECT_EQ(p.y, fit::evaluate(model, kMims, p.t));
    EXPECT_FALSE(p.sigma);
  }
}

TEST(Synthesize, NoiselessSetsEqualModel) {
  const auto sets = synthesize_sets("3ppe", kEcho, reference_schedule(ScheduleKind::k3ppe), {});
  ASSERT_EQ(sets.size(), 3u);
  const auto& model = fit::find_model("3ppe");
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const auto ctx = model.bind(sets[k], k);
    for (const auto& p : sets[k].points()) EXPECT_EQ(p.y, fit::evaluate(model, kEcho, p.t, ctx));
  }
  EXPECT_EQ(sets[2].meta_number("delay_seconds"), 280e-9);
}

TEST(Synthesize, SigmaIsAppliedDeviation) {
  const auto series = synthesize("mims", kMims, reference_schedule(ScheduleKind::k2ppe), {0.03, 1e-3, 4});
  const auto& model = fit::find_model("mims");
  for (const auto& p : series.points()) {
    const double clean = fit::evaluate(model, kMims, p.t);
    ASSERT_TRUE(p.sigma);
    EXPECT_DOUBLE_EQ(*p.sigma, std::hypot(0.03 * clean, 1e-3));
  }
}

TEST(Synthesize, RejectsIncompatibleSchedule) {
  EXPECT_THROW(synthesize("mims", kMims, reference_schedule(ScheduleKind::kShbDecay), {}), InvalidArgument);
  EXPECT_THROW(synthesize("3ppe", kEcho, reference_schedule(ScheduleKind::k3ppe), {}), InvalidArgument);
  EXPECT_THROW(synthesize_sets("mims", kMims, reference_schedule(ScheduleKind::k2ppe), {}), InvalidArgument);
  EXPECT_THROW(synthesize("mims", kMims, reference_schedule(ScheduleKind::k2ppe), {-0.1, 0.0, 0}), InvalidArgument);
}

std::string bytes(const TimeSeries& series) {
  std::ostringstream out;
  io::write_trace(out, series);
  return out.str();
}

TEST(SynthProperty, SameSeedSameBytes) {
  testing::for_all(50, [](testing::Gen& g) {
    const NoiseModel noise{g.uniform(0.0, 0.1), g.uniform(0.0, 1e-2), g.seed()};
    const auto schedule = reference_schedule(ScheduleKind::k2ppe);
    EXPECT_EQ(bytes(synthesize("mims", kMims, schedule, noise)), bytes(synthesize("mims", kMims, schedule, noise)));
    NoiseModel other = noise;
    other.seed += 1;
    if (noise.relative_sigma > 0) {
      EXPECT_NE(bytes(synthesize("mims", kMims, schedule, noise)), bytes(synthesize("mims", kMims, schedule, other)));
    }
  });
}

TEST(Roundtrip, SingleNoiselessSeed) {
  RoundtripConfig config{"mims", kMims, reference_schedule(ScheduleKind::k2ppe), {}, 1,
                         {{"t2", {1e-5}}, {"x", {1e-5}}, {"i0", {1e-5}}}};
  const auto report = montecarlo_roundtrip(config);
  EXPECT_EQ(report.non_converged, 0u);
  for (const auto& p : report.parameters) {
    EXPECT_LE(testing::rel_err(p.median, p.truth), 1e-5) << p.name;
    EXPECT_EQ(p.pass_fraction, 1.0);
  }
}

TEST(Roundtrip, IndependentOfThreadCount) {
  RoundtripConfig config{"hole-decay",
                         {{"b", 0.436}, {"t1e", 82e-6}, {"t1b", 2.364e-3}, {"amplitude", 1.0}},
                         reference_schedule(ScheduleKind::kShbDecay),
                         {0.02, 0.0, 100},
                         24,
                         {{"b", {0.05}}, {"t1e", {0.05}}, {"t1b", {0.05}}}};
  config.threads = 1;
  const auto serial = montecarlo_roundtrip(config);
  config.threads = 4;
  const auto parallel = montecarlo_roundtrip(config);
  ASSERT_EQ(serial.parameters.size(), parallel.parameters.size());
  for (std::size_t i = 0; i < serial.parameters.size(); ++i) {
    EXPECT_EQ(serial.parameters[i].median, parallel.parameters[i].median);
    EXPECT_EQ(serial.parameters[i].lower, parallel.parameters[i].lower);
    EXPECT_EQ(serial.parameters[i].pass_fraction, parallel.parameters[i].pass_fraction);
  }
}

TEST(Roundtrip, IntervalsCoverTruth) {
  RoundtripConfig config{"linear", {{"slope", 2.5e9}, {"intercept", 1.5e6}}, reference_schedule(ScheduleKind::kPowerSweep),
                         {0.05, 0.0, 1}, 100, {{"intercept", {0.1e6, false}}, {"slope", {0.5}}}};
  const auto report = montecarlo_roundtrip(config);
  for (const auto& p : report.parameters) {
    EXPECT_LE(p.lower, p.truth) << p.name;
    EXPECT_GE(p.upper, p.truth) << p.name;
  }
  EXPECT_THROW(montecarlo_roundtrip({"linear", config.truth, config.schedule, {}, 0, {}}), InvalidArgument);
  EXPECT_THROW(montecarlo_roundtrip({"stark", {{"slope", 1.0}}, reference_schedule(ScheduleKind::kStarkSweep), {}, 1, {}}),
               InvalidArgument);
}

}  // namespace
}  // namespace echolab::synth
