#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "echolab/error.hpp"
#include "echolab/models.hpp"
#include "echolab/procedures.hpp"
#include "echolab/synth.hpp"
#include "support.hpp"

namespace echolab::fit {
namespace {

using testing::rel_err;

const NamedValues kHoleTruth{{"b", 0.436}, {"t1e", 82e-6}, {"t1b", 2.364e-3}, {"amplitude", 1.0}};
const NamedValues kMimsTruth{{"i0", 1.0}, {"t2", 1.580e-6}, {"x", 1.072}};
const NamedValues kEchoTruth{{"gamma0", 152e3}, {"gamma_sd", 930e3}, {"rate", 227e3}, {"t1e", 83e-6},
                             {"b", 0.23},       {"t1b", 2.4e-3},     {"i0", 1.0}};

bool mentions(const FitResult& r, const std::string& needle) {
  for (const auto& d : r.diagnostics) {
    if (d.find(needle) != std::string::npos) return true;
  }
  return false;
}

TEST(HoleDecayFit, NoiselessRecovery) {
  const auto data = synth::synthesize("hole-decay", kHoleTruth, synth::reference_schedule(synth::ScheduleKind::kShbDecay), {});
  const auto r = fit_hole_decay(data);
  ASSERT_TRUE(r.converged);
  for (auto name : {"b", "t1e", "t1b"}) EXPECT_LE(rel_err(r.value(name), kHoleTruth.at(name)), 1e-6) << name;
  EXPECT_EQ(r.fixed_params.at("amplitude"), 1.0);
  EXPECT_LE(rel_err(r.derived.at("beta"), models::beta_from_B(DecayModelParams(0.436, 82e-6, 2.364e-3))), 1e-6);
}

TEST(HoleDecayFit, FreeAmplitude) {
  auto truth = kHoleTruth;
  truth.set("amplitude", 0.37);
  const auto data = synth::synthesize("hole-decay", truth, synth::reference_schedule(synth::ScheduleKind::kShbDecay), {});
  const auto r = fit_hole_decay(data, {.free_amplitude = true});
  ASSERT_TRUE(r.converged);
  EXPECT_LE(rel_err(r.value("amplitude"), 0.37), 1e-6);
  EXPECT_LE(rel_err(r.value("t1e"), 82e-6), 1e-6);
}

TEST(HoleDecayFit, MagneticFieldTimescale) {
  const NamedValues truth{{"b", 0.55}, {"t1e", 0.3}, {"t1b", 2.1}, {"amplitude", 1.0}};
  const auto data =
      synth::synthesize("hole-decay", truth, synth::reference_schedule(synth::ScheduleKind::kShbDecayBfield), {});
  const auto r = fit_hole_decay(data);
  ASSERT_TRUE(r.converged);
  for (auto name : {"b", "t1e", "t1b"}) EXPECT_LE(rel_err(r.value(name), truth.at(name)), 1e-6) << name;
}

TEST(HoleDecayFit, WarnsWhenLifetimesAreClose) {
  const NamedValues truth{{"b", 0.4}, {"t1e", 1e-3}, {"t1b", 2e-3}, {"amplitude", 1.0}};
  const auto data = synth::synthesize("hole-decay", truth, synth::reference_schedule(synth::ScheduleKind::kShbDecay), {});
  const auto r = fit_hole_decay(data);
  EXPECT_TRUE(mentions(r, "identifiability"));
}

TEST(HoleDecayFit, RejectsShortTraces) {
  std::vector<Sample> pts;
  for (int i = 0; i < 5; ++i) pts.push_back({1e-5 * (i + 1), std::exp(-i * 0.3), 0.01});
  EXPECT_THROW(fit_hole_decay(TimeSeries(pts, YUnit::kOpticalDepthFraction)), InvalidArgument);
}

TEST(HoleDecayFitProperty, LabelsFasterLifetimeAsT1e) {
  testing::for_all(30, [](testing::Gen& g) {
    const double fast = g.log_uniform(30e-6, 200e-6);
    const NamedValues truth{{"b", g.uniform(0.2, 0.8)}, {"t1e", fast}, {"t1b", fast * g.log_uniform(8.0, 40.0)}, {"amplitude", 1.0}};
    const auto data = synth::synthesize("hole-decay", truth, synth::reference_schedule(synth::ScheduleKind::kShbDecay),
                                        {0.005, 0.0, g.seed()});
    const auto r = fit_hole_decay(data);
    EXPECT_TRUE(r.converged);
    EXPECT_LT(r.value("t1e"), r.value("t1b"));
    EXPECT_LE(rel_err(r.value("t1e"), fast), 0.05);
  });
}

TEST(MimsFit, NoiselessRecoveryAndWidth) {
  const auto data = synth::synthesize("mims", kMimsTruth, synth::reference_schedule(synth::ScheduleKind::k2ppe), {});
  const auto r = fit_mims(data);
  ASSERT_TRUE(r.converged);
  for (auto name : {"i0", "t2", "x"}) EXPECT_LE(rel_err(r.value(name), kMimsTruth.at(name)), 1e-6) << name;
  EXPECT_LE(rel_err(r.derived.at("homogeneous_linewidth"), 201461.95328088017), 1e-6);
  EXPECT_TRUE(mentions(r, "homogeneous linewidth"));
}

TEST(MimsFit, PureExponentialTruth) {
  const NamedValues truth{{"i0", 1.0}, {"t2", 1.580e-6}, {"x", 1.0}};
  const auto schedule = synth::reference_schedule(synth::ScheduleKind::k2ppe);
  int within = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto r = fit_mims(synth::synthesize("mims", truth, schedule, {0.03, 0.0, seed}));
    within += r.converged && std::abs(r.value("x") - 1.0) <= 0.02;
  }
  EXPECT_GE(within, 45);
}

TEST(MimsFit, RejectsDegenerateInput) {
  std::vector<Sample> flat;
  for (int i = 0; i < 10; ++i) flat.push_back({1e-7 * (i + 1), 0.5, {}});
  EXPECT_THROW(fit_mims(TimeSeries(flat, YUnit::kIntensity)), InvalidArgument);
  std::vector<Sample> short_trace(flat.begin(), flat.begin() + 7);
  short_trace.back().y = 0.1;
  EXPECT_THROW(fit_mims(TimeSeries(short_trace, YUnit::kIntensity)), InvalidArgument);
  std::vector<Sample> from_zero{{0.0, 1.0, {}}};
  for (int i = 1; i < 10; ++i) from_zero.push_back({1e-7 * i, std::exp(-0.2 * i), {}});
  EXPECT_THROW(fit_mims(TimeSeries(from_zero, YUnit::kIntensity)), InvalidArgument);
}

std::vector<TimeSeries> echo_sets(const NamedValues& truth, const synth::NoiseModel& noise = {}) {
  return synth::synthesize_sets("3ppe", truth, synth::reference_schedule(synth::ScheduleKind::k3ppe), noise);
}

TEST(StimulatedEchoFit, NoiselessSharedAmplitude) {
  const auto r = fit_3ppe_joint(echo_sets(kEchoTruth), 2.4e-3);
  ASSERT_TRUE(r.converged);
  for (auto name : {"gamma0", "gamma_sd", "rate", "t1e", "b", "i0"}) {
    EXPECT_LE(rel_err(r.value(name), kEchoTruth.at(name)), 1e-5) << name;
  }
  EXPECT_EQ(r.fixed_params.at("t1b"), 2.4e-3);
  EXPECT_EQ(r.model, "3ppe");
}

TEST(StimulatedEchoFit, NoiselessPerSetNormalised) {
  StimulatedEchoOptions options;
  options.amplitude_mode = AmplitudeMode::kPerSetNormalized;
  options.fixed_gamma0 = 152e3;
  const auto r = fit_3ppe_joint(echo_sets(kEchoTruth), 2.4e-3, options);
  ASSERT_TRUE(r.converged);
  EXPECT_EQ(r.model, "3ppe-normalized");
  for (auto name : {"gamma_sd", "rate", "t1e", "b"}) EXPECT_LE(rel_err(r.value(name), kEchoTruth.at(name)), 1e-5) << name;
  EXPECT_TRUE(r.estimates.contains("i0_2"));
}

TEST(StimulatedEchoFit, NormalisedModeNeedsGamma0) {
  StimulatedEchoOptions options;
  options.amplitude_mode = AmplitudeMode::kPerSetNormalized;
  EXPECT_THROW(fit_3ppe_joint(echo_sets(kEchoTruth), 2.4e-3, options), InvalidArgument);
}

TEST(StimulatedEchoFit, SingleSetWarns) {
  const auto sets = echo_sets(kEchoTruth, {0.01, 0.0, 3});
  const auto r = fit_3ppe_joint({sets[1]}, 2.4e-3);
  EXPECT_TRUE(mentions(r, "single delay set"));
}

TEST(StimulatedEchoFit, RequiresDelayAnnotations) {
  auto sets = echo_sets(kEchoTruth);
  sets[0] = TimeSeries(sets[0].points(), sets[0].y_unit());
  EXPECT_THROW(fit_3ppe_joint(sets, 2.4e-3), InvalidArgument);
  EXPECT_THROW(fit_3ppe_joint({}, 2.4e-3), InvalidArgument);
  EXPECT_THROW(fit_3ppe_joint(echo_sets(kEchoTruth), 0.0), InvalidArgument);
}

TEST(StimulatedEchoFit, NoDiffusionLimit) {
  auto truth = kEchoTruth;
  truth.set("gamma_sd", 0.0);
  const auto sets = echo_sets(truth, {0.03, 1e-3, 17});
  const auto r = fit_3ppe_joint(sets, 2.4e-3);
  const double gsd = r.value("gamma_sd");
  EXPECT_LE(gsd, 2.0 * r.uncertainties.at("gamma_sd")) << "gamma_sd = " << gsd;
  // With no diffusion the echo follows F(tW) times a tW-independent factor.
  const DecayModelParams p(r.value("b"), r.value("t1e"), 2.4e-3);
  const DiffusionParams d(r.value("gamma0"), gsd, r.value("rate"));
  for (const auto& ds : sets) {
    const double td = *ds.meta_number("delay_seconds");
    const double base = models::stimulated_echo_intensity(td, 1e-6, r.value("i0"), d, p);
    for (const double tw : {50e-6, 150e-6, 300e-6}) {
      const double ratio = models::stimulated_echo_intensity(td, tw, r.value("i0"), d, p) / base;
      const double f_only = models::population_factor(tw, p) / models::population_factor(1e-6, p);
      EXPECT_NEAR(ratio / f_only, 1.0, 0.05);
    }
  }
}

TEST(ZeroPower, ExactTwoPoints) {
  const auto line = extrapolate_zero_power({{0.0, 1e6, {}}, {1e-6, 2e6, {}}});
  EXPECT_NEAR(line.intercept, 1e6, 1e-6);
  EXPECT_LE(rel_err(line.slope, 1e12), 1e-12);
  EXPECT_NEAR(line.residual_norm, 0.0, 1e-6);
  EXPECT_EQ(line.degrees_of_freedom, 0u);
}

TEST(ZeroPower, ConstantWidths) {
  const auto line = extrapolate_zero_power({{4e-6, 1.5e6, 1e4}, {4e-5, 1.5e6, 1e4}, {4e-4, 1.5e6, 1e4}});
  EXPECT_NEAR(line.intercept, 1.5e6, 1e-6);
  EXPECT_NEAR(line.slope, 0.0, 1e-3);
}

TEST(ZeroPower, RejectsBadInput) {
  EXPECT_THROW(extrapolate_zero_power({{-1e-6, 1e6, {}}, {1e-6, 2e6, {}}}), InvalidArgument);
  EXPECT_THROW(extrapolate_zero_power({{1e-6, 1e6, {}}, {1e-6, 2e6, {}}}), InvalidArgument);
  EXPECT_THROW(extrapolate_zero_power({{1e-6, 1e6, 0.0}, {2e-6, 2e6, {}}}), InvalidArgument);
}

TEST(ZeroPowerProperty, RecoversNoiselessLines) {
  testing::for_all(200, [](testing::Gen& g) {
    const double a = g.log_uniform(1e5, 1e7);
    const double b = g.uniform(-1e9, 1e10);
    std::vector<PowerWidth> pts;
    const int n = g.integer(2, 12);
    for (int i = 0; i < n; ++i) {
      const double p = g.log_uniform(1e-6, 1e-3);
      pts.push_back({p, a + b * p, std::nullopt});
    }
    const auto line = extrapolate_zero_power(pts);
    EXPECT_LE(std::abs(line.intercept - a), 1e-6 * (a + std::abs(b) * 1e-3));
  });
}

}  // namespace
}  // namespace echolab::fit
