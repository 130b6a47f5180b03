#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "echolab/types.hpp"

namespace echolab::synth {

enum class ScheduleKind { kShbDecay, kShbDecayBfield, k2ppe, k3ppe, kStarkSweep, kPowerSweep };

std::string_view to_string(ScheduleKind kind);
/// Accepts the tags shb-decay, shb-decay-bfield, 2ppe, 3ppe, stark-sweep,
/// power-sweep. Throws InvalidArgument otherwise.
ScheduleKind parse_schedule_kind(std::string_view tag);

struct ExperimentSchedule {
  ScheduleKind kind;
  std::vector<double> values;  // sample times or sweep values, base units
  std::vector<double> delays;  // 3PPE delay settings tD, seconds
  std::map<std::string, std::string> annotations;
};

struct ScheduleOptions {
  /// Waiting-time increment of the 3PPE grid.
  double ppe3_step = 5e-6;
};

/// Canonical measurement grid for an experiment kind:
///  - 2ppe: 100 ns to 1.8 us in 25 ns steps (69 delays)
///  - 3ppe: waiting times 1 us to 400 us in 5 us steps at delays 120/200/280 ns
///  - shb-decay: 40 log-spaced waiting times, 10 us to 15 ms
///  - shb-decay-bfield: 20 log-spaced waiting times, 100 ms to 6 s
///  - power-sweep: 10 log-spaced burn powers, 4 uW to 400 uW (watts)
///  - stark-sweep: fields -1000 to 1000 V/cm in 100 V/cm steps
ExperimentSchedule reference_schedule(ScheduleKind kind, const ScheduleOptions& options = {});

/// Multiplicative Gaussian noise plus an additive Gaussian floor.
struct NoiseModel {
  double relative_sigma = 0.0;
  double additive_floor = 0.0;
  std::uint64_t seed = 0;
};

/// Noisy samples of `model` over a single-series schedule. Each point gets
/// y = clean * (1 + relative_sigma * n1) + additive_floor * n2 and records the
/// applied standard deviation as its sigma. For a 3PPE schedule the schedule
/// must hold exactly one delay; use synthesize_sets for several.
///
/// Throws InvalidArgument if the model and schedule kinds do not match.
TimeSeries synthesize(std::string_view model, const NamedValues& params, const ExperimentSchedule& schedule,
                      const NoiseModel& noise);

/// One series per delay of a 3PPE schedule (`model` is 3ppe or
/// 3ppe-normalized). Every set draws from its own stream derived from the
/// seed and the set index.
std::vector<TimeSeries> synthesize_sets(std::string_view model, const NamedValues& params,
                                        const ExperimentSchedule& schedule, const NoiseModel& noise);

struct Tolerance {
  double value;
  bool relative = true;
};

struct RoundtripConfig {
  std::string model;  // hole-decay, mims, 3ppe or linear
  NamedValues truth;
  ExperimentSchedule schedule;
  NoiseModel noise;  // `seed` is the base seed
  std::size_t n_seeds = 1;
  std::map<std::string, Tolerance, std::less<>> tolerances;  // parameters judged
  unsigned threads = 0;                                      // 0 = hardware concurrency
};

struct ParameterRecovery {
  std::string name;
  double truth = 0.0;
  double median = 0.0;
  double lower = 0.0;  // 5th percentile
  double upper = 0.0;  // 95th percentile
  Tolerance tolerance;
  double pass_fraction = 0.0;
};

struct RoundtripReport {
  std::string model;
  std::size_t n_seeds = 0;
  std::size_t non_converged = 0;
  std::vector<std::uint64_t> non_converged_seeds;
  std::vector<ParameterRecovery> parameters;

  double min_pass_fraction() const;
};

/// Synthesizes and refits `n_seeds` experiments with seeds base..base+n-1.
/// A fit that does not converge counts as a miss for every parameter.
/// The report does not depend on thread count or completion order.
RoundtripReport montecarlo_roundtrip(const RoundtripConfig& config);

}  // namespace echolab::synth
