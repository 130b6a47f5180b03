#pragma once

#include <optional>
#include <vector>

#include "echolab/fit.hpp"
#include "echolab/types.hpp"

namespace echolab::fit {

struct HoleDecayOptions {
  /// False: the trace is the normalised ratio d(t)/d(0) and `amplitude` is
  /// held at 1. True: `amplitude` is fitted along with the rest.
  bool free_amplitude = false;
};

/// Two-exponential fit of a hole-decay trace over {b, t1e, t1b, amplitude}.
///
/// Starting values come from log-linear fits to the early and late segments.
/// The result labels the faster lifetime t1e. `derived` carries `beta` when
/// t1b > t1e. Throws InvalidArgument for fewer than 6 points.
FitResult fit_hole_decay(const TimeSeries& data, const HoleDecayOptions& options = {});

/// Mims fit over {i0, t2, x}; `derived` carries `homogeneous_linewidth`
/// = 1 / (pi T2). Throws InvalidArgument for fewer than 8 points, a
/// non-positive delay, or data without any variation.
FitResult fit_mims(const TimeSeries& data);

enum class AmplitudeMode {
  /// One I0 for all delay sets. Requires absolute intensities across sets and
  /// is the only mode in which gamma0 is identifiable.
  kShared,
  /// Every set is divided by its earliest point and gets its own amplitude
  /// i0_k. Constant-in-tW factors cancel, so gamma0 must be supplied.
  kPerSetNormalized,
};

struct StimulatedEchoOptions {
  AmplitudeMode amplitude_mode = AmplitudeMode::kShared;
  std::optional<double> fixed_gamma0;
};

/// Joint fit of three-pulse echo decays recorded at several delays.
///
/// Each series is one delay setting, annotated with `delay_seconds`, and is
/// sampled over the waiting time. Shared parameters: gamma0, gamma_sd, rate,
/// t1e, b; t1b is held at `fixed_t1b`.
FitResult fit_3ppe_joint(const std::vector<TimeSeries>& datasets, double fixed_t1b,
                         const StimulatedEchoOptions& options = {});

struct PowerWidth {
  double power;  // watts
  double width;  // hertz
  std::optional<double> sigma;
};

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double intercept_sigma = 0.0;
  double slope_sigma = 0.0;
  double covariance = 0.0;  // cov(intercept, slope)
  double residual_norm = 0.0;
  std::size_t degrees_of_freedom = 0;
};

/// Weighted straight-line fit of hole width against burn power; the
/// intercept is the zero-power width. Needs at least two distinct powers,
/// all nonnegative.
LinearFit extrapolate_zero_power(const std::vector<PowerWidth>& points);

}  // namespace echolab::fit
