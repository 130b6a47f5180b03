#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

#include "echolab/model_registry.hpp"
#include "echolab/types.hpp"

namespace echolab::fit {

enum class Weighting { kUniform, kPerPointSigma };

struct Bounds {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct FitProblem {
  std::string model;
  std::vector<TimeSeries> data;
  NamedValues free_params;  // initial guesses
  NamedValues fixed_params;
  std::map<std::string, Bounds, std::less<>> bounds;
  Weighting weighting = Weighting::kPerPointSigma;
  int max_iterations = 200;
};

/// Weighted nonlinear least squares by damped Gauss-Newton
/// (Levenberg-Marquardt schedule).
///
/// Positive parameters are optimised in log space and fractions through a
/// logistic map; bounds clamp the raw value. The covariance is (J^T W J)^-1
/// evaluated in raw parameter space and scaled by the reduced chi-square when
/// there are spare degrees of freedom.
///
/// Malformed problems (unknown model, parameters missing or listed twice,
/// guesses outside bounds, fewer points than free parameters) throw
/// InvalidArgument. Numerical trouble never throws: the result comes back
/// with converged = false and a diagnostic.
FitResult fit_curve(const FitProblem& problem);

/// Weighted residual norm of `params` (free and fixed together) against the
/// problem data.
double residual_norm(const FitProblem& problem, const NamedValues& params);

}  // namespace echolab::fit
