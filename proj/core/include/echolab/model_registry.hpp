#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "echolab/types.hpp"

namespace echolab::fit {

/// Internal reparametrisation used by the optimiser.
enum class ParamTransform {
  kIdentity,
  kLog,       // strictly positive parameters
  kLogistic,  // fractions in (0, 1)
};

struct ParamSpec {
  std::string name;
  ParamTransform transform;
};

/// Per-series information a model needs besides the abscissa.
struct SeriesContext {
  std::size_t index = 0;
  double delay = std::numeric_limits<double>::quiet_NaN();  // tD of a 3PPE set
};

/// A fittable forward model. Parameters arrive in the order returned by
/// `parameters()`.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string_view id() const = 0;
  virtual YUnit y_unit() const = 0;
  virtual std::vector<ParamSpec> parameters(std::size_t series_count) const = 0;
  virtual double evaluate(std::span<const double> params, const SeriesContext& ctx, double t) const = 0;

  /// Extracts what `evaluate` needs from a data set; throws InvalidArgument
  /// if the series lacks required annotations.
  virtual SeriesContext bind(const TimeSeries& series, std::size_t index) const;
};

/// Looks up a model by identifier. Throws UnknownModel.
///
/// Known ids: hole-decay, population, mims, 3ppe (one shared amplitude),
/// 3ppe-normalized (one amplitude per delay set), saturation, stark, linear,
/// gaussian-profile.
const Model& find_model(std::string_view id);

std::vector<std::string_view> model_ids();

/// Evaluates `model` with named parameters; missing names throw.
double evaluate(const Model& model, const NamedValues& params, double t, const SeriesContext& ctx = {});

/// Central finite-difference Jacobian, rows over `grid`, columns over the
/// entries of `params` in their given order. The step for parameter p is
/// 1e-6 |p| with an absolute floor of 1e-12.
Matrix jacobian(const Model& model, const NamedValues& params, std::span<const double> grid,
                const SeriesContext& ctx = {});
Matrix jacobian(std::string_view model_id, const NamedValues& params, std::span<const double> grid,
                const SeriesContext& ctx = {});

}  // namespace echolab::fit
