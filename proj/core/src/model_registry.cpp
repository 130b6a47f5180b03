#include "echolab/model_registry.hpp"

#include <algorithm>
#include <array>

#include "echolab/error.hpp"
#include "echolab/models.hpp"

namespace echolab::fit {
namespace {

using models::kernel::two_exponential;

class HoleDecayModel final : public Model {
 public:
  std::string_view id() const override { return "hole-decay"; }
  YUnit y_unit() const override { return YUnit::kOpticalDepthFraction; }
  std::vector<ParamSpec> parameters(std::size_t) const override {
    return {{"b", ParamTransform::kLogistic},
            {"t1e", ParamTransform::kLog},
            {"t1b", ParamTransform::kLog},
            {"amplitude", ParamTransform::kLog}};
  }
  double evaluate(std::span<const double> p, const SeriesContext&, double t) const override {
    return p[3] * two_exponential(t, p[0], p[1], p[2]);
  }
};

class PopulationModel final : public Model {
 public:
  std::string_view id() const override { return "population"; }
  YUnit y_unit() const override { return YUnit::kIntensity; }
  std::vector<ParamSpec> parameters(std::size_t) const override {
    return {{"b", ParamTransform::kLogistic},
            {"t1e", ParamTransform::kLog},
            {"t1b", ParamTransform::kLog},
            {"amplitude", ParamTransform::kLog}};
  }
  double evaluate(std::span<const double> p, const SeriesContext&, double t) const override {
    return p[3] * two_exponential(2.0 * t, p[0], p[1], p[2]);
  }
};

class MimsModel final : public Model {
 public:
  std::string_view id() const override { return "mims"; }
  YUnit y_unit() const override { return YUnit::kIntensity; }
  std::vector<ParamSpec> parameters(std::size_t) const override {
    return {{"i0", ParamTransform::kLog}, {"t2", ParamTransform::kLog}, {"x", ParamTransform::kLog}};
  }
  double evaluate(std::span<const double> p, const SeriesContext&, double t) const override {
    return models::kernel::mims(t, p[0], p[1], p[2]);
  }
};

// Stimulated echo versus waiting time; each data set is one delay setting.
class StimulatedEchoModel final : public Model {
 public:
  explicit StimulatedEchoModel(bool per_set_amplitude) : per_set_amplitude_(per_set_amplitude) {}

  std::string_view id() const override { return per_set_amplitude_ ? "3ppe-normalized" : "3ppe"; }
  YUnit y_unit() const override { return YUnit::kIntensity; }
  std::vector<ParamSpec> parameters(std::size_t series_count) const override {
    std::vector<ParamSpec> specs{{"gamma0", ParamTransform::kLog}, {"gamma_sd", ParamTransform::kLog},
                                 {"rate", ParamTransform::kLog},   {"t1e", ParamTransform::kLog},
                                 {"b", ParamTransform::kLogistic}, {"t1b", ParamTransform::kLog}};
    if (per_set_amplitude_) {
      for (std::size_t k = 0; k < std::max<std::size_t>(series_count, 1); ++k) {
        specs.push_back({"i0_" + std::to_string(k), ParamTransform::kLog});
      }
    } else {
      specs.push_back({"i0", ParamTransform::kLog});
    }
    return specs;
  }
  double evaluate(std::span<const double> p, const SeriesContext& ctx, double tw) const override {
    const double i0 = per_set_amplitude_ ? p[6 + ctx.index] : p[6];
    return models::kernel::stimulated_echo(ctx.delay, tw, i0, p[0], p[1], p[2], p[4], p[3], p[5]);
  }
  SeriesContext bind(const TimeSeries& series, std::size_t index) const override {
    auto delay = series.meta_number("delay_seconds");
    if (!delay || !(*delay >= 0.0)) {
      throw InvalidArgument("3PPE data set " + std::to_string(index) + " lacks a 'delay_seconds' annotation");
    }
    return {index, *delay};
  }

 private:
  bool per_set_amplitude_;
};

class SaturationModel final : public Model {
 public:
  std::string_view id() const override { return "saturation"; }
  YUnit y_unit() const override { return YUnit::kHertz; }
  std::vector<ParamSpec> parameters(std::size_t) const override {
    return {{"gamma0", ParamTransform::kLog}, {"gamma_sd", ParamTransform::kLog}, {"rate", ParamTransform::kLog}};
  }
  double evaluate(std::span<const double> p, const SeriesContext&, double tw) const override {
    return models::kernel::effective_linewidth(0.0, tw, p[0], p[1], p[2]);
  }
};

class StarkModel final : public Model {
 public:
  std::string_view id() const override { return "stark"; }
  YUnit y_unit() const override { return YUnit::kHertz; }
  std::vector<ParamSpec> parameters(std::size_t) const override { return {{"slope", ParamTransform::kIdentity}}; }
  double evaluate(std::span<const double> p, const SeriesContext&, double field) const override {
    return p[0] * field;
  }
};

class LinearModel final : public Model {
 public:
  std::string_view id() const override { return "linear"; }
  YUnit y_unit() const override { return YUnit::kHertz; }
  std::vector<ParamSpec> parameters(std::size_t) const override {
    return {{"slope", ParamTransform::kIdentity}, {"intercept", ParamTransform::kIdentity}};
  }
  double evaluate(std::span<const double> p, const SeriesContext&, double x) const override {
    return p[0] * x + p[1];
  }
};

class GaussianProfileModel final : public Model {
 public:
  std::string_view id() const override { return "gaussian-profile"; }
  YUnit y_unit() const override { return YUnit::kIntensity; }
  std::vector<ParamSpec> parameters(std::size_t) const override {
    return {{"peak", ParamTransform::kLog}, {"d1e", ParamTransform::kLog}};
  }
  double evaluate(std::span<const double> p, const SeriesContext&, double z) const override {
    const double u = z / p[1];
    return p[0] * std::exp(-u * u);
  }
};

const HoleDecayModel kHoleDecay;
const PopulationModel kPopulation;
const MimsModel kMims;
const StimulatedEchoModel kStimulatedShared{false};
const StimulatedEchoModel kStimulatedPerSet{true};
const SaturationModel kSaturation;
const StarkModel kStark;
const LinearModel kLinear;
const GaussianProfileModel kGaussianProfile;

const std::array<const Model*, 9> kRegistry{&kHoleDecay, &kPopulation, &kMims,   &kStimulatedShared,
                                            &kStimulatedPerSet, &kSaturation, &kStark, &kLinear,
                                            &kGaussianProfile};

std::size_t series_count_for(const SeriesContext& ctx) { return ctx.index + 1; }

// Maps named values onto the model's parameter order.
std::vector<double> ordered_values(const Model& model, const NamedValues& params, std::size_t series_count) {
  const auto specs = model.parameters(series_count);
  std::vector<double> values;
  values.reserve(specs.size());
  for (const auto& spec : specs) values.push_back(params.at(spec.name));
  return values;
}

}  // namespace

SeriesContext Model::bind(const TimeSeries&, std::size_t index) const { return {index}; }

const Model& find_model(std::string_view id) {
  for (const Model* model : kRegistry) {
    if (model->id() == id) return *model;
  }
  throw UnknownModel(std::string(id));
}

std::vector<std::string_view> model_ids() {
  std::vector<std::string_view> ids;
  for (const Model* model : kRegistry) ids.push_back(model->id());
  return ids;
}

double evaluate(const Model& model, const NamedValues& params, double t, const SeriesContext& ctx) {
  const auto values = ordered_values(model, params, series_count_for(ctx));
  return model.evaluate(values, ctx, t);
}

Matrix jacobian(const Model& model, const NamedValues& params, std::span<const double> grid,
                const SeriesContext& ctx) {
  const auto specs = model.parameters(series_count_for(ctx));
  for (const auto& [name, value] : params) {
    const bool known = std::any_of(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.name == name; });
    if (!known) throw InvalidArgument("parameter '" + name + "' is not used by model '" + std::string(model.id()) + "'");
  }
  std::vector<double> base = ordered_values(model, params, series_count_for(ctx));

  Matrix jac(grid.size(), params.size());
  std::size_t col = 0;
  for (const auto& entry : params) {
    const auto it = std::find_if(specs.begin(), specs.end(), [&](const ParamSpec& s) { return s.name == entry.first; });
    const auto index = static_cast<std::size_t>(it - specs.begin());
    const double h = std::max(1e-6 * std::abs(base[index]), 1e-12);
    std::vector<double> plus = base;
    std::vector<double> minus = base;
    plus[index] += h;
    minus[index] -= h;
    const double width = plus[index] - minus[index];
    for (std::size_t row = 0; row < grid.size(); ++row) {
      jac(row, col) = (model.evaluate(plus, ctx, grid[row]) - model.evaluate(minus, ctx, grid[row])) / width;
    }
    ++col;
  }
  return jac;
}

Matrix jacobian(std::string_view model_id, const NamedValues& params, std::span<const double> grid,
                const SeriesContext& ctx) {
  return jacobian(find_model(model_id), params, grid, ctx);
}

}  // namespace echolab::fit
