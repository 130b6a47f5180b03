#include "echolab/models.hpp"

#include <limits>
#include <string>

#include "echolab/error.hpp"
#include "echolab/units.hpp"

namespace echolab::models {
namespace {

void require_nonnegative(double value, const char* what) {
  if (!(value >= 0.0)) throw InvalidArgument(std::string(what) + " must be >= 0");
}

void require_positive(double value, const char* what) {
  if (!(value > 0.0) || !std::isfinite(value)) throw InvalidArgument(std::string(what) + " must be > 0");
}

}  // namespace

double hole_decay_fraction(double t, const DecayModelParams& p) {
  require_nonnegative(t, "time");
  return kernel::two_exponential(t, p.b(), p.t1e(), p.t1b());
}

double beta_from_B(const DecayModelParams& p) {
  if (!(p.t1b() > p.t1e())) throw InvalidArgument("beta conversion requires T1b > T1e");
  return 2.0 * p.b() * (p.t1b() - p.t1e()) / p.t1b();
}

double natural_linewidth(double t1e) {
  require_positive(t1e, "T1e");
  return 1.0 / (PhysicalConstants::two_pi * t1e);
}

double mims_echo_intensity(double t, const CoherenceParams& c) {
  require_nonnegative(t, "time");
  return kernel::mims(t, c.i0(), c.t2(), c.x());
}

double population_factor(double tw, const DecayModelParams& p) {
  require_nonnegative(tw, "waiting time");
  return kernel::two_exponential(2.0 * tw, p.b(), p.t1e(), p.t1b());
}

double effective_linewidth(double td, double tw, const DiffusionParams& d) {
  require_nonnegative(td, "delay");
  require_nonnegative(tw, "waiting time");
  return kernel::effective_linewidth(td, tw, d.gamma0(), d.gamma_sd(), d.rate());
}

double stimulated_echo_intensity(double td, double tw, double i0, const DiffusionParams& d,
                                 const DecayModelParams& p) {
  return i0 * population_factor(tw, p) *
         std::exp(-4.0 * std::numbers::pi * td * effective_linewidth(td, tw, d));
}

double linewidth_saturation(double tw, const DiffusionParams& d) {
  require_nonnegative(tw, "waiting time");
  if (std::isinf(tw)) return linewidth_saturation_limit(d);
  return kernel::effective_linewidth(0.0, tw, d.gamma0(), d.gamma_sd(), d.rate());
}

double linewidth_saturation_limit(const DiffusionParams& d) { return d.gamma0() + 0.5 * d.gamma_sd(); }

double shb_linewidth_prediction(const DiffusionParams& d) { return d.gamma0() + d.gamma_sd(); }

double stark_shift(double field, const StarkParams& s) {
  if (!std::isfinite(field)) throw InvalidArgument("field must be finite");
  return s.slope() * field;
}

double diffusion_coefficient(double d1e, double hours) {
  require_positive(d1e, "d1e");
  require_positive(hours, "diffusion time");
  return d1e * d1e / (4.0 * hours);
}

double gaussian_profile(double z, const DopingProfileParams& p) {
  require_nonnegative(z, "depth");
  const double u = z / p.d1e();
  return p.peak_concentration() * std::exp(-u * u);
}

Occupation boltzmann_occupation(const LevelScheme& scheme, double kelvin) {
  require_positive(kelvin, "temperature");
  const double kt = PhysicalConstants::boltzmann_wavenumber * kelvin;
  Occupation out;
  out.fractions.reserve(scheme.levels().size());
  double partition = 0.0;
  for (const auto& level : scheme.levels()) {
    const double weight = level.degeneracy * std::exp(-level.energy / kt);
    out.fractions.push_back(weight);
    partition += weight;
  }
  // Summed directly rather than as 1 - ground to keep small fractions exact.
  out.excited_fraction = 0.0;
  for (std::size_t i = 0; i < out.fractions.size(); ++i) {
    out.fractions[i] /= partition;
    if (scheme.levels()[i].energy > 0.0) out.excited_fraction += out.fractions[i];
  }
  return out;
}

double afc_storage_time(double teeth_spacing) {
  require_positive(teeth_spacing, "teeth spacing");
  return 1.0 / teeth_spacing;
}

}  // namespace echolab::models
