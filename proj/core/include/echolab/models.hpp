#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "echolab/types.hpp"

/// Closed-form spectroscopy relations. Every function is pure; times are in
/// seconds, linewidths and rates in hertz.
namespace echolab::models {

/// Unchecked kernels shared by the public functions and the fitting models.
/// They accept any real input (the optimiser may probe outside the physical
/// domain while differencing) and never throw.
namespace kernel {

inline double two_exponential(double t, double b, double tau_fast, double tau_slow) {
  return (1.0 - b) * std::exp(-t / tau_fast) + b * std::exp(-t / tau_slow);
}

inline double mims(double t, double i0, double t2, double x) {
  return i0 * std::exp(-std::pow(4.0 * t / t2, x));
}

inline double effective_linewidth(double td, double tw, double gamma0, double gamma_sd, double rate) {
  return gamma0 + 0.5 * gamma_sd * (rate * td + (1.0 - std::exp(-rate * tw)));
}

inline double stimulated_echo(double td, double tw, double i0, double gamma0, double gamma_sd, double rate,
                              double b, double t1e, double t1b) {
  const double population = two_exponential(2.0 * tw, b, t1e, t1b);
  return i0 * population *
         std::exp(-4.0 * std::numbers::pi * td * effective_linewidth(td, tw, gamma0, gamma_sd, rate));
}

}  // namespace kernel

/// Normalised hole depth t seconds after burning:
/// (1 - B) exp(-t/T1e) + B exp(-t/T1b).
double hole_decay_fraction(double t, const DecayModelParams& p);

/// Branching ratio implied by the fitted amplitude, beta = 2B (T1b - T1e) / T1b.
/// Throws InvalidArgument when T1b <= T1e.
double beta_from_B(const DecayModelParams& p);

/// Lifetime-limited linewidth 1 / (2 pi T1e).
double natural_linewidth(double t1e);

/// Mims two-pulse echo decay, I0 exp(-(4t/T2)^x).
double mims_echo_intensity(double t, const CoherenceParams& c);

/// Population factor of the stimulated echo; the excited population has to
/// survive a round trip, hence the 2 tW in both exponents.
double population_factor(double tw, const DecayModelParams& p);

/// Gamma_eff(tD, tW) = Gamma0 + Gamma_SD/2 [R tD + 1 - exp(-R tW)].
double effective_linewidth(double td, double tw, const DiffusionParams& d);

/// Three-pulse echo peak, I0 F(tW) exp(-4 pi tD Gamma_eff(tD, tW)).
double stimulated_echo_intensity(double td, double tw, double i0, const DiffusionParams& d,
                                 const DecayModelParams& p);

/// Linewidth growth with waiting time alone (tD = 0). `tw` may be +inf.
double linewidth_saturation(double tw, const DiffusionParams& d);

/// Gamma0 + Gamma_SD/2, the tW -> infinity value of linewidth_saturation.
double linewidth_saturation_limit(const DiffusionParams& d);

/// Hole width expected from burning once diffusion has run its course.
double shb_linewidth_prediction(const DiffusionParams& d);

/// Frequency shift in hertz for a field in V/cm.
double stark_shift(double field, const StarkParams& s);

/// D = d1e^2 / (4 t), micrometres squared per hour.
double diffusion_coefficient(double d1e, double hours);

/// Concentration at depth z (micrometres) for a Gaussian in-diffusion profile.
double gaussian_profile(double z, const DopingProfileParams& p);

struct Occupation {
  std::vector<double> fractions;  // per level, same order as the scheme
  double excited_fraction;        // 1 - population of the ground level(s)
};

/// Boltzmann populations of a level scheme at temperature `kelvin`.
Occupation boltzmann_occupation(const LevelScheme& scheme, double kelvin);

/// Recall time of an atomic frequency comb, 1 / tooth spacing.
double afc_storage_time(double teeth_spacing);

}  // namespace echolab::models
