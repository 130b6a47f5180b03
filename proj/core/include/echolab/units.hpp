#pragma once

#include <numbers>
#include <string_view>

namespace echolab {

/// Physical dimension of a canonical (base-unit) quantity.
///
/// Base units: seconds, hertz, V/cm and cm^-1. All model math runs in these.
enum class Dimension { kTime, kFrequency, kField, kWavenumber };

struct Quantity {
  double value;
  Dimension dimension;
};

struct PhysicalConstants {
  /// Boltzmann constant expressed as a wavenumber, cm^-1 per kelvin.
  static constexpr double boltzmann_wavenumber = 0.695035;
  static constexpr double two_pi = 2.0 * std::numbers::pi;
};

/// Converts `value` given in `unit` to the base unit of its dimension.
///
/// Accepted tags: s, ms, us/µs, ns; Hz, kHz, MHz; V/cm, V/mm, V/m; cm^-1
/// (also written cm-1, 1/cm or cm⁻¹). Throws UnknownUnit for anything else.
Quantity canonicalize_units(double value, std::string_view unit);

/// Inverse of canonicalize_units: expresses a base-unit value in `unit`.
double from_base_units(double base_value, std::string_view unit);

Dimension unit_dimension(std::string_view unit);

}  // namespace echolab
