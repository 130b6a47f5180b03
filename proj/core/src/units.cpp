#include "echolab/units.hpp"

#include <array>
#include <string>

#include "echolab/error.hpp"

namespace echolab {
namespace {

// Scale is stored as a (multiply, divide) pair so that sub-unit prefixes
// divide by an exactly representable power of ten.
struct UnitEntry {
  std::string_view tag;
  Dimension dimension;
  double multiply;
  double divide;
};

constexpr std::array kUnits{
    UnitEntry{"s", Dimension::kTime, 1.0, 1.0},
    UnitEntry{"ms", Dimension::kTime, 1.0, 1e3},
    UnitEntry{"us", Dimension::kTime, 1.0, 1e6},
    UnitEntry{"\xC2\xB5s", Dimension::kTime, 1.0, 1e6},  // micro sign
    UnitEntry{"\xCE\xBCs", Dimension::kTime, 1.0, 1e6},  // greek mu
    UnitEntry{"ns", Dimension::kTime, 1.0, 1e9},
    UnitEntry{"Hz", Dimension::kFrequency, 1.0, 1.0},
    UnitEntry{"kHz", Dimension::kFrequency, 1e3, 1.0},
    UnitEntry{"MHz", Dimension::kFrequency, 1e6, 1.0},
    UnitEntry{"V/cm", Dimension::kField, 1.0, 1.0},
    UnitEntry{"V/mm", Dimension::kField, 10.0, 1.0},
    UnitEntry{"V/m", Dimension::kField, 1.0, 100.0},
    UnitEntry{"cm^-1", Dimension::kWavenumber, 1.0, 1.0},
    UnitEntry{"cm-1", Dimension::kWavenumber, 1.0, 1.0},
    UnitEntry{"1/cm", Dimension::kWavenumber, 1.0, 1.0},
    UnitEntry{"cm\xE2\x81\xBB\xC2\xB9", Dimension::kWavenumber, 1.0, 1.0},  // cm⁻¹
};

const UnitEntry& lookup(std::string_view unit) {
  for (const auto& entry : kUnits) {
    if (entry.tag == unit) return entry;
  }
  throw UnknownUnit(std::string(unit));
}

}  // namespace

Quantity canonicalize_units(double value, std::string_view unit) {
  const auto& entry = lookup(unit);
  return {value * entry.multiply / entry.divide, entry.dimension};
}

double from_base_units(double base_value, std::string_view unit) {
  const auto& entry = lookup(unit);
  return base_value * entry.divide / entry.multiply;
}

Dimension unit_dimension(std::string_view unit) { return lookup(unit).dimension; }

}  // namespace echolab
