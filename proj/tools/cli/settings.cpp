#include "cli/settings.hpp"

#include <array>
#include <charconv>

#include "echolab/error.hpp"
#include "echolab/units.hpp"

namespace echolab::cli {
namespace {

struct UnitEntry {
  std::string_view tag;
  Kind kind;
  double factor;
};

// Units the core table does not know. Core covers time, frequency and field.
constexpr std::array kExtraUnits{
    UnitEntry{"Hzcm/V", Kind::kStarkSlope, 1.0},      UnitEntry{"Hz*cm/V", Kind::kStarkSlope, 1.0},
    UnitEntry{"Hz\xC2\xB7" "cm/V", Kind::kStarkSlope, 1.0},
    UnitEntry{"kHzcm/V", Kind::kStarkSlope, 1e3},     UnitEntry{"kHz*cm/V", Kind::kStarkSlope, 1e3},
    UnitEntry{"kHz\xC2\xB7" "cm/V", Kind::kStarkSlope, 1e3},
    UnitEntry{"MHzcm/V", Kind::kStarkSlope, 1e6},     UnitEntry{"MHz*cm/V", Kind::kStarkSlope, 1e6},
    UnitEntry{"Hz/W", Kind::kPowerSlope, 1.0},        UnitEntry{"kHz/W", Kind::kPowerSlope, 1e3},
    UnitEntry{"MHz/W", Kind::kPowerSlope, 1e6},       UnitEntry{"kHz/uW", Kind::kPowerSlope, 1e9},
    UnitEntry{"MHz/mW", Kind::kPowerSlope, 1e9},      UnitEntry{"W", Kind::kPower, 1.0},
    UnitEntry{"mW", Kind::kPower, 1e-3},              UnitEntry{"uW", Kind::kPower, 1e-6},
    UnitEntry{"\xC2\xB5W", Kind::kPower, 1e-6},       UnitEntry{"um", Kind::kLength, 1.0},
    UnitEntry{"\xC2\xB5m", Kind::kLength, 1.0},       UnitEntry{"nm", Kind::kLength, 1e-3},
    UnitEntry{"mm", Kind::kLength, 1e3},              UnitEntry{"h", Kind::kHours, 1.0},
    UnitEntry{"d", Kind::kHours, 24.0},
};

Kind kind_of(Dimension d) {
  switch (d) {
    case Dimension::kTime:
      return Kind::kTime;
    case Dimension::kFrequency:
      return Kind::kFrequency;
    case Dimension::kField:
      return Kind::kField;
    case Dimension::kWavenumber:
      break;
  }
  return Kind::kNumber;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t") - first + 1);
}

std::string name_of(std::string_view key) { return key.empty() ? std::string("value") : "'" + std::string(key) + "'"; }

}  // namespace

std::string_view to_string(Kind kind) {
  switch (kind) {
    case Kind::kNumber:
      return "a plain number";
    case Kind::kTime:
      return "a time";
    case Kind::kFrequency:
      return "a frequency";
    case Kind::kField:
      return "an electric field";
    case Kind::kStarkSlope:
      return "a Stark coefficient";
    case Kind::kPowerSlope:
      return "a width-per-power slope";
    case Kind::kPower:
      return "a power";
    case Kind::kLength:
      return "a length";
    case Kind::kHours:
      return "a duration in hours";
  }
  return "?";
}

double parse_quantity(std::string_view text, Kind kind, std::string_view key) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double number = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), number);
  if (ec != std::errc{} || ptr == text.data()) {
    throw InputError(name_of(key) + ": cannot read a number from '" + std::string(text) + "'");
  }
  const auto unit = trim(text.substr(static_cast<std::size_t>(ptr - text.data())));
  if (unit.empty()) return number;

  for (const auto& e : kExtraUnits) {
    if (e.tag != unit) continue;
    if (e.kind != kind) {
      throw InputError(name_of(key) + ": unit '" + std::string(unit) + "' is not valid for " +
                       std::string(to_string(kind)));
    }
    return number * e.factor;
  }
  try {
    const auto q = canonicalize_units(number, unit);
    if (kind_of(q.dimension) != kind) {
      throw InputError(name_of(key) + ": unit '" + std::string(unit) + "' is not valid for " +
                       std::string(to_string(kind)));
    }
    return q.value;
  } catch (const UnknownUnit&) {
    throw InputError(name_of(key) + ": unknown unit '" + std::string(unit) + "'");
  }
}

void Settings::set(const std::string& key, std::string value) { values_[key] = {std::move(value)}; }

void Settings::add(const std::string& key, std::string value) { values_[key].push_back(std::move(value)); }

bool Settings::has(std::string_view key) const { return values_.find(key) != values_.end(); }

std::optional<std::string> Settings::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || it->second.empty()) return std::nullopt;
  return it->second.back();
}

const std::vector<std::string>& Settings::list(std::string_view key) const {
  static const std::vector<std::string> kEmpty;
  const auto it = values_.find(key);
  return it == values_.end() ? kEmpty : it->second;
}

std::string Settings::require(std::string_view key) const {
  auto v = get(key);
  if (!v) throw InputError("missing required parameter '" + std::string(key) + "'");
  return *v;
}

std::optional<double> Settings::quantity(std::string_view key, Kind kind) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  return parse_quantity(*v, kind, key);
}

double Settings::require_quantity(std::string_view key, Kind kind) const {
  return parse_quantity(require(key), kind, key);
}

double Settings::quantity_or(std::string_view key, Kind kind, double fallback) const {
  return quantity(key, kind).value_or(fallback);
}

std::optional<long long> Settings::integer(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  const auto text = trim(*v);
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InputError("'" + std::string(key) + "': expected an integer, got '" + *v + "'");
  }
  return out;
}

bool Settings::flag(std::string_view key) const {
  auto v = get(key);
  if (!v) return false;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw InputError("'" + std::string(key) + "': expected true or false, got '" + *v + "'");
}

std::pair<std::string, std::string> split_assignment(std::string_view text, std::string_view key) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || trim(text.substr(0, eq)).empty()) {
    throw InputError("'" + std::string(key) + "': expected name=value, got '" + std::string(text) + "'");
  }
  return {std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
}

}  // namespace echolab::cli
