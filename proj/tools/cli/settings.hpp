#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace echolab::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitInput = 2,
  kExitNotConverged = 3,
  kExitThreshold = 4,
};

/// Bad flags, config entries or input files. Maps to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// What a value is measured in. Values are converted to the base unit of
/// their kind: seconds, hertz, V/cm, Hz*cm/V, Hz/W, watts, micrometres,
/// hours.
enum class Kind {
  kNumber,
  kTime,
  kFrequency,
  kField,
  kStarkSlope,
  kPowerSlope,
  kPower,
  kLength,
  kHours,
};

std::string_view to_string(Kind kind);

/// Parses "<number><unit>", e.g. 1.580us, 24.6kHzcm/V, 100V/mm. A bare
/// number is taken to be in base units. Throws InputError naming `key` when
/// the number is malformed or the unit belongs to another kind.
double parse_quantity(std::string_view text, Kind kind, std::string_view key = {});

/// Flag and config-file values of one command. Keys repeat for list
/// settings (fix, input, guess).
class Settings {
 public:
  void set(const std::string& key, std::string value);
  void add(const std::string& key, std::string value);

  bool has(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  const std::vector<std::string>& list(std::string_view key) const;

  /// Throws InputError("missing required parameter '<key>'").
  std::string require(std::string_view key) const;

  std::optional<double> quantity(std::string_view key, Kind kind) const;
  double require_quantity(std::string_view key, Kind kind) const;
  double quantity_or(std::string_view key, Kind kind, double fallback) const;

  std::optional<long long> integer(std::string_view key) const;
  bool flag(std::string_view key) const;

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> values_;
};

/// Splits "name=value" (used by --fix and --guess).
std::pair<std::string, std::string> split_assignment(std::string_view text, std::string_view key);

}  // namespace echolab::cli
