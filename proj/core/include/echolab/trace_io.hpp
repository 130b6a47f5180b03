#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "echolab/types.hpp"

/// Trace CSV v1 and `key = value` config files.
///
/// A trace file looks like
///
///     # echo-lab trace v1
///     # delay_seconds = 2e-07
///     t_seconds,value,sigma
///     1.0000000000000000e-06,9.1234567890123457e-01,2.7370370367037037e-02
///
/// Comment lines of the form `# key = value` become series metadata. The
/// sigma column is optional. Numbers are written in round-trip scientific
/// notation with a `.` decimal separator regardless of locale.
namespace echolab::io {

inline constexpr std::string_view kTraceMagic = "# echo-lab trace v1";

/// 17 significant digits, scientific, locale independent.
std::string format_number(double value);

/// Locale-independent parse of the full string; throws ParseError.
double parse_number(std::string_view text, std::size_t line = 0);

using Header = std::vector<std::pair<std::string, std::string>>;

/// Writes `series` with `provenance` lines first, then the series metadata
/// (including `y_unit`).
void write_trace(std::ostream& out, const TimeSeries& series, const Header& provenance = {});

/// Parses a trace. The y unit comes from a `y_unit` header when present,
/// otherwise intensity is assumed. Throws ParseError naming the line of a
/// malformed row, and ParseError("no data rows") for an empty trace.
TimeSeries read_trace(std::istream& in);
TimeSeries read_trace_file(const std::string& path);
void write_trace_file(const std::string& path, const TimeSeries& series, const Header& provenance = {});

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line;
};

/// Plain `key = value` lines; `#` starts a comment, blank lines are skipped.
std::vector<ConfigEntry> parse_config(std::istream& in);
std::vector<ConfigEntry> parse_config_file(const std::string& path);

}  // namespace echolab::io
