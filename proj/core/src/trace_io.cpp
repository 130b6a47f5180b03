#include "echolab/trace_io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <optional>
#include <istream>
#include <ostream>
#include <sstream>

#include "echolab/error.hpp"

namespace echolab::io {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

// "key = value" -> pair; nullopt when there is no '='.
std::optional<std::pair<std::string, std::string>> key_value(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) return std::nullopt;
  return std::pair{std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
}

}  // namespace

std::string format_number(double value) {
  std::array<char, 40> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::scientific, 16);
  return std::string(buf.data(), ptr);
}

double parse_number(std::string_view text, std::size_t line) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ParseError("malformed number '" + std::string(text) + "'", line);
  }
  return value;
}

void write_trace(std::ostream& out, const TimeSeries& series, const Header& provenance) {
  out << kTraceMagic << '\n';
  for (const auto& [key, value] : provenance) out << "# " << key << " = " << value << '\n';
  out << "# y_unit = " << to_string(series.y_unit()) << '\n';
  for (const auto& [key, value] : series.meta()) {
    if (key == "y_unit") continue;
    out << "# " << key << " = " << value << '\n';
  }
  const bool with_sigma = series.has_sigma();
  out << (with_sigma ? "t_seconds,value,sigma\n" : "t_seconds,value\n");
  for (const auto& s : series.points()) {
    out << format_number(s.t) << ',' << format_number(s.y);
    if (with_sigma) out << ',' << format_number(*s.sigma);
    out << '\n';
  }
}

TimeSeries read_trace(std::istream& in) {
  std::vector<Sample> samples;
  TimeSeries::Meta meta;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (auto kv = key_value(line.substr(1)); kv && !kv->first.empty()) meta[kv->first] = kv->second;
      continue;
    }
    if (line.starts_with("t_seconds")) continue;
    const auto cells = split(line, ',');
    if (cells.size() < 2 || cells.size() > 3) {
      throw ParseError("expected 2 or 3 comma-separated columns", line_no);
    }
    Sample s{parse_number(cells[0], line_no), parse_number(cells[1], line_no), std::nullopt};
    if (cells.size() == 3 && !cells[2].empty()) {
      s.sigma = parse_number(cells[2], line_no);
      if (!(*s.sigma > 0.0)) throw ParseError("sigma must be > 0", line_no);
    }
    if (!samples.empty() && !(s.t > samples.back().t)) {
      throw ParseError("times must be strictly increasing", line_no);
    }
    samples.push_back(s);
  }
  if (samples.empty()) throw ParseError("no data rows", 0);

  YUnit unit = YUnit::kIntensity;
  if (auto it = meta.find("y_unit"); it != meta.end()) {
    try {
      unit = parse_y_unit(it->second);
    } catch (const UnknownUnit&) {
      throw ParseError("unknown y_unit '" + it->second + "'", 0);
    }
  }
  return TimeSeries(std::move(samples), unit, std::move(meta));
}

TimeSeries read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  try {
    return read_trace(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

void write_trace_file(const std::string& path, const TimeSeries& series, const Header& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  write_trace(out, series, provenance);
}

std::vector<ConfigEntry> parse_config(std::istream& in) {
  std::vector<ConfigEntry> entries;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto kv = key_value(line);
    if (!kv || kv->first.empty()) throw ParseError("expected 'key = value'", line_no);
    entries.push_back({kv->first, kv->second, line_no});
  }
  return entries;
}

std::vector<ConfigEntry> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path + "'", 0);
  return parse_config(in);
}

}  // namespace echolab::io
