#include "echolab/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "echolab/error.hpp"

namespace echolab {
namespace {

void require(bool condition, const char* message) {
  if (!condition) throw InvalidArgument(message);
}

bool positive(double v) { return std::isfinite(v) && v > 0.0; }
bool nonnegative(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

DecayModelParams::DecayModelParams(double b, double t1e, double t1b) : b_(b), t1e_(t1e), t1b_(t1b) {
  require(std::isfinite(b) && b >= 0.0 && b <= 1.0, "DecayModelParams: B must lie in [0, 1]");
  require(positive(t1e), "DecayModelParams: T1e must be > 0");
  require(positive(t1b), "DecayModelParams: T1b must be > 0");
}

CoherenceParams::CoherenceParams(double i0, double t2, double x) : i0_(i0), t2_(t2), x_(x) {
  require(positive(i0), "CoherenceParams: I0 must be > 0");
  require(positive(t2), "CoherenceParams: T2 must be > 0");
  require(positive(x), "CoherenceParams: x must be > 0");
}

DiffusionParams::DiffusionParams(double gamma0, double gamma_sd, double rate)
    : gamma0_(gamma0), gamma_sd_(gamma_sd), rate_(rate) {
  require(nonnegative(gamma0), "DiffusionParams: gamma0 must be >= 0");
  require(nonnegative(gamma_sd), "DiffusionParams: gammaSD must be >= 0");
  require(nonnegative(rate), "DiffusionParams: R must be >= 0");
}

StarkParams::StarkParams(double slope) : slope_(slope) {
  require(std::isfinite(slope), "StarkParams: slope must be finite");
}

DopingProfileParams::DopingProfileParams(double peak_concentration, double d1e, double diffusion_time)
    : peak_concentration_(peak_concentration), d1e_(d1e), diffusion_time_(diffusion_time) {
  require(positive(peak_concentration), "DopingProfileParams: peak concentration must be > 0");
  require(positive(d1e), "DopingProfileParams: d1e must be > 0");
  require(positive(diffusion_time), "DopingProfileParams: diffusion time must be > 0");
}

LevelScheme::LevelScheme(std::vector<Level> levels) : levels_(std::move(levels)) {
  require(!levels_.empty(), "LevelScheme: at least one level required");
  bool has_ground = false;
  for (const auto& level : levels_) {
    require(nonnegative(level.energy), "LevelScheme: energies must be >= 0");
    require(level.degeneracy > 0, "LevelScheme: degeneracy must be positive");
    has_ground = has_ground || level.energy == 0.0;
  }
  require(has_ground, "LevelScheme: a level with energy 0 is required");
}

std::string_view to_string(YUnit unit) {
  switch (unit) {
    case YUnit::kIntensity:
      return "intensity";
    case YUnit::kOpticalDepthFraction:
      return "optical-depth-fraction";
    case YUnit::kHertz:
      return "hertz";
  }
  return "intensity";
}

YUnit parse_y_unit(std::string_view tag) {
  if (tag == "intensity") return YUnit::kIntensity;
  if (tag == "optical-depth-fraction") return YUnit::kOpticalDepthFraction;
  if (tag == "hertz") return YUnit::kHertz;
  throw UnknownUnit(std::string(tag));
}

TimeSeries::TimeSeries(std::vector<Sample> points, YUnit y_unit, Meta meta)
    : points_(std::move(points)), y_unit_(y_unit), meta_(std::move(meta)) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    require(std::isfinite(p.t) && std::isfinite(p.y), "TimeSeries: non-finite sample");
    if (i > 0) require(p.t > points_[i - 1].t, "TimeSeries: times must be strictly increasing");
    if (p.sigma) require(positive(*p.sigma), "TimeSeries: sigma must be > 0");
  }
}

std::optional<std::string> TimeSeries::meta_value(std::string_view key) const {
  if (auto it = meta_.find(key); it != meta_.end()) return it->second;
  return std::nullopt;
}

std::optional<double> TimeSeries::meta_number(std::string_view key) const {
  auto text = meta_value(key);
  if (!text) return std::nullopt;
  double value = 0.0;
  const char* first = text->data();
  const char* last = first + text->size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) return std::nullopt;
  return value;
}

bool TimeSeries::has_sigma() const noexcept {
  return !points_.empty() &&
         std::all_of(points_.begin(), points_.end(), [](const Sample& s) { return s.sigma.has_value(); });
}

NamedValues::NamedValues(std::initializer_list<std::pair<std::string, double>> init) {
  for (const auto& [name, value] : init) set(name, value);
}

void NamedValues::set(std::string_view name, double value) {
  for (auto& entry : entries_) {
    if (entry.first == name) {
      entry.second = value;
      return;
    }
  }
  entries_.emplace_back(std::string(name), value);
}

std::optional<double> NamedValues::find(std::string_view name) const {
  for (const auto& entry : entries_) {
    if (entry.first == name) return entry.second;
  }
  return std::nullopt;
}

double NamedValues::at(std::string_view name) const {
  if (auto v = find(name)) return *v;
  throw InvalidArgument("missing parameter '" + std::string(name) + "'");
}

bool NamedValues::erase(std::string_view name) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

double FitResult::value(std::string_view name) const {
  if (auto v = estimates.find(name)) return *v;
  return fixed_params.at(name);
}

}  // namespace echolab
