#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace echolab {

/// Population model of a burnt spectral hole: a fast excited-state decay
/// plus a slow bottleneck decay with fractional amplitude B.
class DecayModelParams {
 public:
  /// Throws InvalidArgument unless 0 <= b <= 1, t1e > 0 and t1b > 0 (seconds).
  DecayModelParams(double b, double t1e, double t1b);

  double b() const noexcept { return b_; }
  double t1e() const noexcept { return t1e_; }
  double t1b() const noexcept { return t1b_; }

 private:
  double b_;
  double t1e_;
  double t1b_;
};

/// Two-pulse echo decay: peak intensity, phase memory time, stretch exponent.
class CoherenceParams {
 public:
  CoherenceParams(double i0, double t2, double x);

  double i0() const noexcept { return i0_; }
  double t2() const noexcept { return t2_; }
  double x() const noexcept { return x_; }

 private:
  double i0_;
  double t2_;
  double x_;
};

/// Spectral-diffusion linewidth model; all values in hertz.
class DiffusionParams {
 public:
  DiffusionParams(double gamma0, double gamma_sd, double rate);

  double gamma0() const noexcept { return gamma0_; }
  double gamma_sd() const noexcept { return gamma_sd_; }
  double rate() const noexcept { return rate_; }

 private:
  double gamma0_;
  double gamma_sd_;
  double rate_;
};

/// Linear Stark coefficient in Hz*cm/V. The sign encodes the dipole
/// orientation relative to the applied field.
class StarkParams {
 public:
  explicit StarkParams(double slope);

  double slope() const noexcept { return slope_; }

 private:
  double slope_;
};

/// In-diffused dopant profile. Concentration in cm^-3, depth in micrometres,
/// diffusion time in hours.
class DopingProfileParams {
 public:
  DopingProfileParams(double peak_concentration, double d1e, double diffusion_time);

  double peak_concentration() const noexcept { return peak_concentration_; }
  double d1e() const noexcept { return d1e_; }
  double diffusion_time() const noexcept { return diffusion_time_; }

 private:
  double peak_concentration_;
  double d1e_;
  double diffusion_time_;
};

struct Level {
  double energy;  // cm^-1
  int degeneracy = 1;
};

/// A Stark multiplet; must contain a level at energy 0.
class LevelScheme {
 public:
  explicit LevelScheme(std::vector<Level> levels);

  const std::vector<Level>& levels() const noexcept { return levels_; }

 private:
  std::vector<Level> levels_;
};

enum class YUnit { kIntensity, kOpticalDepthFraction, kHertz };

std::string_view to_string(YUnit unit);
/// Parses "intensity", "optical-depth-fraction" or "hertz".
YUnit parse_y_unit(std::string_view tag);

struct Sample {
  double t;
  double y;
  std::optional<double> sigma;
};

/// Ordered measurement samples. `t` is the abscissa in base units (usually
/// seconds; field or power for sweep experiments).
class TimeSeries {
 public:
  using Meta = std::map<std::string, std::string, std::less<>>;

  TimeSeries() = default;
  /// Throws InvalidArgument if times are not strictly increasing or a sigma
  /// is not positive.
  TimeSeries(std::vector<Sample> points, YUnit y_unit, Meta meta = {});

  const std::vector<Sample>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  YUnit y_unit() const noexcept { return y_unit_; }
  const Meta& meta() const noexcept { return meta_; }
  std::optional<std::string> meta_value(std::string_view key) const;
  std::optional<double> meta_number(std::string_view key) const;
  void set_meta(std::string key, std::string value) { meta_[std::move(key)] = std::move(value); }
  bool has_sigma() const noexcept;

 private:
  std::vector<Sample> points_;
  YUnit y_unit_ = YUnit::kIntensity;
  Meta meta_;
};

/// Insertion-ordered name -> value list. Small, so lookups are linear.
class NamedValues {
 public:
  NamedValues() = default;
  NamedValues(std::initializer_list<std::pair<std::string, double>> init);

  void set(std::string_view name, double value);
  std::optional<double> find(std::string_view name) const;
  /// Throws InvalidArgument naming the missing key.
  double at(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name).has_value(); }
  bool erase(std::string_view name);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  friend bool operator==(const NamedValues&, const NamedValues&) = default;

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Outcome of a least-squares fit. Non-converged results still carry the
/// last iterate and all diagnostics.
struct FitResult {
  std::string model;
  NamedValues estimates;      // free parameters, in fit order
  NamedValues uncertainties;  // 1 sigma; +inf for non-identifiable parameters
  Matrix covariance;          // rows/cols follow `estimates`
  NamedValues fixed_params;
  NamedValues derived;  // report quantities computed from the estimates
  double residual_norm = 0.0;
  double initial_residual_norm = 0.0;
  std::size_t data_points = 0;
  int iterations = 0;
  bool converged = false;
  bool ill_conditioned = false;
  std::vector<std::string> pinned;  // parameters sitting on a bound
  std::vector<std::string> diagnostics;

  /// Estimate or fixed value, whichever holds `name`.
  double value(std::string_view name) const;

  friend bool operator==(const FitResult&, const FitResult&) = default;
};

}  // namespace echolab
