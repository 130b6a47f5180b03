#include "echolab/procedures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <string>

#include "echolab/error.hpp"
#include "echolab/models.hpp"

namespace echolab::fit {
namespace {

struct Line {
  double slope;
  double intercept;
};

// Unweighted least-squares line through (x, log y) for the positive samples.
std::optional<Line> log_linear(const std::vector<Sample>& samples) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& s : samples) {
    if (!(s.y > 0.0)) continue;
    const double ly = std::log(s.y);
    n += 1;
    sx += s.t;
    sy += ly;
    sxx += s.t * s.t;
    sxy += s.t * ly;
  }
  if (n < 2) return std::nullopt;
  const double denom = n * sxx - sx * sx;
  if (!(denom > 0.0)) return std::nullopt;
  const double slope = (n * sxy - sx * sy) / denom;
  return Line{slope, (sy - slope * sx) / n};
}

// Polynomial least squares (degree 1 or 2) of y against x, exact for
// degree + 1 points.
std::vector<double> polyfit(const std::vector<double>& x, const std::vector<double>& y, int degree) {
  const auto m = static_cast<std::size_t>(degree + 1);
  std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = 0; c < m; ++c) a[r][c] += std::pow(x[i], static_cast<double>(r + c));
      a[r][m] += y[i] * std::pow(x[i], static_cast<double>(r));
    }
  }
  // Gauss-Jordan with partial pivoting; m <= 3.
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    std::swap(a[col], a[pivot]);
    if (a[col][col] == 0.0) return std::vector<double>(m, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= m; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> coeffs(m);
  for (std::size_t r = 0; r < m; ++r) coeffs[r] = a[r][m] / a[r][r];
  return coeffs;
}

bool better(const FitResult& candidate, const std::optional<FitResult>& best) {
  if (!best) return true;
  if (candidate.converged != best->converged) return candidate.converged;
  return candidate.residual_norm < best->residual_norm;
}

void add_lifetime_ratio_warning(FitResult& result, double fast, double slow) {
  if (slow < 3.0 * fast) {
    result.diagnostics.push_back("identifiability warning: lifetimes differ by less than a factor of 3");
  }
}

}  // namespace

FitResult fit_hole_decay(const TimeSeries& data, const HoleDecayOptions& options) {
  if (data.size() < 6) throw InvalidArgument("hole-decay fit needs at least 6 points");
  const auto& pts = data.points();
  const std::size_t segment = std::max<std::size_t>(2, pts.size() / 3);

  const std::vector<Sample> tail(pts.end() - static_cast<std::ptrdiff_t>(segment), pts.end());
  double t1b = 3.0 * pts.back().t;
  double slow_amplitude = std::max(pts.back().y, 1e-3 * std::abs(pts.front().y));
  if (auto line = log_linear(tail); line && line->slope < 0.0) {
    t1b = -1.0 / line->slope;
    slow_amplitude = std::exp(line->intercept);
  }

  std::vector<Sample> head;
  for (std::size_t i = 0; i < segment; ++i) {
    head.push_back({pts[i].t, pts[i].y - slow_amplitude * std::exp(-pts[i].t / t1b), std::nullopt});
  }
  double t1e = t1b / 10.0;
  double fast_amplitude = std::max(pts.front().y - slow_amplitude, 1e-3 * slow_amplitude);
  if (auto line = log_linear(head); line && line->slope < 0.0 && -1.0 / line->slope < t1b / 1.5) {
    t1e = -1.0 / line->slope;
    fast_amplitude = std::exp(line->intercept);
  }
  const double amplitude = options.free_amplitude ? fast_amplitude + slow_amplitude : 1.0;
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
    throw InvalidArgument("hole-decay fit needs positive hole depths");
  }

  FitProblem problem;
  problem.model = "hole-decay";
  problem.data = {data};
  auto set_start = [&](double b, double fast, double slow, double amp) {
    problem.free_params = {{"b", b}, {"t1e", fast}, {"t1b", slow}};
    problem.fixed_params = {};
    if (options.free_amplitude) {
      problem.free_params.set("amplitude", amp);
    } else {
      problem.fixed_params.set("amplitude", 1.0);
    }
  };
  set_start(std::clamp(slow_amplitude / amplitude, 0.01, 0.99), t1e, t1b, amplitude);
  FitResult result = fit_curve(problem);

  // The model is symmetric under swapping the two components; keep t1e the
  // faster one.
  if (result.estimates.at("t1e") > result.estimates.at("t1b")) {
    set_start(std::clamp(1.0 - result.estimates.at("b"), 1e-6, 1.0 - 1e-6), result.estimates.at("t1b"),
              result.estimates.at("t1e"), result.value("amplitude"));
    result = fit_curve(problem);
  }

  const double fast = result.estimates.at("t1e");
  const double slow = result.estimates.at("t1b");
  add_lifetime_ratio_warning(result, fast, slow);
  if (slow > fast) {
    result.derived.set("beta", 2.0 * result.estimates.at("b") * (slow - fast) / slow);
  }
  return result;
}

FitResult fit_mims(const TimeSeries& data) {
  if (data.size() < 8) throw InvalidArgument("Mims fit needs at least 8 points");
  const auto& pts = data.points();
  if (!(pts.front().t > 0.0)) throw InvalidArgument("Mims fit needs positive delays");
  const bool flat = std::all_of(pts.begin(), pts.end(), [&](const Sample& s) { return s.y == pts.front().y; });
  if (flat) throw InvalidArgument("Mims fit: all intensities are equal, no decay to fit");

  const double peak = std::max_element(pts.begin(), pts.end(), [](const Sample& a, const Sample& b) {
                        return a.y < b.y;
                      })->y;
  if (!(peak > 0.0)) throw InvalidArgument("Mims fit needs positive intensities");
  double t2 = 4.0 * pts.back().t;
  if (auto line = log_linear(pts); line && line->slope < 0.0) t2 = -4.0 / line->slope;

  FitProblem problem;
  problem.model = "mims";
  problem.data = {data};
  problem.free_params = {{"i0", peak}, {"t2", t2}, {"x", 1.0}};
  FitResult result = fit_curve(problem);

  const double width = 1.0 / (std::numbers::pi * result.estimates.at("t2"));
  result.derived.set("homogeneous_linewidth", width);
  result.diagnostics.push_back("homogeneous linewidth 1/(pi T2) = " + std::to_string(width) + " Hz");
  return result;
}

FitResult fit_3ppe_joint(const std::vector<TimeSeries>& datasets, double fixed_t1b,
                         const StimulatedEchoOptions& options) {
  if (datasets.empty()) throw InvalidArgument("3PPE fit needs at least one delay set");
  if (!(fixed_t1b > 0.0)) throw InvalidArgument("3PPE fit: fixed T1b must be > 0");
  const bool per_set = options.amplitude_mode == AmplitudeMode::kPerSetNormalized;
  if (per_set && !options.fixed_gamma0) {
    throw InvalidArgument(
        "3PPE fit: normalised delay sets cannot determine gamma0; supply a fixed gamma0 (for example from a "
        "two-pulse echo measurement)");
  }

  std::vector<TimeSeries> sets;
  std::vector<double> delays;
  std::set<double> distinct;
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    const auto& ds = datasets[k];
    auto delay = ds.meta_number("delay_seconds");
    if (!delay || !(*delay > 0.0)) {
      throw InvalidArgument("3PPE data set " + std::to_string(k) + " needs a positive 'delay_seconds' annotation");
    }
    if (!distinct.insert(*delay).second) throw InvalidArgument("3PPE fit: delay settings must be distinct");
    if (ds.size() < 3) throw InvalidArgument("3PPE data set " + std::to_string(k) + " has fewer than 3 points");
    delays.push_back(*delay);
    if (per_set) {
      const double ref = ds.points().front().y;
      if (!(ref > 0.0)) throw InvalidArgument("3PPE normalisation needs a positive first point");
      std::vector<Sample> scaled;
      for (const auto& s : ds.points()) {
        scaled.push_back({s.t, s.y / ref, s.sigma ? std::optional<double>(*s.sigma / ref) : std::nullopt});
      }
      sets.emplace_back(std::move(scaled), ds.y_unit(), ds.meta());
    } else {
      sets.push_back(ds);
    }
  }

  // Late-time log level of each set with the slow bottleneck decay removed.
  std::vector<double> levels;
  for (const auto& ds : sets) {
    const auto& pts = ds.points();
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = pts.size() / 2; i < pts.size(); ++i) {
      if (pts[i].y > 0.0) {
        sum += std::log(pts[i].y) + 2.0 * pts[i].t / fixed_t1b;
        ++count;
      }
    }
    levels.push_back(count > 0 ? sum / count : std::log(std::max(std::abs(pts.back().y), 1e-12)));
  }
  const int degree = sets.size() >= 3 ? 2 : 1;
  std::vector<double> coeffs = sets.size() >= 2 ? polyfit(delays, levels, degree) : std::vector<double>{levels[0], 0.0};
  if (coeffs.size() < 3) coeffs.resize(3, 0.0);

  const double first_tw = sets.front().points().front().t;
  const double last_tw = sets.front().points().back().t;
  const double spacing = (last_tw - first_tw) / static_cast<double>(sets.front().size() - 1);
  const double t1e_start = std::min(0.1 * last_tw, fixed_t1b / 5.0);
  const double four_pi = 4.0 * std::numbers::pi;
  const std::size_t shortest = static_cast<std::size_t>(std::min_element(delays.begin(), delays.end()) - delays.begin());

  std::optional<FitResult> best;
  for (double rate_scale : {0.1, 1.0, 10.0}) {
    const double rate = rate_scale / std::max(spacing, 1e-12);
    double gamma_sd = 0.0;
    double gamma0 = 0.0;
    if (per_set) {
      gamma0 = *options.fixed_gamma0;
      const double decay = std::exp(-rate * first_tw);
      gamma_sd = -coeffs[1] / (2.0 * std::numbers::pi * std::max(decay, 1e-3));
    } else {
      const double saturated = -coeffs[1] / four_pi;  // gamma0 + gamma_sd / 2
      const double product = -coeffs[2] / (2.0 * std::numbers::pi);
      gamma_sd = product > 0.0 ? std::min(product / rate, 1.8 * saturated) : saturated;
      gamma0 = std::max(saturated - 0.5 * gamma_sd, 0.05 * std::abs(saturated));
      if (options.fixed_gamma0) gamma0 = *options.fixed_gamma0;
    }
    if (!(gamma_sd > 0.0) || !std::isfinite(gamma_sd)) gamma_sd = std::max(gamma0, 1.0 / (four_pi * delays[shortest]));
    if (!(gamma0 > 0.0) || !std::isfinite(gamma0)) gamma0 = 0.5 * gamma_sd;

    // Amplitude from the earliest point of the shortest delay, assuming the
    // population factor is still close to one.
    auto amplitude_for = [&](std::size_t k) {
      const auto& first = sets[k].points().front();
      const double attenuation = models::kernel::stimulated_echo(delays[k], first.t, 1.0, gamma0, gamma_sd, rate, 0.5,
                                                                 t1e_start, fixed_t1b);
      return std::max(first.y, 1e-12) / std::max(attenuation, 1e-300);
    };

    FitProblem problem;
    problem.model = per_set ? "3ppe-normalized" : "3ppe";
    problem.data = sets;
    if (!options.fixed_gamma0) problem.free_params.set("gamma0", gamma0);
    problem.free_params.set("gamma_sd", gamma_sd);
    problem.free_params.set("rate", rate);
    problem.free_params.set("t1e", t1e_start);
    double b_start = 0.5;
    if (!per_set) {
      const double i0 = amplitude_for(shortest);
      b_start = std::clamp(std::exp(coeffs[0]) / i0, 0.02, 0.98);
      problem.free_params.set("b", b_start);
      problem.free_params.set("i0", i0);
    } else {
      problem.free_params.set("b", b_start);
      for (std::size_t k = 0; k < sets.size(); ++k) problem.free_params.set("i0_" + std::to_string(k), amplitude_for(k));
    }
    problem.fixed_params.set("t1b", fixed_t1b);
    if (options.fixed_gamma0) problem.fixed_params.set("gamma0", *options.fixed_gamma0);

    FitResult candidate = fit_curve(problem);
    if (better(candidate, best)) best = std::move(candidate);
  }

  FitResult result = std::move(*best);
  if (sets.size() == 1) {
    result.diagnostics.push_back("identifiability warning: a single delay set barely separates gamma_sd from rate");
  }
  if (result.estimates.at("rate") * last_tw < 1.0) {
    result.diagnostics.push_back("identifiability warning: R * max(tW) < 1, diffusion saturation not sampled");
  }
  if (result.estimates.at("t1e") >= fixed_t1b) {
    result.diagnostics.push_back("fitted t1e is not shorter than the fixed t1b");
  } else {
    add_lifetime_ratio_warning(result, result.estimates.at("t1e"), fixed_t1b);
  }
  return result;
}

LinearFit extrapolate_zero_power(const std::vector<PowerWidth>& points) {
  std::set<double> powers;
  for (const auto& p : points) {
    if (!(p.power >= 0.0) || !std::isfinite(p.power)) throw InvalidArgument("burn powers must be >= 0");
    if (!std::isfinite(p.width)) throw InvalidArgument("hole widths must be finite");
    if (p.sigma && !(*p.sigma > 0.0)) throw InvalidArgument("width uncertainties must be > 0");
    powers.insert(p.power);
  }
  if (powers.size() < 2) throw InvalidArgument("zero-power extrapolation needs at least two distinct powers");

  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (const auto& p : points) {
    const double w = p.sigma ? 1.0 / (*p.sigma * *p.sigma) : 1.0;
    sw += w;
    swx += w * p.power;
    swy += w * p.width;
  }
  const double xbar = swx / sw;
  const double ybar = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double w = p.sigma ? 1.0 / (*p.sigma * *p.sigma) : 1.0;
    sxx += w * (p.power - xbar) * (p.power - xbar);
    sxy += w * (p.power - xbar) * (p.width - ybar);
  }

  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = ybar - fit.slope * xbar;
  double chi2 = 0.0;
  for (const auto& p : points) {
    const double w = p.sigma ? 1.0 / (*p.sigma * *p.sigma) : 1.0;
    const double r = p.width - (fit.intercept + fit.slope * p.power);
    chi2 += w * r * r;
  }
  fit.residual_norm = std::sqrt(chi2);
  fit.degrees_of_freedom = points.size() - 2;
  const double scale = fit.degrees_of_freedom > 0 ? chi2 / static_cast<double>(fit.degrees_of_freedom) : 1.0;
  fit.slope_sigma = std::sqrt(scale / sxx);
  fit.intercept_sigma = std::sqrt(scale * (1.0 / sw + xbar * xbar / sxx));
  fit.covariance = -scale * xbar / sxx;
  return fit;
}

}  // namespace echolab::fit
