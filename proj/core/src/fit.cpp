#include "echolab/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "echolab/error.hpp"

namespace echolab::fit {
namespace {

constexpr double kInitialDamping = 1e-3;
constexpr double kMaxDamping = 1e20;
constexpr double kParamTolerance = 1e-8;
constexpr double kCostTolerance = 1e-10;
// Relative cost below which the data are reproduced to rounding level.
constexpr double kExactFitCost = 1e-28;
constexpr double kRankTolerance = 1e-12;

struct Point {
  std::size_t context;
  double t;
  double y;
  double sqrt_weight;
};

struct FreeParam {
  std::string name;
  std::size_t model_index;
  ParamTransform transform;
  double lower;  // internal-space clamp
  double upper;
  Bounds raw_bounds;
};

double to_internal(double raw, ParamTransform transform) {
  switch (transform) {
    case ParamTransform::kLog:
      return std::log(raw);
    case ParamTransform::kLogistic:
      return std::log(raw / (1.0 - raw));
    case ParamTransform::kIdentity:
      break;
  }
  return raw;
}

double to_raw(double u, ParamTransform transform) {
  switch (transform) {
    case ParamTransform::kLog:
      return std::exp(u);
    case ParamTransform::kLogistic:
      return 1.0 / (1.0 + std::exp(-u));
    case ParamTransform::kIdentity:
      break;
  }
  return u;
}

// d(raw)/d(internal)
double raw_derivative(double raw, ParamTransform transform) {
  switch (transform) {
    case ParamTransform::kLog:
      return raw;
    case ParamTransform::kLogistic:
      return raw * (1.0 - raw);
    case ParamTransform::kIdentity:
      break;
  }
  return 1.0;
}

class Problem {
 public:
  explicit Problem(const FitProblem& spec) : model_(find_model(spec.model)) {
    if (spec.data.empty()) throw InvalidArgument("fit: no data sets");
    specs_ = model_.parameters(spec.data.size());

    for (const auto& [name, value] : spec.free_params) {
      if (spec.fixed_params.contains(name)) {
        throw InvalidArgument("fit: parameter '" + name + "' is both free and fixed");
      }
    }
    for (const auto& [name, value] : spec.free_params) require_known(name);
    for (const auto& [name, value] : spec.fixed_params) require_known(name);
    for (const auto& [name, bounds] : spec.bounds) require_known(name);

    model_values_.resize(specs_.size());
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      const auto& s = specs_[i];
      if (auto fixed = spec.fixed_params.find(s.name)) {
        model_values_[i] = *fixed;
      } else if (!spec.free_params.contains(s.name)) {
        throw InvalidArgument("fit: parameter '" + s.name + "' is neither free nor fixed");
      }
    }

    // Free parameters keep the order the caller listed them in.
    for (const auto& [name, guess] : spec.free_params) {
      const auto index = index_of(name);
      FreeParam fp{name, index, specs_[index].transform, 0.0, 0.0, {}};
      if (auto it = spec.bounds.find(name); it != spec.bounds.end()) fp.raw_bounds = it->second;
      set_internal_limits(fp, guess);
      free_.push_back(fp);
      initial_.push_back(guess);
    }

    contexts_.reserve(spec.data.size());
    for (std::size_t k = 0; k < spec.data.size(); ++k) {
      contexts_.push_back(model_.bind(spec.data[k], k));
      const auto& series = spec.data[k];
      const bool use_sigma = spec.weighting == Weighting::kPerPointSigma && series.has_sigma();
      for (const auto& sample : series.points()) {
        const double w = use_sigma ? 1.0 / *sample.sigma : 1.0;
        points_.push_back({k, sample.t, sample.y, w});
        weighted_data_norm_ += (w * sample.y) * (w * sample.y);
      }
      if (spec.weighting == Weighting::kPerPointSigma && !series.has_sigma()) uniform_fallback_ = true;
    }
    if (points_.size() < free_.size()) {
      throw InvalidArgument("fit: " + std::to_string(points_.size()) + " data points cannot determine " +
                            std::to_string(free_.size()) + " free parameters");
    }
  }

  std::size_t free_count() const { return free_.size(); }
  std::size_t point_count() const { return points_.size(); }
  const FreeParam& free_param(std::size_t j) const { return free_[j]; }
  const std::vector<double>& initial() const { return initial_; }
  bool uniform_fallback() const { return uniform_fallback_; }
  double weighted_data_norm() const { return weighted_data_norm_; }

  Eigen::VectorXd residuals(const std::vector<double>& raw) const {
    std::vector<double> values = model_values_;
    for (std::size_t j = 0; j < free_.size(); ++j) values[free_[j].model_index] = raw[j];
    Eigen::VectorXd r(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      r[i] = p.sqrt_weight * (model_.evaluate(values, contexts_[p.context], p.t) - p.y);
    }
    return r;
  }

  // Weighted Jacobian of the residuals with respect to the raw parameters.
  Eigen::MatrixXd raw_jacobian(const std::vector<double>& raw) const {
    Eigen::MatrixXd jac(points_.size(), free_.size());
    for (std::size_t j = 0; j < free_.size(); ++j) {
      const double h = std::max(1e-6 * std::abs(raw[j]), 1e-12);
      auto plus = raw;
      auto minus = raw;
      plus[j] += h;
      minus[j] -= h;
      jac.col(static_cast<Eigen::Index>(j)) = (residuals(plus) - residuals(minus)) / (plus[j] - minus[j]);
    }
    return jac;
  }

  std::vector<double> to_raw_vector(const Eigen::VectorXd& u) const {
    std::vector<double> raw(free_.size());
    for (std::size_t j = 0; j < free_.size(); ++j) raw[j] = to_raw(u[static_cast<Eigen::Index>(j)], free_[j].transform);
    return raw;
  }

  Eigen::VectorXd clamp(Eigen::VectorXd u) const {
    for (std::size_t j = 0; j < free_.size(); ++j) {
      auto& v = u[static_cast<Eigen::Index>(j)];
      v = std::clamp(v, free_[j].lower, free_[j].upper);
    }
    return u;
  }

 private:
  void require_known(const std::string& name) const { (void)index_of(name); }

  std::size_t index_of(const std::string& name) const {
    for (std::size_t i = 0; i < specs_.size(); ++i) {
      if (specs_[i].name == name) return i;
    }
    throw InvalidArgument("fit: model '" + std::string(model_.id()) + "' has no parameter '" + name + "'");
  }

  static void set_internal_limits(FreeParam& fp, double guess) {
    const auto& b = fp.raw_bounds;
    if (!(b.lower < b.upper)) throw InvalidArgument("fit: bounds for '" + fp.name + "' need lower < upper");
    if (!(guess >= b.lower && guess <= b.upper) || !std::isfinite(guess)) {
      throw InvalidArgument("fit: initial guess for '" + fp.name + "' lies outside its bounds");
    }
    switch (fp.transform) {
      case ParamTransform::kLog:
        if (!(guess > 0.0)) throw InvalidArgument("fit: initial guess for '" + fp.name + "' must be > 0");
        fp.lower = b.lower > 0.0 ? std::log(b.lower) : -700.0;
        fp.upper = std::isfinite(b.upper) ? std::log(b.upper) : 700.0;
        break;
      case ParamTransform::kLogistic:
        if (!(guess > 0.0 && guess < 1.0)) {
          throw InvalidArgument("fit: initial guess for '" + fp.name + "' must lie in (0, 1)");
        }
        fp.lower = b.lower > 0.0 ? to_internal(b.lower, fp.transform) : -36.0;
        fp.upper = b.upper < 1.0 ? to_internal(b.upper, fp.transform) : 36.0;
        break;
      case ParamTransform::kIdentity:
        fp.lower = b.lower;
        fp.upper = b.upper;
        break;
    }
  }

  const Model& model_;
  std::vector<ParamSpec> specs_;
  std::vector<double> model_values_;
  std::vector<FreeParam> free_;
  std::vector<double> initial_;
  std::vector<SeriesContext> contexts_;
  std::vector<Point> points_;
  double weighted_data_norm_ = 0.0;
  bool uniform_fallback_ = false;
};

double relative_change(const std::vector<double>& from, const std::vector<double>& to) {
  double worst = 0.0;
  for (std::size_t j = 0; j < from.size(); ++j) {
    const double scale = std::max(std::abs(from[j]), 1e-300);
    worst = std::max(worst, std::abs(to[j] - from[j]) / scale);
  }
  return worst;
}

// Fills covariance/uncertainties; returns the names of parameters the data
// cannot pin down.
std::vector<std::string> fill_covariance(const Problem& problem, const std::vector<double>& raw, double cost,
                                         FitResult& result) {
  const auto p = problem.free_count();
  const auto n = problem.point_count();
  const Eigen::MatrixXd jac = problem.raw_jacobian(raw);
  const Eigen::MatrixXd normal = jac.transpose() * jac;

  std::vector<std::string> unidentified;
  std::vector<bool> lost(p, false);
  Eigen::VectorXd scale(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    const double d = normal(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    scale[static_cast<Eigen::Index>(j)] = d > 0.0 && std::isfinite(d) ? std::sqrt(d) : 0.0;
    if (scale[static_cast<Eigen::Index>(j)] == 0.0) lost[j] = true;
  }

  // Work on the correlation form so the rank test is scale free.
  Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) {
      if (lost[a] || lost[b]) continue;
      const auto ia = static_cast<Eigen::Index>(a);
      const auto ib = static_cast<Eigen::Index>(b);
      corr(ia, ib) = normal(ia, ib) / (scale[ia] * scale[ib]);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const Eigen::MatrixXd& vectors = eig.eigenvectors();
  const double threshold = kRankTolerance * std::max(lambda.maxCoeff(), 1.0);
  Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (lambda[k] > threshold) {
      pinv += vectors.col(k) * vectors.col(k).transpose() / lambda[k];
    } else {
      for (std::size_t j = 0; j < p; ++j) {
        if (std::abs(vectors(static_cast<Eigen::Index>(j), k)) > 1e-3) lost[j] = true;
      }
    }
  }

  const bool spare_dof = n > p;
  const double variance = spare_dof ? 2.0 * cost / static_cast<double>(n - p) : 1.0;
  if (!spare_dof) result.diagnostics.push_back("zero degrees of freedom: covariance not scaled by chi-square");

  result.covariance = Matrix(p, p);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b) {
      if (lost[a] || lost[b]) {
        result.covariance(a, b) = a == b ? std::numeric_limits<double>::infinity() : 0.0;
        continue;
      }
      const auto ia = static_cast<Eigen::Index>(a);
      const auto ib = static_cast<Eigen::Index>(b);
      result.covariance(a, b) = variance * pinv(ia, ib) / (scale[ia] * scale[ib]);
    }
  }
  // Symmetrise exactly.
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) {
      const double avg = 0.5 * (result.covariance(a, b) + result.covariance(b, a));
      result.covariance(a, b) = avg;
      result.covariance(b, a) = avg;
    }
  }
  for (std::size_t j = 0; j < p; ++j) {
    result.uncertainties.set(problem.free_param(j).name, std::sqrt(std::max(result.covariance(j, j), 0.0)));
    if (lost[j]) unidentified.push_back(problem.free_param(j).name);
  }
  return unidentified;
}

}  // namespace

double residual_norm(const FitProblem& spec, const NamedValues& params) {
  FitProblem copy = spec;
  copy.free_params = {};
  copy.fixed_params = params;
  const Problem problem(copy);
  return problem.residuals({}).norm();
}

FitResult fit_curve(const FitProblem& spec) {
  const Problem problem(spec);
  const auto p = problem.free_count();

  FitResult result;
  result.model = spec.model;
  result.fixed_params = spec.fixed_params;
  result.data_points = problem.point_count();
  if (problem.uniform_fallback()) result.diagnostics.push_back("some data sets lack sigma; uniform weights used");

  Eigen::VectorXd u(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    u[static_cast<Eigen::Index>(j)] = to_internal(problem.initial()[j], problem.free_param(j).transform);
  }
  u = problem.clamp(u);
  std::vector<double> raw = problem.to_raw_vector(u);
  Eigen::VectorXd r = problem.residuals(raw);
  double cost = 0.5 * r.squaredNorm();
  result.initial_residual_norm = std::sqrt(2.0 * cost);

  if (!std::isfinite(cost)) {
    result.diagnostics.push_back("non-finite residuals at the initial guess");
  } else {
    const double exact_cost = kExactFitCost * std::max(problem.weighted_data_norm(), 1e-300);
    double damping = kInitialDamping;
    bool done = p == 0 || cost <= exact_cost;
    result.converged = done;
    while (!done && result.iterations < spec.max_iterations) {
      ++result.iterations;
      Eigen::MatrixXd jac = problem.raw_jacobian(raw);
      for (std::size_t j = 0; j < p; ++j) {
        jac.col(static_cast<Eigen::Index>(j)) *= raw_derivative(raw[j], problem.free_param(j).transform);
      }
      const Eigen::MatrixXd normal = jac.transpose() * jac;
      const Eigen::VectorXd gradient = jac.transpose() * r;
      const Eigen::VectorXd diag = normal.diagonal();
      const double max_diag = p > 0 ? diag.maxCoeff() : 0.0;
      if (!(max_diag > 0.0) || !std::isfinite(max_diag)) {
        result.diagnostics.push_back("singular normal equations: residuals do not depend on any free parameter");
        break;
      }

      // Inner loop: raise the damping until a step lowers the cost.
      bool accepted = false;
      while (!accepted && !done) {
        Eigen::MatrixXd damped = normal;
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(p); ++j) {
          damped(j, j) += damping * std::max(diag[j], 1e-12 * max_diag);
        }
        const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
        const Eigen::VectorXd trial_u = problem.clamp(u + step);
        const auto trial_raw = problem.to_raw_vector(trial_u);
        const double change = relative_change(raw, trial_raw);
        const Eigen::VectorXd trial_r = problem.residuals(trial_raw);
        const double trial_cost = 0.5 * trial_r.squaredNorm();

        if (step.allFinite() && std::isfinite(trial_cost) && trial_cost < cost) {
          const double cost_drop = (cost - trial_cost) / cost;
          u = trial_u;
          raw = trial_raw;
          r = trial_r;
          cost = trial_cost;
          damping = std::max(damping / 10.0, 1e-15);
          accepted = true;
          if ((change < kParamTolerance && cost_drop < kCostTolerance) || cost <= exact_cost) {
            done = true;
            result.converged = true;
          }
        } else if (change < kParamTolerance) {
          // No representable improvement left: stationary point.
          done = true;
          result.converged = true;
        } else {
          damping *= 10.0;
          if (damping > kMaxDamping) {
            result.diagnostics.push_back("damping limit reached without lowering the cost");
            done = true;
          }
        }
      }
    }
    if (!result.converged && result.iterations >= spec.max_iterations) {
      result.diagnostics.push_back("iteration cap of " + std::to_string(spec.max_iterations) + " reached");
    }
  }

  for (std::size_t j = 0; j < p; ++j) result.estimates.set(problem.free_param(j).name, raw[j]);
  result.residual_norm = std::sqrt(2.0 * cost);

  for (std::size_t j = 0; j < p; ++j) {
    const auto& fp = problem.free_param(j);
    const double v = u[static_cast<Eigen::Index>(j)];
    const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
    if ((std::isfinite(fp.lower) && near(v, fp.lower)) || (std::isfinite(fp.upper) && near(v, fp.upper))) {
      result.pinned.push_back(fp.name);
      result.diagnostics.push_back("parameter '" + fp.name + "' pinned at a bound");
    }
  }

  if (p > 0 && std::isfinite(cost)) {
    const auto unidentified = fill_covariance(problem, raw, cost, result);
    if (!unidentified.empty()) {
      result.ill_conditioned = true;
      result.converged = false;
      std::ostringstream msg;
      msg << "singular normal equations: not identifiable from the data:";
      for (const auto& name : unidentified) msg << ' ' << name;
      result.diagnostics.push_back(msg.str());
    }
  }
  return result;
}

}  // namespace echolab::fit
