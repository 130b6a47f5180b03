#include "echolab/synth.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <random>
#include <thread>

#include "echolab/error.hpp"
#include "echolab/model_registry.hpp"
#include "echolab/procedures.hpp"

namespace echolab::synth {
namespace {

constexpr std::array<std::pair<ScheduleKind, std::string_view>, 6> kKindNames{{
    {ScheduleKind::kShbDecay, "shb-decay"},
    {ScheduleKind::kShbDecayBfield, "shb-decay-bfield"},
    {ScheduleKind::k2ppe, "2ppe"},
    {ScheduleKind::k3ppe, "3ppe"},
    {ScheduleKind::kStarkSweep, "stark-sweep"},
    {ScheduleKind::kPowerSweep, "power-sweep"},
}};

std::string shortest(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::vector<double> log_spaced(double first, double last, std::size_t count) {
  std::vector<double> out(count);
  const double a = std::log(first);
  const double b = std::log(last);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  out.front() = first;
  out.back() = last;
  return out;
}

bool compatible(std::string_view model, ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::kShbDecay:
    case ScheduleKind::kShbDecayBfield:
      return model == "hole-decay";
    case ScheduleKind::k2ppe:
      return model == "mims";
    case ScheduleKind::k3ppe:
      return model == "3ppe" || model == "3ppe-normalized" || model == "population" || model == "saturation";
    case ScheduleKind::kStarkSweep:
      return model == "stark";
    case ScheduleKind::kPowerSweep:
      return model == "linear";
  }
  return false;
}

// Runs the domain-type checks on whichever parameter groups the truth carries.
void validate_truth(const NamedValues& p) {
  if (p.contains("b") && p.contains("t1e") && p.contains("t1b")) (void)DecayModelParams{p.at("b"), p.at("t1e"), p.at("t1b")};
  if (p.contains("t2") && p.contains("x")) (void)CoherenceParams{p.contains("i0") ? p.at("i0") : 1.0, p.at("t2"), p.at("x")};
  if (p.contains("gamma0") && p.contains("gamma_sd") && p.contains("rate")) {
    (void)DiffusionParams{p.at("gamma0"), p.at("gamma_sd"), p.at("rate")};
  }
}

TimeSeries synthesize_one(const fit::Model& model, const NamedValues& params, const ExperimentSchedule& schedule,
                          const NoiseModel& noise, std::size_t set_index, std::optional<double> delay) {
  if (!(noise.relative_sigma >= 0.0) || !(noise.additive_floor >= 0.0)) {
    throw InvalidArgument("noise magnitudes must be >= 0");
  }
  fit::SeriesContext ctx{set_index};
  if (delay) ctx.delay = *delay;

  std::seed_seq seq{static_cast<std::uint32_t>(noise.seed), static_cast<std::uint32_t>(noise.seed >> 32),
                    static_cast<std::uint32_t>(set_index)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Sample> samples;
  samples.reserve(schedule.values.size());
  for (double t : schedule.values) {
    const double clean = fit::evaluate(model, params, t, ctx);
    const double n1 = gauss(rng);
    const double n2 = gauss(rng);
    const double y = clean * (1.0 + noise.relative_sigma * n1) + noise.additive_floor * n2;
    const double rel = noise.relative_sigma * clean;
    const double sd = std::sqrt(rel * rel + noise.additive_floor * noise.additive_floor);
    samples.push_back({t, y, sd > 0.0 ? std::optional<double>(sd) : std::nullopt});
  }
  TimeSeries::Meta meta{{"model", std::string(model.id())},
                        {"schedule", std::string(to_string(schedule.kind))},
                        {"seed", std::to_string(noise.seed)}};
  if (delay) meta["delay_seconds"] = shortest(*delay);
  return TimeSeries(std::move(samples), model.y_unit(), std::move(meta));
}

double quantile(std::vector<double> sorted_values, double q) {
  if (sorted_values.empty()) return std::nan("");
  const double pos = q * static_cast<double>(sorted_values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted_values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted_values[lo] + frac * (sorted_values[hi] - sorted_values[lo]);
}

struct SeedOutcome {
  bool converged = false;
  NamedValues estimates;
};

SeedOutcome run_seed(const RoundtripConfig& config, std::uint64_t seed) {
  NoiseModel noise = config.noise;
  noise.seed = seed;
  SeedOutcome out;
  if (config.model == "hole-decay") {
    const auto fitted = fit::fit_hole_decay(synthesize("hole-decay", config.truth, config.schedule, noise));
    out.converged = fitted.converged;
    out.estimates = fitted.estimates;
  } else if (config.model == "mims") {
    const auto fitted = fit::fit_mims(synthesize("mims", config.truth, config.schedule, noise));
    out.converged = fitted.converged;
    out.estimates = fitted.estimates;
  } else if (config.model == "3ppe") {
    const auto sets = synthesize_sets("3ppe", config.truth, config.schedule, noise);
    const auto fitted = fit::fit_3ppe_joint(sets, config.truth.at("t1b"));
    out.converged = fitted.converged;
    out.estimates = fitted.estimates;
  } else if (config.model == "linear") {
    const auto series = synthesize("linear", config.truth, config.schedule, noise);
    std::vector<fit::PowerWidth> points;
    for (const auto& s : series.points()) points.push_back({s.t, s.y, s.sigma});
    const auto line = fit::extrapolate_zero_power(points);
    out.converged = std::isfinite(line.intercept) && std::isfinite(line.slope);
    out.estimates = {{"slope", line.slope}, {"intercept", line.intercept}};
  } else {
    throw InvalidArgument("no round-trip fit for model '" + config.model + "'");
  }
  return out;
}

}  // namespace

std::string_view to_string(ScheduleKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view tag) {
  for (const auto& [k, name] : kKindNames) {
    if (name == tag) return k;
  }
  throw InvalidArgument("unknown experiment kind '" + std::string(tag) + "'");
}

ExperimentSchedule reference_schedule(ScheduleKind kind, const ScheduleOptions& options) {
  ExperimentSchedule s{kind, {}, {}, {}};
  switch (kind) {
    case ScheduleKind::k2ppe:
      // Integer nanoseconds divided once, so every grid point is correctly rounded.
      for (int ns = 100; ns <= 1800; ns += 25) s.values.push_back(ns / 1e9);
      s.annotations["quantity"] = "pulse delay";
      break;
    case ScheduleKind::k3ppe: {
      if (!(options.ppe3_step > 0.0)) throw InvalidArgument("3PPE step must be > 0");
      const double step_us = options.ppe3_step * 1e6;
      for (int k = 0;; ++k) {
        const double us = 1.0 + step_us * k;
        if (us > 400.0 + 1e-9) break;
        s.values.push_back(us / 1e6);
      }
      s.delays = {120e-9, 200e-9, 280e-9};
      s.annotations["quantity"] = "waiting time";
      break;
    }
    case ScheduleKind::kShbDecay:
      s.values = log_spaced(10e-6, 15e-3, 40);
      s.annotations["quantity"] = "waiting time";
      break;
    case ScheduleKind::kShbDecayBfield:
      s.values = log_spaced(0.1, 6.0, 20);
      s.annotations["quantity"] = "waiting time";
      break;
    case ScheduleKind::kPowerSweep:
      s.values = log_spaced(4e-6, 400e-6, 10);
      s.annotations["quantity"] = "burn power";
      break;
    case ScheduleKind::kStarkSweep:
      for (int v = -1000; v <= 1000; v += 100) s.values.push_back(static_cast<double>(v));
      s.annotations["quantity"] = "electric field";
      break;
  }
  return s;
}

TimeSeries synthesize(std::string_view model_id, const NamedValues& params, const ExperimentSchedule& schedule,
                      const NoiseModel& noise) {
  const auto& model = fit::find_model(model_id);
  if (!compatible(model_id, schedule.kind)) {
    throw InvalidArgument("model '" + std::string(model_id) + "' cannot be sampled on a " +
                          std::string(to_string(schedule.kind)) + " schedule");
  }
  if (schedule.values.empty()) throw InvalidArgument("schedule is empty");
  validate_truth(params);
  std::optional<double> delay;
  if (model_id == "3ppe" || model_id == "3ppe-normalized") {
    if (schedule.delays.size() != 1) {
      throw InvalidArgument("synthesize needs a single-delay 3PPE schedule; use synthesize_sets");
    }
    delay = schedule.delays.front();
  }
  return synthesize_one(model, params, schedule, noise, 0, delay);
}

std::vector<TimeSeries> synthesize_sets(std::string_view model_id, const NamedValues& params,
                                        const ExperimentSchedule& schedule, const NoiseModel& noise) {
  if (model_id != "3ppe" && model_id != "3ppe-normalized") {
    throw InvalidArgument("synthesize_sets is for 3PPE models");
  }
  if (schedule.kind != ScheduleKind::k3ppe || schedule.delays.empty()) {
    throw InvalidArgument("synthesize_sets needs a 3PPE schedule with delays");
  }
  validate_truth(params);
  const auto& model = fit::find_model(model_id);
  std::vector<TimeSeries> sets;
  for (std::size_t k = 0; k < schedule.delays.size(); ++k) {
    sets.push_back(synthesize_one(model, params, schedule, noise, k, schedule.delays[k]));
  }
  return sets;
}

double RoundtripReport::min_pass_fraction() const {
  double worst = 1.0;
  for (const auto& p : parameters) worst = std::min(worst, p.pass_fraction);
  return worst;
}

RoundtripReport montecarlo_roundtrip(const RoundtripConfig& config) {
  if (config.n_seeds < 1) throw InvalidArgument("round trip needs at least one seed");
  for (const auto& [name, tol] : config.tolerances) {
    if (!config.truth.contains(name)) throw InvalidArgument("no truth value for judged parameter '" + name + "'");
  }
  // Validate the configuration on the calling thread so errors surface as
  // exceptions rather than inside a worker.
  std::vector<SeedOutcome> outcomes(config.n_seeds);
  outcomes[0] = run_seed(config, config.noise.seed);

  unsigned workers = config.threads != 0 ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, config.n_seeds - 1));
  std::atomic<std::size_t> next{1};
  auto work = [&] {
    for (std::size_t i = next++; i < config.n_seeds; i = next++) {
      outcomes[i] = run_seed(config, config.noise.seed + i);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  RoundtripReport report;
  report.model = config.model;
  report.n_seeds = config.n_seeds;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (!outcomes[i].converged) {
      ++report.non_converged;
      report.non_converged_seeds.push_back(config.noise.seed + i);
    }
  }
  for (const auto& [name, tol] : config.tolerances) {
    ParameterRecovery rec;
    rec.name = name;
    rec.truth = config.truth.at(name);
    rec.tolerance = tol;
    std::vector<double> values;
    std::size_t hits = 0;
    for (const auto& o : outcomes) {
      const auto v = o.estimates.find(name);
      if (!v) continue;
      values.push_back(*v);
      const double err = std::abs(*v - rec.truth);
      const double limit = tol.relative ? tol.value * std::abs(rec.truth) : tol.value;
      if (o.converged && err <= limit) ++hits;
    }
    std::sort(values.begin(), values.end());
    rec.median = quantile(values, 0.5);
    rec.lower = quantile(values, 0.05);
    rec.upper = quantile(values, 0.95);
    rec.pass_fraction = static_cast<double>(hits) / static_cast<double>(config.n_seeds);
    report.parameters.push_back(rec);
  }
  return report;
}

}  // namespace echolab::synth
