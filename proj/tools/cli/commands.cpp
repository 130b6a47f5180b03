#include "cli/commands.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cli/settings.hpp"
#include "echolab/error.hpp"
#include "echolab/fit.hpp"
#include "echolab/model_registry.hpp"
#include "echolab/models.hpp"
#include "echolab/procedures.hpp"
#include "echolab/synth.hpp"
#include "echolab/trace_io.hpp"
#include "echolab/version.hpp"

namespace echolab::cli {
namespace fs = std::filesystem;

namespace {

struct KeySpec {
  std::string key;
  std::string help;
  bool repeated = false;
};

// Model parameters accepted as --<name> by simulate and roundtrip.
const std::vector<KeySpec> kParamKeys{
    {"b", "bottleneck amplitude B"},
    {"t1e", "excited-state lifetime"},
    {"t1b", "bottleneck lifetime"},
    {"amplitude", "overall scale of the hole-decay trace"},
    {"i0", "echo amplitude"},
    {"t2", "phase memory time"},
    {"x", "Mims stretch exponent"},
    {"gamma0", "homogeneous linewidth without diffusion"},
    {"gamma_sd", "spectral diffusion linewidth"},
    {"rate", "spectral diffusion rate"},
    {"slope", "Stark coefficient or width-per-power slope"},
    {"intercept", "zero-power width"},
};

Kind param_kind(std::string_view model, std::string_view name) {
  if (name == "t1e" || name == "t1b" || name == "t2") return Kind::kTime;
  if (name == "gamma0" || name == "gamma_sd" || name == "rate" || name == "intercept") return Kind::kFrequency;
  if (name == "slope") return model == "stark" ? Kind::kStarkSlope : Kind::kPowerSlope;
  if (name == "d1e") return Kind::kLength;
  return Kind::kNumber;
}

bool defaults_to_one(std::string_view name) {
  return name == "amplitude" || name == "i0" || name.starts_with("i0_");
}

std::string shortest(double v) {
  std::array<char, 40> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string shortest_scientific(double v) {
  std::array<char, 40> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::scientific);
  return std::string(buf.data(), ptr);
}

std::string significant(double v, int digits) {
  std::array<char, 40> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, digits);
  return std::string(buf.data(), ptr);
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_list(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      part.erase(0, part.find_first_not_of(" \t"));
      part.erase(part.find_last_not_of(" \t") + 1);
      if (!part.empty()) out.push_back(part);
    }
  }
  return out;
}

struct Invocation {
  std::string command_line;
  Settings settings;
  std::ostream& out;
  std::ostream& err;
};

fs::path output_dir(const Settings& s) {
  if (auto dir = s.get("output-dir")) return *dir;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return ".";
}

fs::path resolve_output(const Settings& s, const std::string& fallback_name) {
  const fs::path dir = output_dir(s);
  fs::path p = s.get("output") ? fs::path(*s.get("output")) : fs::path(fallback_name);
  p = dir / p;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

fs::path with_suffix(const fs::path& stem_path, const std::string& suffix) {
  fs::path p = stem_path;
  if (p.extension() == ".csv") p.replace_extension();
  return p.string() + suffix;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write '" + path.string() + "'");
  return f;
}

void write_comment_header(std::ostream& f, const Invocation& inv, std::string_view seed) {
  f << "# echo-lab " << kVersion << '\n';
  f << "# version = " << kVersion << '\n';
  f << "# command = " << inv.command_line << '\n';
  f << "# seed = " << seed << '\n';
}

// ---------------------------------------------------------------- simulate

std::string default_schedule(std::string_view model) {
  if (model == "hole-decay") return "shb-decay";
  if (model == "mims") return "2ppe";
  if (model == "3ppe" || model == "3ppe-normalized" || model == "population" || model == "saturation") return "3ppe";
  if (model == "stark") return "stark-sweep";
  if (model == "linear") return "power-sweep";
  throw InputError("model '" + std::string(model) + "' has no measurement schedule to simulate");
}

int cmd_simulate(Invocation& inv) {
  const auto& s = inv.settings;
  const std::string model_id = s.require("model");
  const auto& model = fit::find_model(model_id);

  if (model_id == "stark" && s.has("field")) {
    const double field = s.require_quantity("field", Kind::kField);
    const StarkParams stark(s.require_quantity("slope", Kind::kStarkSlope));
    inv.out << shortest_scientific(models::stark_shift(field, stark)) << " Hz\n";
    return kExitOk;
  }

  const auto kind = synth::parse_schedule_kind(s.get("schedule").value_or(default_schedule(model_id)));
  synth::ScheduleOptions schedule_options;
  schedule_options.ppe3_step = s.quantity_or("step", Kind::kTime, schedule_options.ppe3_step);
  auto schedule = synth::reference_schedule(kind, schedule_options);
  if (!s.list("delay").empty()) {
    schedule.delays.clear();
    for (const auto& d : split_list(s.list("delay"))) schedule.delays.push_back(parse_quantity(d, Kind::kTime, "delay"));
  }
  const bool sets = kind == synth::ScheduleKind::k3ppe && (model_id == "3ppe" || model_id == "3ppe-normalized");

  NamedValues params;
  for (const auto& spec : model.parameters(sets ? schedule.delays.size() : 1)) {
    if (auto v = s.quantity(spec.name, param_kind(model_id, spec.name))) {
      params.set(spec.name, *v);
    } else if (defaults_to_one(spec.name)) {
      params.set(spec.name, 1.0);
    } else {
      throw InputError("missing required parameter '" + spec.name + "'");
    }
  }

  synth::NoiseModel noise;
  noise.relative_sigma = s.quantity_or("noise", Kind::kNumber, 0.0);
  noise.additive_floor = s.quantity_or("floor", Kind::kNumber, 0.0);
  noise.seed = static_cast<std::uint64_t>(s.integer("seed").value_or(0));

  std::vector<TimeSeries> series;
  if (sets) {
    series = synth::synthesize_sets(model_id, params, schedule, noise);
  } else {
    series.push_back(synth::synthesize(model_id, params, schedule, noise));
  }

  io::Header provenance{{"version", std::string(kVersion)}, {"command", inv.command_line}};
  for (const auto& [name, value] : params) provenance.emplace_back("param." + name, io::format_number(value));

  const fs::path base = resolve_output(s, model_id + ".csv");
  std::vector<std::string> written;
  for (std::size_t k = 0; k < series.size(); ++k) {
    fs::path path = base;
    if (series.size() > 1) {
      const auto ns = static_cast<long long>(std::llround(schedule.delays[k] * 1e9));
      path = with_suffix(base, "-td" + std::to_string(ns) + "ns.csv");
    }
    io::write_trace_file(path.string(), series[k], provenance);
    written.push_back(path.string());
  }

  const fs::path sidecar = with_suffix(base, ".provenance");
  auto f = open_output(sidecar);
  f << "# echo-lab provenance\n";
  f << "version = " << kVersion << '\n';
  f << "command = " << inv.command_line << '\n';
  f << "model = " << model_id << '\n';
  f << "schedule = " << synth::to_string(kind) << '\n';
  f << "seed = " << noise.seed << '\n';
  f << "noise = " << io::format_number(noise.relative_sigma) << '\n';
  f << "floor = " << io::format_number(noise.additive_floor) << '\n';
  for (const auto& [name, value] : params) f << "param." << name << " = " << io::format_number(value) << '\n';
  for (std::size_t k = 0; k < schedule.delays.size() && sets; ++k) {
    f << "delay." << k << " = " << io::format_number(schedule.delays[k]) << '\n';
  }
  f << "files = " << join(written, ",") << '\n';

  for (const auto& w : written) inv.out << "wrote " << w << " (" << series.front().size() << " rows)\n";
  inv.out << "wrote " << sidecar.string() << '\n';
  return kExitOk;
}

// --------------------------------------------------------------------- fit

struct FitOutcome {
  FitResult result;
  std::vector<TimeSeries> fitted_data;  // the data the fit saw (normalised for 3ppe-normalized)
};

TimeSeries normalized_to_first(const TimeSeries& ds) {
  const double ref = ds.points().front().y;
  if (!(ref > 0.0)) throw InputError("3PPE normalisation needs a positive first point");
  std::vector<Sample> scaled;
  for (const auto& p : ds.points()) {
    scaled.push_back({p.t, p.y / ref, p.sigma ? std::optional<double>(*p.sigma / ref) : std::nullopt});
  }
  return TimeSeries(std::move(scaled), ds.y_unit(), ds.meta());
}

NamedValues parse_assignments(const std::vector<std::string>& raw, std::string_view key, std::string_view model) {
  NamedValues out;
  for (const auto& item : split_list(raw)) {
    auto [name, value] = split_assignment(item, key);
    out.set(name, parse_quantity(value, param_kind(model, name), name));
  }
  return out;
}

FitResult linear_result(const fit::LinearFit& line, std::size_t n) {
  FitResult r;
  r.model = "linear";
  r.estimates = {{"slope", line.slope}, {"intercept", line.intercept}};
  r.uncertainties = {{"slope", line.slope_sigma}, {"intercept", line.intercept_sigma}};
  r.covariance = Matrix(2, 2);
  r.covariance(0, 0) = line.slope_sigma * line.slope_sigma;
  r.covariance(1, 1) = line.intercept_sigma * line.intercept_sigma;
  r.covariance(0, 1) = r.covariance(1, 0) = line.covariance;
  r.derived.set("zero_power_width", line.intercept);
  r.residual_norm = line.residual_norm;
  r.initial_residual_norm = line.residual_norm;
  r.data_points = n;
  r.converged = std::isfinite(line.intercept) && std::isfinite(line.slope);
  return r;
}

// Least-squares slope through the origin, the natural start for a Stark sweep.
double origin_slope(const std::vector<TimeSeries>& data) {
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& ds : data) {
    for (const auto& p : ds.points()) {
      sxy += p.t * p.y;
      sxx += p.t * p.t;
    }
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

FitOutcome run_fit(const Settings& s, const std::string& model_id, const std::vector<TimeSeries>& data) {
  const NamedValues fixes = parse_assignments(s.list("fix"), "fix", model_id);
  const NamedValues guesses = parse_assignments(s.list("guess"), "guess", model_id);

  if (model_id == "3ppe" || model_id == "3ppe-normalized") {
    auto t1b = fixes.find("t1b");
    if (!t1b) throw InputError("missing required parameter 't1b' (pass --fix t1b=<value>)");
    for (const auto& [name, value] : fixes) {
      if (name != "t1b" && name != "gamma0") throw InputError("'" + name + "' cannot be fixed in a 3PPE fit");
    }
    fit::StimulatedEchoOptions options;
    options.fixed_gamma0 = fixes.find("gamma0");
    if (model_id == "3ppe-normalized") {
      if (!options.fixed_gamma0) {
        throw InputError("missing required parameter 'gamma0' (3ppe-normalized cannot determine it; pass --fix gamma0=<value>)");
      }
      options.amplitude_mode = fit::AmplitudeMode::kPerSetNormalized;
    }
    FitOutcome o{fit::fit_3ppe_joint(data, *t1b, options), {}};
    for (const auto& ds : data) o.fitted_data.push_back(model_id == "3ppe" ? ds : normalized_to_first(ds));
    return o;
  }

  if (model_id == "linear" && fixes.empty() && guesses.empty()) {
    if (data.size() != 1) throw InputError("linear fit takes exactly one input file");
    std::vector<fit::PowerWidth> points;
    for (const auto& p : data.front().points()) points.push_back({p.t, p.y, p.sigma});
    return {linear_result(fit::extrapolate_zero_power(points), points.size()), data};
  }

  const bool dedicated = model_id == "hole-decay" || model_id == "mims";
  if (dedicated && data.size() != 1) throw InputError(model_id + " fit takes exactly one input file");
  fit::HoleDecayOptions hole_options;
  hole_options.free_amplitude = s.flag("free-amplitude");
  if (dedicated && fixes.empty() && guesses.empty()) {
    auto r = model_id == "mims" ? fit::fit_mims(data.front()) : fit::fit_hole_decay(data.front(), hole_options);
    return {std::move(r), data};
  }

  // General path: any registered model, explicit fixes and starting values.
  const auto& model = fit::find_model(model_id);
  NamedValues start;
  if (dedicated) {
    const auto seed_fit =
        model_id == "mims" ? fit::fit_mims(data.front()) : fit::fit_hole_decay(data.front(), hole_options);
    for (const auto& [name, value] : seed_fit.estimates) start.set(name, value);
    for (const auto& [name, value] : seed_fit.fixed_params) start.set(name, value);
  }
  if (model_id == "stark") start.set("slope", origin_slope(data));
  for (const auto& [name, value] : guesses) start.set(name, value);

  fit::FitProblem problem;
  problem.model = model_id;
  problem.data = data;
  if (auto iters = s.integer("max-iterations")) problem.max_iterations = static_cast<int>(*iters);
  for (const auto& spec : model.parameters(data.size())) {
    if (auto v = fixes.find(spec.name)) {
      problem.fixed_params.set(spec.name, *v);
    } else if (model_id == "hole-decay" && spec.name == "amplitude" && !hole_options.free_amplitude) {
      problem.fixed_params.set(spec.name, 1.0);
    } else if (auto g = start.find(spec.name)) {
      problem.free_params.set(spec.name, *g);
    } else {
      throw InputError("no starting value for '" + spec.name + "'; pass --guess " + spec.name + "=<value>");
    }
  }
  for (const auto& [name, value] : fixes) {
    if (!problem.fixed_params.contains(name)) {
      throw InputError("model '" + model_id + "' has no parameter '" + name + "'");
    }
  }
  return {fit::fit_curve(problem), data};
}

double fitted_value(const FitResult& r, std::size_t set, const TimeSeries& ds, double t) {
  if (r.model == "linear") return r.value("intercept") + r.value("slope") * t;
  const auto& model = fit::find_model(r.model);
  NamedValues all = r.estimates;
  for (const auto& [name, value] : r.fixed_params) all.set(name, value);
  return fit::evaluate(model, all, t, model.bind(ds, set));
}

void print_fit(std::ostream& out, const FitResult& r) {
  out << "model          " << r.model << '\n';
  out << "converged      " << (r.converged ? "yes" : "no") << " after " << r.iterations << " iterations\n";
  out << "data points    " << r.data_points << '\n';
  out << "residual norm  " << significant(r.residual_norm, 6) << " (start " << significant(r.initial_residual_norm, 6)
      << ")\n\n";
  out << std::left << std::setw(20) << "parameter" << std::setw(20) << "estimate" << "uncertainty\n";
  for (const auto& [name, value] : r.estimates) {
    const auto sigma = r.uncertainties.find(name);
    out << std::setw(20) << name << std::setw(20) << significant(value, 6)
        << (sigma ? significant(*sigma, 3) : std::string("-")) << '\n';
  }
  for (const auto& [name, value] : r.fixed_params) {
    out << std::setw(20) << name << std::setw(20) << significant(value, 6) << "fixed\n";
  }
  for (const auto& [name, value] : r.derived) {
    out << std::setw(20) << name << std::setw(20) << significant(value, 6) << "derived\n";
  }
  for (const auto& d : r.diagnostics) out << "note: " << d << '\n';
  out << std::right;

  out << "\n[result]\n";
  out << "model = " << r.model << '\n';
  out << "converged = " << (r.converged ? "true" : "false") << '\n';
  out << "ill_conditioned = " << (r.ill_conditioned ? "true" : "false") << '\n';
  out << "iterations = " << r.iterations << '\n';
  out << "data_points = " << r.data_points << '\n';
  out << "residual_norm = " << io::format_number(r.residual_norm) << '\n';
  for (const auto& [name, value] : r.estimates) out << "estimate." << name << " = " << io::format_number(value) << '\n';
  for (const auto& [name, value] : r.uncertainties) {
    out << "uncertainty." << name << " = " << io::format_number(value) << '\n';
  }
  for (const auto& [name, value] : r.fixed_params) out << "fixed." << name << " = " << io::format_number(value) << '\n';
  for (const auto& [name, value] : r.derived) out << "derived." << name << " = " << io::format_number(value) << '\n';
  if (!r.pinned.empty()) out << "pinned = " << join(r.pinned, ",") << '\n';
}

int cmd_fit(Invocation& inv) {
  const auto& s = inv.settings;
  const std::string model_id = s.require("model");
  const auto& model = fit::find_model(model_id);
  const auto& inputs = s.list("input");
  if (inputs.empty()) throw InputError("missing required parameter 'input'");

  std::vector<TimeSeries> data;
  for (const auto& path : inputs) {
    auto series = io::read_trace_file(path);
    if (auto unit = series.meta_value("y_unit"); unit && series.y_unit() != model.y_unit()) {
      throw InputError(path + ": y_unit mismatch, model '" + model_id + "' expects " +
                       std::string(to_string(model.y_unit())) + " but the file holds " + *unit);
    }
    data.push_back(std::move(series));
  }

  const auto outcome = run_fit(s, model_id, data);
  const auto& r = outcome.result;
  print_fit(inv.out, r);

  const std::string seed = data.front().meta_value("seed").value_or("none");
  const fs::path stem = resolve_output(s, "fit-" + model_id);
  const auto n_sets = outcome.fitted_data.size();

  std::vector<std::string> written;
  auto plot = open_output(with_suffix(stem, ".plot.csv"));
  write_comment_header(plot, inv, seed);
  plot << "# model = " << r.model << '\n';
  plot << "set,t_seconds,data,sigma,fitted,residual\n";
  for (std::size_t k = 0; k < n_sets; ++k) {
    const auto& ds = outcome.fitted_data[k];
    std::vector<Sample> residuals;
    for (const auto& p : ds.points()) {
      const double f = fitted_value(r, k, ds, p.t);
      residuals.push_back({p.t, p.y - f, p.sigma});
      plot << k << ',' << io::format_number(p.t) << ',' << io::format_number(p.y) << ','
           << (p.sigma ? io::format_number(*p.sigma) : std::string()) << ',' << io::format_number(f) << ','
           << io::format_number(p.y - f) << '\n';
    }
    TimeSeries::Meta meta{{"quantity", "residual"}};
    if (auto d = ds.meta_value("delay_seconds")) meta["delay_seconds"] = *d;
    const fs::path path =
        with_suffix(stem, n_sets > 1 ? ".residuals-" + std::to_string(k) + ".csv" : std::string(".residuals.csv"));
    io::write_trace_file(path.string(), TimeSeries(std::move(residuals), ds.y_unit(), std::move(meta)),
                         {{"version", std::string(kVersion)}, {"command", inv.command_line}, {"seed", seed},
                          {"model", r.model}});
    written.push_back(path.string());
  }
  written.push_back(with_suffix(stem, ".plot.csv").string());
  inv.out << '\n';
  for (const auto& w : written) inv.out << "wrote " << w << '\n';

  if (!r.converged) {
    inv.err << "echo-lab: fit did not converge; last iterate written\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

// --------------------------------------------------------------- roundtrip

struct Experiment {
  std::string name;
  std::string model;
  synth::ScheduleKind schedule;
  NamedValues truth;
  double noise;
  double floor;
  std::size_t seeds;
  double threshold;
  std::map<std::string, synth::Tolerance, std::less<>> tolerances;  // every parameter that can be judged
  std::vector<std::string> judged;                                  // judged by default
};

const std::vector<Experiment>& experiments() {
  static const std::vector<Experiment> kExperiments{
      {"hole-decay",
       "hole-decay",
       synth::ScheduleKind::kShbDecay,
       {{"b", 0.436}, {"t1e", 82e-6}, {"t1b", 2.364e-3}, {"amplitude", 1.0}},
       0.02,
       0.0,
       100,
       0.95,
       {{"b", {0.05}}, {"t1e", {0.05}}, {"t1b", {0.05}}},
       {"b", "t1e", "t1b"}},
      {"mims",
       "mims",
       synth::ScheduleKind::k2ppe,
       {{"i0", 1.0}, {"t2", 1.58e-6}, {"x", 1.072}},
       0.03,
       0.0,
       100,
       0.95,
       {{"i0", {0.02}}, {"t2", {0.02}}, {"x", {0.03, false}}},
       {"t2", "x"}},
      {"3ppe",
       "3ppe",
       synth::ScheduleKind::k3ppe,
       {{"gamma0", 152e3}, {"gamma_sd", 930e3}, {"rate", 227e3}, {"t1e", 83e-6}, {"b", 0.23}, {"t1b", 2.4e-3},
        {"i0", 1.0}},
       0.03,
       1e-3,
       50,
       0.90,
       {{"gamma_sd", {0.10}}, {"rate", {0.10}}, {"gamma0", {10e3, false}}, {"t1e", {0.10}}, {"b", {0.10}},
        {"i0", {0.10}}},
       {"gamma_sd", "rate"}},
      {"power-sweep",
       "linear",
       synth::ScheduleKind::kPowerSweep,
       {{"slope", 2.5e9}, {"intercept", 1.5e6}},
       0.05,
       0.0,
       100,
       0.90,
       {{"intercept", {0.1e6, false}}, {"slope", {0.10}}},
       {"intercept"}},
  };
  return kExperiments;
}

int cmd_roundtrip(Invocation& inv) {
  const auto& s = inv.settings;
  const std::string name = s.get("experiment").value_or("hole-decay");
  const auto& all = experiments();
  const auto it = std::find_if(all.begin(), all.end(), [&](const Experiment& e) { return e.name == name; });
  if (it == all.end()) {
    throw InputError("unknown experiment '" + name + "' (expected hole-decay, mims, 3ppe or power-sweep)");
  }
  const Experiment& ex = *it;

  synth::RoundtripConfig config;
  config.model = ex.model;
  config.truth = ex.truth;
  for (const auto& [pname, value] : ex.truth) {
    if (auto v = s.quantity(pname, param_kind(ex.model, pname))) config.truth.set(pname, *v);
  }
  for (const auto& key : kParamKeys) {
    if (s.has(key.key) && !ex.truth.contains(key.key)) {
      throw InputError("experiment '" + name + "' has no parameter '" + key.key + "'");
    }
  }
  config.schedule = synth::reference_schedule(ex.schedule);
  config.noise.relative_sigma = s.quantity_or("noise", Kind::kNumber, ex.noise);
  config.noise.additive_floor = s.quantity_or("floor", Kind::kNumber, ex.floor);
  config.noise.seed = static_cast<std::uint64_t>(s.integer("seed").value_or(1));
  const auto seeds = s.integer("seeds").value_or(static_cast<long long>(ex.seeds));
  if (seeds < 1) throw InputError("'seeds' must be at least 1");
  config.n_seeds = static_cast<std::size_t>(seeds);
  if (auto threads = s.integer("threads")) config.threads = static_cast<unsigned>(std::max(0LL, *threads));
  const double threshold = s.quantity_or("threshold", Kind::kNumber, ex.threshold);

  auto judged = s.list("judge").empty() ? ex.judged : split_list(s.list("judge"));
  const auto tolerance = s.quantity("tolerance", Kind::kNumber);
  for (const auto& p : judged) {
    auto tol = ex.tolerances.find(p);
    if (tol == ex.tolerances.end()) throw InputError("experiment '" + name + "' cannot judge '" + p + "'");
    config.tolerances[p] = tolerance ? synth::Tolerance{*tolerance, true} : tol->second;
  }

  const auto report = synth::montecarlo_roundtrip(config);
  const bool pass = report.min_pass_fraction() >= threshold;

  auto& out = inv.out;
  out << "experiment " << name << ", model " << report.model << ", " << report.n_seeds << " seeds from "
      << config.noise.seed << ", noise " << shortest(config.noise.relative_sigma) << " + floor "
      << shortest(config.noise.additive_floor) << '\n';
  out << "non-converged fits: " << report.non_converged << '\n';
  out << std::left << std::setw(12) << "parameter" << std::setw(14) << "truth" << std::setw(14) << "median"
      << std::setw(28) << "90% interval" << std::setw(14) << "tolerance" << "pass\n";
  for (const auto& p : report.parameters) {
    const std::string tol =
        p.tolerance.relative ? significant(100.0 * p.tolerance.value, 4) + "%" : significant(p.tolerance.value, 4);
    out << std::setw(12) << p.name << std::setw(14) << significant(p.truth, 6) << std::setw(14)
        << significant(p.median, 6) << std::setw(28)
        << ("[" + significant(p.lower, 5) + ", " + significant(p.upper, 5) + "]") << std::setw(14) << tol
        << significant(p.pass_fraction, 4) << '\n';
  }
  out << std::right;
  out << "threshold " << shortest(threshold) << ": " << (pass ? "PASS" : "FAIL") << '\n';

  const fs::path csv_path = resolve_output(s, "roundtrip-" + name + ".csv");
  auto csv = open_output(csv_path);
  write_comment_header(csv, inv, std::to_string(config.noise.seed));
  csv << "# experiment = " << name << '\n';
  csv << "# n_seeds = " << report.n_seeds << '\n';
  csv << "# non_converged = " << report.non_converged << '\n';
  csv << "# threshold = " << io::format_number(threshold) << '\n';
  csv << "parameter,truth,median,lower_5,upper_95,tolerance,tolerance_kind,pass_fraction\n";
  for (const auto& p : report.parameters) {
    csv << p.name << ',' << io::format_number(p.truth) << ',' << io::format_number(p.median) << ','
        << io::format_number(p.lower) << ',' << io::format_number(p.upper) << ','
        << io::format_number(p.tolerance.value) << ',' << (p.tolerance.relative ? "relative" : "absolute") << ','
        << io::format_number(p.pass_fraction) << '\n';
  }
  out << "wrote " << csv_path.string() << '\n';
  return pass ? kExitOk : kExitThreshold;
}

// ------------------------------------------------------------------ report

std::string with_unit(double value, std::string_view base) {
  struct Scale {
    double threshold;
    double factor;
    std::string_view prefix;
  };
  // Frequencies stay in kHz up to 10 MHz so widths read like "1082 kHz".
  static constexpr std::array kFreq{Scale{1e7, 1e6, "M"}, Scale{1e3, 1e3, "k"}, Scale{0.0, 1.0, ""}};
  static constexpr std::array kTime{Scale{1.0, 1.0, ""}, Scale{1e-3, 1e-3, "m"}, Scale{1e-6, 1e-6, "u"},
                                    Scale{0.0, 1e-9, "n"}};
  const auto pick = [&](const auto& scales) {
    for (const auto& sc : scales) {
      if (std::abs(value) >= sc.threshold) {
        return significant(value / sc.factor, 4) + " " + std::string(sc.prefix) + std::string(base);
      }
    }
    return significant(value, 4) + " " + std::string(base);
  };
  return base == "Hz" ? pick(kFreq) : pick(kTime);
}

int cmd_report(Invocation& inv) {
  const auto& s = inv.settings;
  // A group is reported when any trigger key is given; then all its keys are required.
  struct Group {
    std::vector<std::string> triggers;
    std::vector<std::string> keys;
  };
  const std::vector<Group> groups{{{"t1e"}, {"t1e"}},
                                  {{"b", "t1b"}, {"b", "t1e", "t1b"}},
                                  {{"gamma0", "gamma_sd", "rate"}, {"gamma0", "gamma_sd", "rate"}},
                                  {{"slope", "stark-field"}, {"slope", "stark-field"}},
                                  {{"afc-spacing"}, {"afc-spacing"}},
                                  {{"d1e", "diffusion-time"}, {"d1e", "diffusion-time"}}};
  std::vector<bool> active;
  for (const auto& g : groups) {
    const bool on = std::any_of(g.triggers.begin(), g.triggers.end(), [&](const auto& k) { return s.has(k); });
    if (on) {
      for (const auto& k : g.keys) s.require(k);
    }
    active.push_back(on);
  }
  if (std::none_of(active.begin(), active.end(), [](bool a) { return a; })) {
    throw InputError(
        "missing required parameter: give at least one of t1e, gamma0/gamma_sd/rate, slope/stark-field, afc-spacing, "
        "d1e/diffusion-time");
  }

  std::vector<std::pair<std::string, std::string>> human;
  std::vector<std::pair<std::string, double>> machine;
  const auto add = [&](std::string name, double value, std::string shown) {
    human.emplace_back(name, std::move(shown));
    machine.emplace_back(std::move(name), value);
  };

  if (active[0]) {
    const double v = models::natural_linewidth(s.require_quantity("t1e", Kind::kTime));
    add("natural_linewidth_hz", v, with_unit(v, "Hz"));
  }
  if (active[1]) {
    const DecayModelParams p(s.require_quantity("b", Kind::kNumber), s.require_quantity("t1e", Kind::kTime),
                             s.require_quantity("t1b", Kind::kTime));
    const double beta = models::beta_from_B(p);
    add("b", p.b(), significant(p.b(), 4));
    add("beta", beta, significant(beta, 4));
  }
  if (active[2]) {
    const DiffusionParams d(s.require_quantity("gamma0", Kind::kFrequency),
                            s.require_quantity("gamma_sd", Kind::kFrequency), s.require_quantity("rate", Kind::kFrequency));
    const double sat = models::linewidth_saturation_limit(d);
    const double hole = models::shb_linewidth_prediction(d);
    add("saturation_linewidth_hz", sat, with_unit(sat, "Hz"));
    add("hole_width_prediction_hz", hole, with_unit(hole, "Hz"));
  }
  if (active[3]) {
    const double shift = models::stark_shift(s.require_quantity("stark-field", Kind::kField),
                                             StarkParams(s.require_quantity("slope", Kind::kStarkSlope)));
    add("stark_shift_hz", shift, with_unit(shift, "Hz"));
  }
  if (active[4]) {
    const double t = models::afc_storage_time(s.require_quantity("afc-spacing", Kind::kFrequency));
    add("afc_storage_time_s", t, with_unit(t, "s"));
  }
  if (active[5]) {
    const double dc = models::diffusion_coefficient(s.require_quantity("d1e", Kind::kLength),
                                                    s.require_quantity("diffusion-time", Kind::kHours));
    add("diffusion_coefficient_um2_per_h", dc, significant(dc, 4) + " um^2/h");
  }

  auto& out = inv.out;
  out << std::left;
  for (const auto& [name, shown] : human) out << std::setw(34) << name << shown << '\n';
  out << std::right << "\n[report]\n";
  for (const auto& [name, value] : machine) out << name << " = " << io::format_number(value) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- dispatch

struct CommandSpec {
  std::string name;
  std::string description;
  std::vector<KeySpec> keys;
  int (*handler)(Invocation&);
};

std::vector<CommandSpec> command_specs() {
  std::vector<KeySpec> simulate{{"model", "forward model id"},
                                {"schedule", "measurement schedule (defaults to the model's)"},
                                {"seed", "noise seed"},
                                {"noise", "relative Gaussian noise"},
                                {"floor", "additive noise floor"},
                                {"step", "3PPE waiting-time step"},
                                {"delay", "3PPE delay setting(s)", true},
                                {"field", "single Stark field; prints the shift instead of writing a trace"},
                                {"output", "output trace path"},
                                {"output-dir", "directory for outputs"}};
  simulate.insert(simulate.end(), kParamKeys.begin(), kParamKeys.end());

  std::vector<KeySpec> roundtrip{{"experiment", "hole-decay, mims, 3ppe or power-sweep"},
                                 {"seeds", "number of seeds"},
                                 {"seed", "base seed"},
                                 {"noise", "relative Gaussian noise"},
                                 {"floor", "additive noise floor"},
                                 {"threshold", "required pass fraction"},
                                 {"tolerance", "relative tolerance applied to every judged parameter"},
                                 {"judge", "parameters to judge", true},
                                 {"threads", "worker threads (0 = all cores)"},
                                 {"output", "recovery CSV path"},
                                 {"output-dir", "directory for outputs"}};
  roundtrip.insert(roundtrip.end(), kParamKeys.begin(), kParamKeys.end());

  return {
      {"simulate", "synthesize a trace from a forward model", simulate, cmd_simulate},
      {"fit",
       "fit trace files",
       {{"model", "model id"},
        {"input", "trace CSV", true},
        {"fix", "hold a parameter, name=value", true},
        {"guess", "starting value, name=value", true},
        {"free-amplitude", "fit the hole-decay amplitude (true/false)"},
        {"max-iterations", "iteration cap"},
        {"output", "output stem"},
        {"output-dir", "directory for outputs"}},
       cmd_fit},
      {"roundtrip", "Monte-Carlo synthesize-and-refit recovery study", roundtrip, cmd_roundtrip},
      {"report",
       "derived quantities from parameters",
       {{"b", "bottleneck amplitude B"},
        {"t1e", "excited-state lifetime"},
        {"t1b", "bottleneck lifetime"},
        {"gamma0", "homogeneous linewidth"},
        {"gamma_sd", "spectral diffusion linewidth"},
        {"rate", "spectral diffusion rate"},
        {"slope", "Stark coefficient"},
        {"stark-field", "field for the Stark shift"},
        {"afc-spacing", "AFC tooth spacing"},
        {"d1e", "1/e penetration depth"},
        {"diffusion-time", "in-diffusion time"}},
       cmd_report},
  };
}

Settings merge(const CommandSpec& spec, const std::optional<std::string>& config_path,
               const std::map<std::string, std::vector<std::string>>& flags) {
  Settings settings;
  const auto known = [&](const std::string& key) -> const KeySpec* {
    for (const auto& k : spec.keys) {
      if (k.key == key) return &k;
    }
    return nullptr;
  };
  if (config_path) {
    for (const auto& entry : io::parse_config_file(*config_path)) {
      const auto* k = known(entry.key);
      if (!k) {
        throw InputError(*config_path + ":" + std::to_string(entry.line) + ": unknown key '" + entry.key +
                         "' for command '" + spec.name + "'");
      }
      if (k->repeated) {
        settings.add(entry.key, entry.value);
      } else {
        settings.set(entry.key, entry.value);
      }
    }
  }
  for (const auto& [key, values] : flags) {
    if (values.empty()) continue;
    const auto* k = known(key);
    if (k && k->repeated) {
      settings.set(key, values.front());
      for (std::size_t i = 1; i < values.size(); ++i) settings.add(key, values[i]);
    } else {
      settings.set(key, values.back());
    }
  }
  return settings;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral hole burning and photon echo analysis", "echo-lab"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  const auto specs = command_specs();
  std::map<std::string, std::map<std::string, std::vector<std::string>>> flag_values;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, std::vector<std::string>> positional;
  std::vector<CLI::App*> subs;
  for (const auto& spec : specs) {
    auto* sub = app.add_subcommand(spec.name, spec.description);
    auto& values = flag_values[spec.name];
    for (const auto& key : spec.keys) {
      auto* opt = sub->add_option("--" + key.key, values[key.key], key.help)->allow_extra_args(false);
      if (!key.repeated) opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
    sub->add_option("--config", config_paths[spec.name], "file of key = value lines; flags take precedence");
    if (spec.name == "fit") sub->add_option("inputs", positional[spec.name], "trace CSV files");
    subs.push_back(sub);
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  std::string command_line = "echo-lab";
  for (const auto& a : args) command_line += " " + a;

  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    const auto& spec = specs[i];
    try {
      auto flags = flag_values[spec.name];
      auto& extra = positional[spec.name];
      if (!extra.empty()) {
        auto& inputs = flags["input"];
        inputs.insert(inputs.end(), extra.begin(), extra.end());
      }
      const auto& cfg = config_paths[spec.name];
      Invocation inv{command_line, merge(spec, cfg.empty() ? std::nullopt : std::optional(cfg), flags), out, err};
      return spec.handler(inv);
    } catch (const InputError& e) {
      err << "echo-lab " << spec.name << ": " << e.what() << '\n';
      return kExitInput;
    } catch (const Error& e) {
      err << "echo-lab " << spec.name << ": " << e.what() << '\n';
      return kExitInput;
    } catch (const fs::filesystem_error& e) {
      err << "echo-lab " << spec.name << ": " << e.what() << '\n';
      return kExitInput;
    } catch (const std::exception& e) {
      err << "echo-lab " << spec.name << ": internal error: " << e.what() << '\n';
      return kExitFailure;
    }
  }
  return kExitInput;
}

}  // namespace echolab::cli
