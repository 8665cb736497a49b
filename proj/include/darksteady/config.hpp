#pragma once

// Experiment configuration: a flat `key = value` text format with `#`
// comments and [params], [pulse] and [grid] sections. Keys before the first
// section are run-level settings. Unknown keys are rejected.
//
//   experiment = fig3
//   cycles = 200
//   [params]
//   e = 30            # sets e_plus and e_minus
//   [pulse]
//   tau_us = 0.005
//   [grid]
//   omega = 0.5, 1, 2  # sets omega_e and omega_n per grid point
//
// to_config_text() writes the fully resolved configuration in the same
// format, so parse_config(to_config_text(c)) == c.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "darksteady/errors.hpp"
#include "darksteady/lindblad.hpp"
#include "darksteady/model.hpp"
#include "darksteady/pulse.hpp"

namespace darksteady {

enum class Experiment { Fig2, Fig2Inset, Fig3, T2Inset, TwoNuclei, Steady, Evolve, Sweep };

enum class InitialState { FullyMixed, ZeroZero };

struct GridAxis {
  std::string name;
  std::vector<double> values;
  friend bool operator==(const GridAxis&, const GridAxis&) = default;
};

struct PulseConfig {
  double pump_us = 0.1;
  double electron_pulse_us = 0.01;
  std::optional<double> free_us;  // default 1/(4 g)
  double nuclear_pulse_us = 10.0;
  double tau_us = 0.0;
  RotationAxis axis = RotationAxis::Y;
  bool dd_filters_t2 = true;
  DdErrorSign dd_error_sign = DdErrorSign::Excess;
  std::vector<double> t2_values{1.0, 5.0, 10.0, 50.0, 100.0};

  PulseTiming timing() const {
    return PulseTiming{pump_us, electron_pulse_us, free_us, nuclear_pulse_us, tau_us, axis};
  }
  friend bool operator==(const PulseConfig&, const PulseConfig&) = default;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Fig2;
  SystemParams params;
  std::vector<GridAxis> grid;
  PulseConfig pulse;
  std::string output = "out";
  std::uint64_t seed = 0;
  Integrator integrator = Integrator::Rk4;
  double dt = 0.0;  // us; 0 = largest step admitted by the step guard
  double t_end = 10.0;
  double sample_interval = 0.05;
  std::size_t cycles = 200;
  InitialState initial = InitialState::FullyMixed;
};

inline bool operator==(const SystemParams& a, const SystemParams& b) {
  return a.omega_e == b.omega_e && a.omega_n == b.omega_n && a.g == b.g && a.e_plus == b.e_plus &&
         a.e_minus == b.e_minus && a.gamma_plus == b.gamma_plus && a.gamma_minus == b.gamma_minus &&
         a.gamma_zero == b.gamma_zero && a.t2_star == b.t2_star && a.variant == b.variant &&
         a.asymmetry == b.asymmetry && a.asymmetry_hyperfine == b.asymmetry_hyperfine &&
         a.optical_sign == b.optical_sign && a.electron_drive_axis == b.electron_drive_axis &&
         a.noise_model == b.noise_model && a.noise_samples == b.noise_samples;
}

inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.experiment == b.experiment && a.params == b.params && a.grid == b.grid &&
         a.pulse == b.pulse && a.output == b.output && a.seed == b.seed &&
         a.integrator == b.integrator && a.dt == b.dt && a.t_end == b.t_end &&
         a.sample_interval == b.sample_interval && a.cycles == b.cycles && a.initial == b.initial;
}

// ---------------------------------------------------------------------------
// Enum names

namespace names {

template <typename E>
struct Entry {
  E value;
  const char* name;
};

inline constexpr Entry<Experiment> kExperiments[] = {
    {Experiment::Fig2, "fig2"},           {Experiment::Fig2Inset, "fig2-inset"},
    {Experiment::Fig3, "fig3"},           {Experiment::T2Inset, "t2-inset"},
    {Experiment::TwoNuclei, "two-nuclei"}, {Experiment::Steady, "steady"},
    {Experiment::Evolve, "evolve"},       {Experiment::Sweep, "sweep"}};
inline constexpr Entry<Variant> kVariants[] = {{Variant::SingleNucleusSpin1, "single"},
                                               {Variant::TwoNucleiSpinHalf, "two"}};
inline constexpr Entry<Integrator> kIntegrators[] = {{Integrator::Rk4, "rk4"},
                                                     {Integrator::Propagator, "propagator"}};
inline constexpr Entry<InitialState> kInitials[] = {{InitialState::FullyMixed, "mixed"},
                                                    {InitialState::ZeroZero, "zero"}};
inline constexpr Entry<OpticalSign> kOpticalSigns[] = {{OpticalSign::Antisymmetric, "antisymmetric"},
                                                       {OpticalSign::Symmetric, "symmetric"}};
inline constexpr Entry<DriveAxis> kDriveAxes[] = {
    {DriveAxis::Auto, "auto"}, {DriveAxis::X, "x"}, {DriveAxis::Y, "y"}};
inline constexpr Entry<RotationAxis> kRotationAxes[] = {{RotationAxis::X, "x"},
                                                        {RotationAxis::Y, "y"}};
inline constexpr Entry<NoiseModel> kNoiseModels[] = {{NoiseModel::Markovian, "markovian"},
                                                     {NoiseModel::QuasiStatic, "quasistatic"}};
inline constexpr Entry<DdErrorSign> kDdSigns[] = {{DdErrorSign::Excess, "excess"},
                                                  {DdErrorSign::Deficit, "deficit"}};

template <typename E, std::size_t N>
const char* to_name(const Entry<E> (&table)[N], E value) {
  for (const auto& e : table) {
    if (e.value == value) return e.name;
  }
  return "?";
}

template <typename E, std::size_t N>
std::optional<E> from_name(const Entry<E> (&table)[N], std::string_view name) {
  for (const auto& e : table) {
    if (name == e.name) return e.value;
  }
  return std::nullopt;
}

}  // namespace names

inline const char* experiment_name(Experiment e) { return names::to_name(names::kExperiments, e); }

inline Experiment parse_experiment(std::string_view name) {
  if (auto e = names::from_name(names::kExperiments, name)) return *e;
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Defaults

/// Reference parameter set (fig2) with per-experiment adjustments.
inline ExperimentConfig default_config(Experiment experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  switch (experiment) {
    case Experiment::Fig3:
      c.params.e_plus = c.params.e_minus = 30.0;
      c.pulse.tau_us = 0.005;
      break;
    case Experiment::T2Inset:
      c.params.e_plus = c.params.e_minus = 30.0;
      c.params.g = 2.0;
      break;
    case Experiment::TwoNuclei:
      c.params.variant = Variant::TwoNucleiSpinHalf;
      break;
    case Experiment::Fig2Inset:
      c.grid = {{"e", {5.0, 10.0, 20.0}}, {"omega", {0.5, 1.0, 2.0}}};
      break;
    default:
      break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Parsing

namespace config_detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Context {
  std::size_t line = 0;
  std::string key;
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("line " + std::to_string(line) + ", key '" + key + "': " + msg);
  }
};

inline double to_double(const std::string& v, const Context& ctx) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) ctx.fail("expected a number, got '" + v + "'");
    if (!std::isfinite(out)) ctx.fail("value must be finite");
    return out;
  } catch (const std::logic_error&) {
    ctx.fail("expected a number, got '" + v + "'");
  }
}

inline std::uint64_t to_unsigned(const std::string& v, const Context& ctx) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    ctx.fail("expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::logic_error&) {
    ctx.fail("integer out of range: '" + v + "'");
  }
}

inline bool to_bool(const std::string& v, const Context& ctx) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  ctx.fail("expected true or false, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& v, const Context& ctx) {
  std::vector<double> out;
  if (v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) ctx.fail("empty list element");
    out.push_back(to_double(t, ctx));
  }
  return out;
}

template <typename E, std::size_t N>
E to_enum(const names::Entry<E> (&table)[N], const std::string& v, const Context& ctx) {
  if (auto e = names::from_name(table, v)) return *e;
  std::string allowed;
  for (const auto& entry : table) allowed += std::string(allowed.empty() ? "" : "|") + entry.name;
  ctx.fail("expected one of " + allowed + ", got '" + v + "'");
}

inline std::string join(const std::vector<double>& xs) {
  if (xs.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + format_double(xs[i]);
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const Context&)>;

inline const std::map<std::string, Setter>& param_setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    auto num = [&m](const char* key, double SystemParams::*field) {
      m[key] = [field](ExperimentConfig& c, const std::string& v, const Context& ctx) {
        c.params.*field = to_double(v, ctx);
      };
    };
    num("omega_e", &SystemParams::omega_e);
    num("omega_n", &SystemParams::omega_n);
    num("g", &SystemParams::g);
    num("e_plus", &SystemParams::e_plus);
    num("e_minus", &SystemParams::e_minus);
    num("gamma_plus", &SystemParams::gamma_plus);
    num("gamma_minus", &SystemParams::gamma_minus);
    num("gamma_zero", &SystemParams::gamma_zero);
    m["omega"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.params.omega_e = c.params.omega_n = to_double(v, ctx);
    };
    m["e"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.params.e_plus = c.params.e_minus = to_double(v, ctx);
    };
    m["t2_star"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      if (v == "none") c.params.t2_star.reset();
      else c.params.t2_star = to_double(v, ctx);
    };
    m["variant"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.params.variant = to_enum(names::kVariants, v, ctx);
    };
    m["asymmetry"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.params.asymmetry = to_list(v, ctx);
    };
    m["asymmetry_hyperfine"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.params.asymmetry_hyperfine = to_bool(v, ctx);
    };
    m["optical_sign"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.params.optical_sign = to_enum(names::kOpticalSigns, v, ctx);
    };
    m["electron_drive_axis"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.params.electron_drive_axis = to_enum(names::kDriveAxes, v, ctx);
    };
    m["noise_model"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.params.noise_model = to_enum(names::kNoiseModels, v, ctx);
    };
    m["noise_samples"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      const auto n = to_unsigned(v, ctx);
      if (n < 1 || n > 1000000) ctx.fail("noise_samples must be in [1, 1e6]");
      c.params.noise_samples = static_cast<int>(n);
    };
    return m;
  }();
  return table;
}

inline const std::map<std::string, Setter>& pulse_setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    auto num = [&m](const char* key, double PulseConfig::*field) {
      m[key] = [field](ExperimentConfig& c, const std::string& v, const Context& ctx) {
        const double x = to_double(v, ctx);
        if (x < 0.0) ctx.fail("must be >= 0");
        c.pulse.*field = x;
      };
    };
    num("pump_us", &PulseConfig::pump_us);
    num("electron_pulse_us", &PulseConfig::electron_pulse_us);
    num("nuclear_pulse_us", &PulseConfig::nuclear_pulse_us);
    num("tau_us", &PulseConfig::tau_us);
    m["free_us"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      if (v == "auto") {
        c.pulse.free_us.reset();
        return;
      }
      const double x = to_double(v, ctx);
      if (x < 0.0) ctx.fail("must be >= 0");
      c.pulse.free_us = x;
    };
    m["axis"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.pulse.axis = to_enum(names::kRotationAxes, v, ctx);
    };
    m["dd_filters_t2"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.pulse.dd_filters_t2 = to_bool(v, ctx);
    };
    m["dd_error_sign"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.pulse.dd_error_sign = to_enum(names::kDdSigns, v, ctx);
    };
    m["t2_values"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      auto xs = to_list(v, ctx);
      for (double x : xs) {
        if (!(x > 0.0)) ctx.fail("T2* values must be > 0");
      }
      c.pulse.t2_values = std::move(xs);
    };
    return m;
  }();
  return table;
}

inline const std::map<std::string, Setter>& run_setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    m["experiment"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.experiment = to_enum(names::kExperiments, v, ctx);
    };
    m["output"] = [](ExperimentConfig& c, const std::string& v, const Context&) { c.output = v; };
    m["seed"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.seed = to_unsigned(v, ctx);
    };
    m["integrator"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.integrator = to_enum(names::kIntegrators, v, ctx);
    };
    m["initial"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      c.initial = to_enum(names::kInitials, v, ctx);
    };
    m["dt"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      if (v == "auto") {
        c.dt = 0.0;
        return;
      }
      const double x = to_double(v, ctx);
      if (!(x > 0.0)) ctx.fail("dt must be > 0");
      c.dt = x;
    };
    m["t_end"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      const double x = to_double(v, ctx);
      if (!(x > 0.0)) ctx.fail("t_end must be > 0");
      c.t_end = x;
    };
    m["sample_interval"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      const double x = to_double(v, ctx);
      if (!(x > 0.0)) ctx.fail("sample_interval must be > 0");
      c.sample_interval = x;
    };
    m["cycles"] = [](ExperimentConfig& c, const std::string& v, const Context& ctx) {
      const auto n = to_unsigned(v, ctx);
      if (n > 10000000) ctx.fail("cycles too large");
      c.cycles = static_cast<std::size_t>(n);
    };
    return m;
  }();
  return table;
}

struct Line {
  std::size_t number;
  std::string section;
  std::string key;
  std::string value;
};

inline std::vector<Line> tokenize(std::string_view text) {
  std::vector<Line> out;
  std::string section;
  std::size_t number = 0;
  std::stringstream ss{std::string(text)};
  std::string raw;
  while (std::getline(ss, raw)) {
    ++number;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    Context ctx{number, ""};
    if (line.front() == '[') {
      if (line.back() != ']') ctx.fail("malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (section != "params" && section != "pulse" && section != "grid") {
        ctx.fail("unknown section [" + section + "]");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) ctx.fail("expected 'key = value'");
    Line l{number, section, trim(std::string_view(line).substr(0, eq)),
           trim(std::string_view(line).substr(eq + 1))};
    if (l.key.empty()) ctx.fail("empty key");
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace config_detail

/// Grid axis names accepted in [grid]: any numeric [params] key.
inline bool is_grid_axis(const std::string& name) {
  static const char* kAxes[] = {"omega_e", "omega_n", "omega", "g", "e_plus", "e_minus", "e",
                                "gamma_plus", "gamma_minus", "gamma_zero", "t2_star"};
  for (const char* a : kAxes) {
    if (name == a) return true;
  }
  return false;
}

/// Sets the parameter named by a grid axis to `value`.
inline void apply_grid_value(ExperimentConfig& c, const std::string& axis, double value) {
  config_detail::Context ctx{0, axis};
  config_detail::param_setters().at(axis)(c, config_detail::format_double(value), ctx);
}

/// Parses config text. The experiment is taken from `experiment` when given
/// (command line), otherwise from the `experiment` key, otherwise fig2; its
/// defaults are filled in before the file's keys are applied.
inline ExperimentConfig parse_config(std::string_view text,
                                     std::optional<Experiment> experiment = std::nullopt) {
  using namespace config_detail;
  const std::vector<Line> lines = tokenize(text);

  std::optional<Experiment> from_file;
  for (const auto& l : lines) {
    if (l.section.empty() && l.key == "experiment") {
      from_file = to_enum(names::kExperiments, l.value, Context{l.number, l.key});
      if (experiment && *experiment != *from_file) {
        Context{l.number, l.key}.fail(std::string("conflicts with requested experiment '") +
                                      experiment_name(*experiment) + "'");
      }
    }
  }
  ExperimentConfig cfg = default_config(experiment.value_or(from_file.value_or(Experiment::Fig2)));

  bool grid_seen = false;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  for (const auto& l : lines) {
    Context ctx{l.number, l.key};
    if (auto [it, fresh] = seen.emplace(std::pair{l.section, l.key}, l.number); !fresh) {
      ctx.fail("duplicate key (first set on line " + std::to_string(it->second) + ")");
    }
    if (l.section.empty()) {
      const auto& table = run_setters();
      const auto it = table.find(l.key);
      if (it == table.end()) ctx.fail("unknown key");
      if (l.key == "experiment") continue;  // resolved above
      it->second(cfg, l.value, ctx);
    } else if (l.section == "params") {
      const auto& table = param_setters();
      const auto it = table.find(l.key);
      if (it == table.end()) ctx.fail("unknown key");
      it->second(cfg, l.value, ctx);
    } else if (l.section == "pulse") {
      const auto& table = pulse_setters();
      const auto it = table.find(l.key);
      if (it == table.end()) ctx.fail("unknown key");
      it->second(cfg, l.value, ctx);
    } else {
      if (!is_grid_axis(l.key)) ctx.fail("unknown grid axis");
      if (!grid_seen) {
        cfg.grid.clear();
        grid_seen = true;
      }
      GridAxis axis{l.key, to_list(l.value, ctx)};
      if (axis.values.empty()) ctx.fail("grid axis has no values");
      cfg.grid.push_back(std::move(axis));
    }
  }

  try {
    cfg.params.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("[params]: ") + e.what());
  }
  std::size_t points = 1;
  for (const auto& a : cfg.grid) points *= a.values.size();
  if (!cfg.grid.empty() && points > 10000) throw ConfigError("[grid]: more than 10^4 points");
  return cfg;
}

/// Fully resolved configuration in parse_config's format.
inline std::string to_config_text(const ExperimentConfig& c) {
  using config_detail::format_double;
  using config_detail::join;
  std::ostringstream os;
  const SystemParams& p = c.params;
  os << "experiment = " << experiment_name(c.experiment) << "\n"
     << "output = " << c.output << "\n"
     << "seed = " << c.seed << "\n"
     << "integrator = " << names::to_name(names::kIntegrators, c.integrator) << "\n"
     << "initial = " << names::to_name(names::kInitials, c.initial) << "\n"
     << "dt = " << (c.dt > 0.0 ? format_double(c.dt) : std::string("auto")) << "\n"
     << "t_end = " << format_double(c.t_end) << "\n"
     << "sample_interval = " << format_double(c.sample_interval) << "\n"
     << "cycles = " << c.cycles << "\n"
     << "[params]\n"
     << "omega_e = " << format_double(p.omega_e) << "\n"
     << "omega_n = " << format_double(p.omega_n) << "\n"
     << "g = " << format_double(p.g) << "\n"
     << "e_plus = " << format_double(p.e_plus) << "\n"
     << "e_minus = " << format_double(p.e_minus) << "\n"
     << "gamma_plus = " << format_double(p.gamma_plus) << "\n"
     << "gamma_minus = " << format_double(p.gamma_minus) << "\n"
     << "gamma_zero = " << format_double(p.gamma_zero) << "\n"
     << "t2_star = " << (p.t2_star ? format_double(*p.t2_star) : std::string("none")) << "\n"
     << "variant = " << names::to_name(names::kVariants, p.variant) << "\n"
     << "asymmetry = " << join(p.asymmetry) << "\n"
     << "asymmetry_hyperfine = " << (p.asymmetry_hyperfine ? "true" : "false") << "\n"
     << "optical_sign = " << names::to_name(names::kOpticalSigns, p.optical_sign) << "\n"
     << "electron_drive_axis = " << names::to_name(names::kDriveAxes, p.electron_drive_axis) << "\n"
     << "noise_model = " << names::to_name(names::kNoiseModels, p.noise_model) << "\n"
     << "noise_samples = " << p.noise_samples << "\n"
     << "[pulse]\n"
     << "pump_us = " << format_double(c.pulse.pump_us) << "\n"
     << "electron_pulse_us = " << format_double(c.pulse.electron_pulse_us) << "\n"
     << "free_us = " << (c.pulse.free_us ? format_double(*c.pulse.free_us) : std::string("auto")) << "\n"
     << "nuclear_pulse_us = " << format_double(c.pulse.nuclear_pulse_us) << "\n"
     << "tau_us = " << format_double(c.pulse.tau_us) << "\n"
     << "axis = " << names::to_name(names::kRotationAxes, c.pulse.axis) << "\n"
     << "dd_filters_t2 = " << (c.pulse.dd_filters_t2 ? "true" : "false") << "\n"
     << "dd_error_sign = " << names::to_name(names::kDdSigns, c.pulse.dd_error_sign) << "\n"
     << "t2_values = " << join(c.pulse.t2_values) << "\n";
  if (!c.grid.empty()) {
    os << "[grid]\n";
    for (const auto& a : c.grid) os << a.name << " = " << join(a.values) << "\n";
  }
  return os.str();
}

}  // namespace darksteady
