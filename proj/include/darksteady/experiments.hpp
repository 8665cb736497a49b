#pragma once

// Experiment runners behind the command-line tool. Each run writes
//   data.csv     RFC-4180 CSV, '#'-prefixed header holding the resolved config
//   summary.txt  key: value lines
//   plot.gp      gnuplot script that reads data.csv only
// into the output directory. On failure the files written so far are removed.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "darksteady/config.hpp"
#include "darksteady/errors.hpp"
#include "darksteady/lindblad.hpp"
#include "darksteady/model.hpp"
#include "darksteady/pulse.hpp"

#ifndef DARKSTEADY_VERSION
#define DARKSTEADY_VERSION "0.0.0"
#endif

namespace darksteady {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitNumerical = 3,
  kExitNonUnique = 4,
};

/// Twelve significant digits, '.' decimal separator, "nan" for NaN.
inline std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// Lines of the CSV metadata header (without the leading "# ").
inline std::string csv_header(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "# # darksteady " << DARKSTEADY_VERSION << "\n"
     << "# # units: time us, frequencies MHz (2*pi applied internally), T2* us\n"
     << "# # basis: electron (+1,-1,0,A1) slowest, nuclear (+1,-1,0) or (0,1) per spin-1/2\n"
     << "# # optical: E_- enters with sign per optical_sign; vectorization column-stacked\n";
  std::istringstream lines(to_config_text(cfg));
  for (std::string l; std::getline(lines, l);) os << "# " << l << "\n";
  return os.str();
}

/// Recovers the configuration embedded in a data.csv header.
inline ExperimentConfig config_from_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string text;
  for (std::string l; std::getline(in, l);) {
    if (l.rfind("# ", 0) != 0) break;
    text += l.substr(2) + "\n";
  }
  return parse_config(text);
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<double> values) {
    std::vector<std::string> row;
    for (double v : values) row.push_back(csv_number(v));
    rows.push_back(std::move(row));
  }
};

inline std::string render_csv(const ExperimentConfig& cfg, const Table& t) {
  std::ostringstream os;
  os << csv_header(cfg);
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\r\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\r\n";
  }
  return os.str();
}

struct ExperimentOutput {
  Table table;
  std::vector<std::pair<std::string, std::string>> summary;
  std::string plot;  // gnuplot body after the common preamble

  void note(const std::string& key, double value) { summary.emplace_back(key, csv_number(value)); }
  void note(const std::string& key, const std::string& value) { summary.emplace_back(key, value); }
};

namespace experiments {

inline ComplexMatrix initial_state(const ExperimentConfig& cfg) {
  if (cfg.initial == InitialState::FullyMixed) return fully_mixed_ground(cfg.params.variant);
  const Eigen::Index d = static_cast<Eigen::Index>(cfg.params.dimension());
  const std::size_t idx = cfg.params.variant == Variant::SingleNucleusSpin1
                              ? basis_index(ElectronLevel::Zero, NuclearLevel::Zero)
                              : basis_index(ElectronLevel::Zero, 0, 0);
  ComplexMatrix rho = ComplexMatrix::Zero(d, d);
  rho(static_cast<Eigen::Index>(idx), static_cast<Eigen::Index>(idx)) = 1.0;
  return rho;
}

inline Liouvillian model_liouvillian(const SystemParams& p) {
  return build_liouvillian(build_hamiltonian(p), build_collapse_ops(p), layout_for(p.variant));
}

inline void require_markovian(const ExperimentConfig& cfg) {
  if (cfg.params.t2_star && cfg.params.noise_model == NoiseModel::QuasiStatic) {
    throw ConfigError(std::string("quasistatic noise is not supported by ") +
                      experiment_name(cfg.experiment) + "; use evolve or a pulsed experiment");
  }
}

inline std::vector<std::string> time_series_columns(const SystemParams& p) {
  std::vector<std::string> cols{"time_us", "fidelity", "purity", "trace_deviation"};
  if (p.variant == Variant::TwoNucleiSpinHalf) cols.push_back("singlet_population");
  for (const auto& l : basis_labels(p.variant)) cols.push_back("pop[" + l + "]");
  return cols;
}

inline void add_time_series(Table& t, const SystemParams& p, const Trajectory& traj) {
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Observables& o = traj.records[i];
    std::vector<double> row{traj.times[i], o.fidelity, o.purity, o.trace_deviation};
    if (p.variant == Variant::TwoNucleiSpinHalf) {
      row.push_back(nuclear_singlet_population(traj.states.at(i)));
    }
    row.insert(row.end(), o.populations.begin(), o.populations.end());
    t.add(std::move(row));
  }
}

inline std::string time_plot() {
  return "set xlabel 'time (us)'\nset ylabel 'value'\nset yrange [0:1.05]\n"
         "plot 'data.csv' using 1:2 with lines title 'fidelity', \\\n"
         "     'data.csv' using 1:3 with lines dashtype 2 title 'purity'\n";
}

inline ConvergenceOptions convergence_options(const ExperimentConfig& cfg) {
  ConvergenceOptions opt;
  opt.integrator = cfg.integrator;
  opt.dt = cfg.dt;
  opt.sample_interval = cfg.sample_interval;
  return opt;
}

/// fig2: evolve from the initial state until |L vec rho| < 1e-8, pad by
/// 20 %, and compare with the dense steady-state solve.
inline ExperimentOutput fig2(const ExperimentConfig& cfg) {
  require_markovian(cfg);
  const SystemParams& p = cfg.params;
  const Liouvillian l = model_liouvillian(p);
  const ComplexVector target = target_states(p.variant).target;
  ConvergenceOptions opt = convergence_options(cfg);
  opt.keep_states = p.variant == Variant::TwoNucleiSpinHalf;
  const ConvergedRun run = evolve_until_converged(initial_state(cfg), l, target, opt);

  ExperimentOutput out;
  out.table.columns = time_series_columns(p);
  add_time_series(out.table, p, run.trajectory);
  const SteadyState ss = steady_state(l);
  out.note("convergence_time_us", run.convergence_time);
  out.note("final_fidelity", run.trajectory.back().fidelity);
  out.note("final_purity", run.trajectory.back().purity);
  out.note("steady_fidelity", fidelity(ss.rho, target));
  out.note("steady_purity", purity(ss.rho));
  out.note("null_count", static_cast<double>(ss.null_count));
  out.note("spectral_gap_per_us", ss.spectral_gap);
  out.note("endpoint_vs_steady_maxnorm", linalg::max_abs(run.final_state - ss.rho));
  out.plot = time_plot();
  return out;
}

/// Fixed-duration evolution with the configured integrator.
inline ExperimentOutput evolve(const ExperimentConfig& cfg) {
  const SystemParams& p = cfg.params;
  const ComplexVector target = target_states(p.variant).target;
  const ComplexMatrix rho0 = initial_state(cfg);
  const bool keep = p.variant == Variant::TwoNucleiSpinHalf || p.noise_model == NoiseModel::QuasiStatic;

  auto run_one = [&](const Liouvillian& l) {
    if (cfg.integrator == Integrator::Rk4) {
      const double dt = cfg.dt > 0.0 ? cfg.dt : max_stable_dt(l);
      const auto every = static_cast<std::size_t>(std::max(1.0, std::round(cfg.sample_interval / dt)));
      return evolve_fixed_step(rho0, l, cfg.t_end, dt, every, target, keep);
    }
    Trajectory traj;
    const auto n = static_cast<std::size_t>(std::max(1.0, std::round(cfg.t_end / cfg.sample_interval)));
    const double h = cfg.t_end / static_cast<double>(n);
    const ComplexMatrix map = linalg::expm(l.matrix, h);
    ComplexVector v = linalg::vectorize(rho0);
    detail::record(traj, 0.0, rho0, target, keep);
    for (std::size_t k = 1; k <= n; ++k) {
      v = map * v;
      detail::record(traj, static_cast<double>(k) * h, linalg::unvectorize(v, l.dim), target, keep);
    }
    return traj;
  };

  Trajectory traj;
  if (p.t2_star && p.noise_model == NoiseModel::QuasiStatic) {
    const auto deltas = sample_detunings(*p.t2_star, p.noise_samples, cfg.seed);
    const ComplexMatrix h0 = build_hamiltonian(p);
    const ComplexMatrix sz = build_operators(p.variant).sz;
    const auto cs = build_decay_ops(p);
    std::vector<ComplexMatrix> sum;
    for (double delta : deltas) {
      const Trajectory one = run_one(build_liouvillian(h0 + delta * sz, cs));
      if (sum.empty()) {
        sum = one.states;
        traj.times = one.times;
      } else {
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += one.states[i];
      }
    }
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const ComplexMatrix rho = sum[i] / static_cast<double>(deltas.size());
      traj.records.push_back(observe(rho, target));
      traj.states.push_back(rho);
    }
  } else {
    traj = run_one(model_liouvillian(p));
  }

  ExperimentOutput out;
  out.table.columns = time_series_columns(p);
  add_time_series(out.table, p, traj);
  out.note("final_fidelity", traj.back().fidelity);
  out.note("final_purity", traj.back().purity);
  double worst_trace = 0.0;
  for (const auto& r : traj.records) worst_trace = std::max(worst_trace, r.trace_deviation);
  out.note("max_trace_deviation", worst_trace);
  out.plot = time_plot();
  return out;
}

inline ExperimentOutput steady(const ExperimentConfig& cfg) {
  require_markovian(cfg);
  const SystemParams& p = cfg.params;
  const SteadyState ss = steady_state(model_liouvillian(p));
  const ComplexVector target = target_states(p.variant).target;
  const Observables o = observe(ss.rho, target);

  ExperimentOutput out;
  out.table.columns = {"fidelity", "purity", "null_count", "spectral_gap_per_us", "clipped_weight"};
  for (const auto& l : basis_labels(p.variant)) out.table.columns.push_back("pop[" + l + "]");
  std::vector<double> row{o.fidelity, o.purity, static_cast<double>(ss.null_count), ss.spectral_gap,
                          ss.clipped_weight};
  row.insert(row.end(), o.populations.begin(), o.populations.end());
  out.table.add(std::move(row));
  out.note("steady_fidelity", o.fidelity);
  out.note("steady_purity", o.purity);
  out.note("null_count", static_cast<double>(ss.null_count));
  out.note("spectral_gap_per_us", ss.spectral_gap);
  out.plot = "set style data histograms\nset style fill solid\nset xtics rotate\n"
             "plot 'data.csv' using 6:xtic(1) title 'populations'\n";
  return out;
}

/// Steady state per grid point, first axis slowest. Non-unique points are
/// flagged instead of failing the run.
inline ExperimentOutput sweep(const ExperimentConfig& cfg) {
  require_markovian(cfg);
  if (cfg.grid.empty()) throw ConfigError("[grid]: sweep needs at least one axis");
  ExperimentOutput out;
  for (const auto& a : cfg.grid) out.table.columns.push_back(a.name);
  for (const char* c : {"fidelity", "purity", "spectral_gap_per_us", "null_count", "non_unique"}) {
    out.table.columns.push_back(c);
  }

  std::size_t total = 1;
  for (const auto& a : cfg.grid) total *= a.values.size();
  double min_fidelity = std::numeric_limits<double>::infinity();
  std::size_t flagged = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    ExperimentConfig point = cfg;
    std::vector<double> row;
    std::size_t rest = flat;
    std::vector<std::size_t> idx(cfg.grid.size());
    for (std::size_t k = cfg.grid.size(); k-- > 0;) {
      idx[k] = rest % cfg.grid[k].values.size();
      rest /= cfg.grid[k].values.size();
    }
    for (std::size_t k = 0; k < cfg.grid.size(); ++k) {
      const double v = cfg.grid[k].values[idx[k]];
      apply_grid_value(point, cfg.grid[k].name, v);
      row.push_back(v);
    }
    point.params.validate();
    const ComplexVector target = target_states(point.params.variant).target;
    try {
      const SteadyState ss = steady_state(model_liouvillian(point.params));
      const double f = fidelity(ss.rho, target);
      min_fidelity = std::min(min_fidelity, f);
      row.insert(row.end(), {f, purity(ss.rho), ss.spectral_gap, 1.0, 0.0});
    } catch (const NonUniqueSteadyState& e) {
      ++flagged;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.insert(row.end(), {nan, nan, nan, static_cast<double>(e.null_count()), 1.0});
    }
    out.table.add(std::move(row));
  }
  out.note("points", static_cast<double>(total));
  out.note("non_unique_points", static_cast<double>(flagged));
  out.note("min_fidelity", min_fidelity);
  const std::size_t nax = cfg.grid.size();
  out.plot = "set xlabel 'grid point'\nset ylabel 'steady-state fidelity'\n"
             "plot 'data.csv' using 0:" + std::to_string(nax + 1) + " with linespoints title 'fidelity'\n";
  return out;
}

inline PulseOptions pulse_options(const ExperimentConfig& cfg) {
  return PulseOptions{cfg.pulse.dd_filters_t2, cfg.pulse.dd_error_sign, cfg.seed};
}

/// fig3: exact DD (tau = 0), imperfect DD (tau) and corrected runs.
inline ExperimentOutput fig3(const ExperimentConfig& cfg) {
  const SystemParams& p = cfg.params;
  const PulseOptions opt = pulse_options(cfg);
  const ComplexMatrix rho0 = initial_state(cfg);
  PulseTiming exact_timing = cfg.pulse.timing();
  exact_timing.tau = 0.0;
  const Trajectory exact = run_sequence(rho0, standard_sequence(p, exact_timing, cfg.cycles, false), p, opt);
  const Trajectory imperfect =
      run_sequence(rho0, standard_sequence(p, cfg.pulse.timing(), cfg.cycles, false), p, opt);
  const Trajectory corrected =
      run_sequence(rho0, standard_sequence(p, cfg.pulse.timing(), cfg.cycles, true), p, opt);

  ExperimentOutput out;
  out.table.columns = {"cycle",          "time_us",           "fidelity_exact",
                       "fidelity_imperfect", "fidelity_corrected", "purity_exact",
                       "purity_imperfect",   "purity_corrected"};
  for (std::size_t i = 0; i < exact.size(); ++i) {
    out.table.add({static_cast<double>(i), exact.times[i], exact.records[i].fidelity,
                   imperfect.records[i].fidelity, corrected.records[i].fidelity,
                   exact.records[i].purity, imperfect.records[i].purity, corrected.records[i].purity});
  }
  out.note("dd_error_rad", cfg.pulse.tau_us > 0.0 ? dd_error(p.g, p.omega_n, cfg.pulse.tau_us) : 0.0);
  out.note("cycle_duration_us", standard_sequence(p, cfg.pulse.timing(), 0, false).cycle_duration());
  out.note("plateau_exact", exact.back().fidelity);
  out.note("plateau_imperfect", imperfect.back().fidelity);
  out.note("plateau_corrected", corrected.back().fidelity);
  out.note("max_fidelity_exact", max_fidelity(exact));
  out.plot = "set xlabel 'optical cycles N'\nset ylabel 'fidelity'\nset yrange [0:1.05]\n"
             "plot 'data.csv' using 1:3 with lines title 'exact DD', \\\n"
             "     'data.csv' using 1:4 with lines dashtype 2 title 'imperfect DD', \\\n"
             "     'data.csv' using 1:5 with lines dashtype 4 title 'corrected'\n";
  return out;
}

/// t2-inset: maximal fidelity against T2*.
inline ExperimentOutput t2_inset(const ExperimentConfig& cfg) {
  const SystemParams& p = cfg.params;
  const PulseOptions opt = pulse_options(cfg);
  const PulseSequence seq = standard_sequence(p, cfg.pulse.timing(), cfg.cycles, cfg.pulse.tau_us > 0.0);
  if (cfg.pulse.t2_values.empty()) throw ConfigError("[pulse]: t2_values is empty");

  ExperimentOutput out;
  out.table.columns = {"t2_star_us", "max_fidelity", "final_fidelity"};
  const ComplexMatrix rho0 = initial_state(cfg);
  for (double t2 : cfg.pulse.t2_values) {
    SystemParams q = p;
    q.t2_star = t2;
    const Trajectory traj = run_sequence(rho0, seq, q, opt);
    out.table.add({t2, max_fidelity(traj), traj.back().fidelity});
  }
  SystemParams clean = p;
  clean.t2_star.reset();
  const Trajectory noiseless = run_sequence(rho0, seq, clean, opt);
  out.note("noiseless_max_fidelity", max_fidelity(noiseless));
  out.note("cycle_duration_us", seq.cycle_duration());
  out.note("simulated_time_us", noiseless.times.back());
  out.plot = "set logscale x\nset xlabel 'T2* (us)'\nset ylabel 'maximal fidelity'\n"
             "plot 'data.csv' using 1:2 with linespoints title 'max fidelity'\n";
  return out;
}

/// Two nuclear spins: evolve to convergence, report the dark-state fidelity
/// and the trapped singlet population, and certify the stationary space.
inline ExperimentOutput two_nuclei(const ExperimentConfig& cfg) {
  require_markovian(cfg);
  if (cfg.params.variant != Variant::TwoNucleiSpinHalf) {
    throw ConfigError("[params]: two-nuclei experiment needs variant = two");
  }
  const SystemParams& p = cfg.params;
  const Liouvillian l = model_liouvillian(p);
  const ComplexVector target = target_states(p.variant).target;
  ConvergenceOptions opt = convergence_options(cfg);
  opt.keep_states = true;
  opt.remove_peripheral = true;
  const ConvergedRun run = evolve_until_converged(initial_state(cfg), l, target, opt);

  ExperimentOutput out;
  out.table.columns = time_series_columns(p);
  add_time_series(out.table, p, run.trajectory);
  out.note("convergence_time_us", run.convergence_time);
  out.note("final_fidelity", run.trajectory.back().fidelity);
  out.note("final_singlet_population", nuclear_singlet_population(run.final_state));
  try {
    const SteadyState ss = steady_state(l);
    out.note("null_count", 1.0);
    out.note("steady_fidelity", fidelity(ss.rho, target));
    out.note("spectral_gap_per_us", ss.spectral_gap);
  } catch (const NonUniqueSteadyState& e) {
    out.note("null_count", static_cast<double>(e.null_count()));
  }
  out.plot = "set xlabel 'time (us)'\nset yrange [0:1.05]\n"
             "plot 'data.csv' using 1:2 with lines title 'dark-state fidelity', \\\n"
             "     'data.csv' using 1:5 with lines dashtype 2 title 'singlet population'\n";
  return out;
}

}  // namespace experiments

/// Runs the configured experiment without touching the filesystem.
inline ExperimentOutput compute_experiment(const ExperimentConfig& cfg) {
  cfg.params.validate();
  switch (cfg.experiment) {
    case Experiment::Fig2: return experiments::fig2(cfg);
    case Experiment::Evolve: return experiments::evolve(cfg);
    case Experiment::Steady: return experiments::steady(cfg);
    case Experiment::Fig2Inset:
    case Experiment::Sweep: return experiments::sweep(cfg);
    case Experiment::Fig3: return experiments::fig3(cfg);
    case Experiment::T2Inset: return experiments::t2_inset(cfg);
    case Experiment::TwoNuclei: return experiments::two_nuclei(cfg);
  }
  throw ConfigError("unknown experiment");
}

inline std::string render_summary(const ExperimentConfig& cfg, const ExperimentOutput& out) {
  std::ostringstream os;
  os << "experiment: " << experiment_name(cfg.experiment) << "\n";
  for (const auto& [k, v] : out.summary) os << k << ": " << v << "\n";
  return os.str();
}

inline std::string render_plot(const ExperimentConfig& cfg, const ExperimentOutput& out) {
  return std::string("# gnuplot script for ") + experiment_name(cfg.experiment) +
         "; reads data.csv only\nset datafile separator ','\nset key autotitle columnhead\n" +
         "set grid\n" + out.plot;
}

/// Runs and writes data.csv, summary.txt and plot.gp to cfg.output.
/// Returns an ExitCode; diagnostics go to `log`.
inline int run_experiment(const ExperimentConfig& cfg, std::ostream& log = std::cerr) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output);
  std::vector<fs::path> written;
  auto cleanup = [&] {
    std::error_code ec;
    for (const auto& f : written) fs::remove(f, ec);
  };
  auto write = [&](const char* name, const std::string& body) {
    const fs::path path = dir / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    written.push_back(path);
    f << body;
    if (!f) throw Error("write failed for " + path.string());
  };
  try {
    const ExperimentOutput out = compute_experiment(cfg);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
    write("data.csv", render_csv(cfg, out.table));
    write("summary.txt", render_summary(cfg, out));
    write("plot.gp", render_plot(cfg, out));
    return kExitOk;
  } catch (const ConfigError& e) {
    cleanup();
    log << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NonUniqueSteadyState& e) {
    cleanup();
    log << "non-unique steady state: " << e.what() << "\n";
    return kExitNonUnique;
  } catch (const std::exception& e) {
    cleanup();
    log << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace darksteady
