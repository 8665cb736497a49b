// Acceptance checks: one PASS/FAIL line per criterion with the measured
// numbers. Exit status is the number of failed criteria (0 when all pass).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "darksteady/experiments.hpp"

using namespace darksteady;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [violated: " << what << "]";
    }
  }
  template <typename T>
  Check& note(const std::string& key, const T& value) {
    detail << " " << key << "=" << value;
    return *this;
  }
};

struct Criterion {
  int id;
  const char* title;
  double time_limit_s;  // 0: none
  std::function<void(Check&)> body;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Liouvillian model(const SystemParams& p) {
  return build_liouvillian(build_hamiltonian(p), build_collapse_ops(p), layout_for(p.variant));
}

SystemParams feasibility(double g) {
  SystemParams p;
  p.e_plus = p.e_minus = 30.0;
  p.g = g;
  return p;
}

ComplexMatrix mixed() { return fully_mixed_ground(Variant::SingleNucleusSpin1); }

ComplexMatrix random_density(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix a(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = Complex(n(rng), n(rng));
  ComplexMatrix rho = a * a.adjoint();
  return rho / rho.trace();
}

void stationarity(Check& c) {
  const SystemParams p;
  const ComplexVector psi = target_states(p.variant).target;
  const double h = (build_hamiltonian(p) * psi).norm();
  double cmax = 0.0;
  for (const auto& op : build_collapse_ops(p)) cmax = std::max(cmax, (op * psi).norm());
  const double l = (model(p).matrix * linalg::vectorize(linalg::projector(psi))).cwiseAbs().maxCoeff();
  c.note("|H psi|", num(h)).note("max|C psi|", num(cmax)).note("max|L vec|", num(l));
  c.require(h < 1e-12, "|H psi| < 1e-12");
  c.require(cmax == 0.0, "|C_k psi| = 0");
  c.require(l < 1e-12, "max|L vec| < 1e-12");
}

void fig2(Check& c) {
  const SystemParams p;
  const Liouvillian l = model(p);
  const ComplexVector psi = target_states(p.variant).target;
  ConvergenceOptions opt;
  const ConvergedRun run = evolve_until_converged(mixed(), l, psi, opt);
  const auto& first = run.trajectory.records.front();
  const auto& last = run.trajectory.back();
  const SteadyState ss = steady_state(l);
  const double diff = linalg::max_abs(run.final_state - ss.rho);
  c.note("F(0)", num(first.fidelity)).note("P(0)", num(first.purity));
  c.note("t_conv", num(run.convergence_time)).note("F", num(last.fidelity)).note("P", num(last.purity));
  c.note("|rho_end-rho_ss|", num(diff));
  c.require(std::abs(first.fidelity - 1.0 / 12.0) <= 1e-12, "F(0) = 1/12 +- 1e-12");
  c.require(std::abs(first.purity - 1.0 / 9.0) <= 1e-12, "P(0) = 1/9 +- 1e-12");
  c.require(stationarity_residual(l, run.final_state) < 1e-8, "|L vec rho| < 1e-8");
  c.require(last.fidelity >= 0.98 && last.purity >= 0.98, "F, P >= 0.98");
  c.require(diff <= 1e-6, "endpoint vs steady state <= 1e-6");
}

void uniqueness(Check& c) {
  const SystemParams p;
  const Liouvillian l = model(p);
  const ComplexVector psi = target_states(p.variant).target;
  const SteadyState ss = steady_state(l);
  // long-time RK4 as the independent oracle
  const ConvergedRun run = evolve_until_converged(mixed(), l, psi);
  const double f = fidelity(ss.rho, psi);
  const double gap = linalg::max_abs(run.final_state - ss.rho);
  c.note("null_count", ss.null_count).note("F_ss", num(f)).note("gap", num(ss.spectral_gap));
  c.note("|rho_ss-rho_rk4|", num(gap));
  c.require(ss.null_count == 1, "exactly one null eigenvalue");
  c.require(f >= 0.999, "F >= 0.999");
  c.require(gap <= 1e-6, "agrees with long-time RK4");
}

void robustness(Check& c) {
  double worst = 1.0;
  for (double e : {5.0, 10.0, 20.0}) {
    for (double w : {0.5, 1.0, 2.0}) {
      SystemParams p;
      p.e_plus = p.e_minus = e;
      p.omega_e = p.omega_n = w;
      worst = std::min(worst, fidelity(steady_state(model(p)).rho, target_states(p.variant).target));
    }
  }
  c.note("min F over 3x3 grid", num(worst));
  c.require(worst >= 0.99, "F >= 0.99 on every grid point");
}

void integrators(Check& c) {
  const SystemParams p;
  const Liouvillian l = model(p);
  const ComplexVector psi = target_states(p.variant).target;
  const Trajectory rk = evolve_fixed_step(mixed(), l, 10.0, max_stable_dt(l), 1u << 30, psi, true);
  const double diff = linalg::max_abs(rk.states.back() - evolve_propagator(mixed(), l, 10.0));

  const double gamma = 3.0;
  ComplexMatrix op = ComplexMatrix::Zero(2, 2);
  op(0, 1) = std::sqrt(gamma);
  const Liouvillian damp = build_liouvillian(ComplexMatrix::Zero(2, 2), {op});
  ComplexMatrix excited = ComplexMatrix::Zero(2, 2);
  excited(1, 1) = 1.0;
  ComplexVector e = ComplexVector::Zero(2);
  e(1) = 1.0;
  const Trajectory dt = evolve_fixed_step(excited, damp, 2.0, 1e-3, 50, e, true);
  double worst = 0.0;
  for (std::size_t i = 0; i < dt.size(); ++i) {
    const double expect = std::exp(-gamma * dt.times[i]);
    worst = std::max(worst, std::abs(dt.states[i](1, 1).real() - expect));
    worst = std::max(worst, std::abs(dt.states[i](0, 0).real() - (1.0 - expect)));
  }
  const double prop = std::abs(evolve_propagator(excited, damp, 2.0)(1, 1).real() - std::exp(-2.0 * gamma));
  c.note("|rk4-expm|(t=10)", num(diff)).note("damping rk4 err", num(worst)).note("damping expm err", num(prop));
  c.require(diff <= 1e-6, "RK4 vs propagator <= 1e-6");
  c.require(worst <= 1e-8 && prop <= 1e-8, "amplitude damping within 1e-8");
}

void cptp(Check& c) {
  double trace = 0.0, herm = 0.0, mineig = 0.0;
  auto scan = [&](const Trajectory& t) {
    for (const auto& r : t.records) {
      trace = std::max(trace, r.trace_deviation);
      herm = std::max(herm, r.hermiticity_deviation);
      mineig = std::min(mineig, r.min_eigenvalue);
    }
  };
  {
    const SystemParams p;
    scan(evolve_until_converged(mixed(), model(p), target_states(p.variant).target).trajectory);
  }
  {
    SystemParams p;
    p.variant = Variant::TwoNucleiSpinHalf;
    ConvergenceOptions opt;
    opt.remove_peripheral = true;
    scan(evolve_until_converged(fully_mixed_ground(p.variant), model(p), target_states(p.variant).target, opt)
             .trajectory);
  }
  {
    const SystemParams p = feasibility(2.5);
    PulseTiming timing;
    timing.tau = 0.005;
    scan(run_sequence(mixed(), standard_sequence(p, timing, 200, true), p));
    SystemParams q = feasibility(2.0);
    q.t2_star = 10.0;
    scan(run_sequence(mixed(), standard_sequence(q, PulseTiming{}, 200, false), q));
  }
  const SystemParams p;
  const ComplexMatrix h = build_hamiltonian(p);
  const auto cs = build_collapse_ops(p);
  const Liouvillian l = build_liouvillian(h, cs);
  std::mt19937_64 rng(1000);
  double rhs = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const ComplexMatrix rho = random_density(12, rng);
    rhs = std::max(rhs, linalg::max_abs(lindblad_rhs(h, cs, rho) -
                                        linalg::unvectorize(l.matrix * linalg::vectorize(rho), 12)));
  }
  c.note("max|Tr-1|", num(trace)).note("max|rho-rho^+|", num(herm)).note("min eig", num(mineig));
  c.note("max|L vec - direct| (1000 rho)", num(rhs));
  c.require(trace <= 1e-8, "|Tr rho - 1| <= 1e-8");
  c.require(herm <= 1e-9, "|rho - rho^+| <= 1e-9");
  c.require(mineig >= -1e-8, "min eigenvalue >= -1e-8");
  c.require(rhs <= 1e-12, "Liouvillian vs direct within 1e-12");
}

void pulsed(Check& c) {
  const SystemParams p = feasibility(2.5);
  PulseTiming timing;
  timing.tau = 0.005;
  const std::size_t n = 200;
  const Trajectory exact = run_sequence(mixed(), standard_sequence(p, PulseTiming{}, n, false), p);
  const Trajectory bad = run_sequence(mixed(), standard_sequence(p, timing, n, false), p);
  const Trajectory fixed = run_sequence(mixed(), standard_sequence(p, timing, n, true), p);
  bool ordered = true;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    ordered = ordered && fixed.records[i].fidelity >= bad.records[i].fidelity;
  }
  const double fe = exact.back().fidelity, fb = bad.back().fidelity, ff = fixed.back().fidelity;
  c.note("eps", num(dd_error(p.g, p.omega_n, timing.tau)));
  c.note("plateau exact", num(fe)).note("uncorrected", num(fb)).note("corrected", num(ff));
  c.require(fe >= 0.97, "tau = 0 plateau >= 0.97");
  c.require(fb < fe, "uncorrected plateau strictly lower");
  c.require(std::abs(ff - fe) <= 0.02, "corrected within 0.02 of tau = 0");
  c.require(ordered, "corrected >= uncorrected at every N");
}

void feasibility_numbers(Check& c) {
  const SystemParams p = feasibility(2.0);
  const PulseSequence seq = standard_sequence(p, PulseTiming{}, 200, false);
  const Trajectory clean = run_sequence(mixed(), seq, p);
  // first cycle reaching 0.98 and its wall-clock time
  double t98 = -1.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean.records[i].fidelity >= 0.98) {
      t98 = clean.times[i];
      break;
    }
  }
  SystemParams noisy = p;
  noisy.t2_star = 10.0;
  const double f10 = max_fidelity(run_sequence(mixed(), seq, noisy));
  c.note("max F noiseless", num(max_fidelity(clean))).note("t(F>=0.98) us", num(t98));
  c.note("simulated us", num(clean.times.back())).note("max F (T2*=10us)", num(f10));
  c.require(t98 >= 0.0 && t98 <= 2100.0, "F >= 0.98 within ~2 ms");
  c.require(std::abs(f10 - 0.95) <= 0.03, "T2* = 10 us gives 0.95 +- 0.03");
}

void t2_monotone(Check& c) {
  const SystemParams p = feasibility(2.0);
  const auto pts = t2star_sweep(p, standard_sequence(p, PulseTiming{}, 200, false), {1, 5, 10, 50, 100});
  bool mono = true;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    c.note("F(" + num(pts[i].t2_star) + ")", num(pts[i].max_fidelity));
    if (i > 0) mono = mono && pts[i].max_fidelity >= pts[i - 1].max_fidelity;
  }
  c.require(mono, "max fidelity non-decreasing in T2*");
}

void two_nuclei(Check& c) {
  SystemParams p;
  p.variant = Variant::TwoNucleiSpinHalf;
  const ComplexVector psi = target_states(p.variant).target;
  ConvergenceOptions opt;
  opt.remove_peripheral = true;
  const ConvergedRun run = evolve_until_converged(fully_mixed_ground(p.variant), model(p), psi, opt);
  const double singlet = nuclear_singlet_population(run.final_state);
  const double f = fidelity(run.final_state, psi);

  SystemParams q = p;
  q.asymmetry = {1.0, 0.8};
  const SteadyState ss = steady_state(model(q));
  const double fq = fidelity(ss.rho, psi);
  c.note("singlet", num(singlet)).note("F symmetric", num(f));
  c.note("asym null_count", ss.null_count).note("F asym", num(fq));
  c.require(std::abs(singlet - 0.25) <= 0.01, "singlet 0.25 +- 0.01");
  c.require(std::abs(f - 0.75) <= 0.01, "fidelity 0.75 +- 0.01");
  c.require(ss.null_count == 1, "asymmetric steady state unique");
  c.require(fq >= 0.95, "asymmetric fidelity >= 0.95");
}

void determinism(Check& c) {
  namespace fs = std::filesystem;
  const fs::path base = fs::temp_directory_path() / "darksteady_acceptance";
  auto run_twice = [&](const std::string& text) {
    std::string out[2];
    for (auto& o : out) {
      fs::remove_all(base);
      ExperimentConfig cfg = parse_config(text);
      cfg.output = base.string();
      if (run_experiment(cfg) != kExitOk) return false;
      std::ifstream in(base / "data.csv", std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      o = ss.str();
    }
    return !out[0].empty() && out[0] == out[1];
  };
  const bool a = run_twice("experiment = fig2\n");
  const bool b = run_twice(
      "experiment = fig3\ncycles = 50\nseed = 123\n[params]\nt2_star = 10\nnoise_model = quasistatic\n"
      "noise_samples = 16\n");
  const bool d = run_twice("experiment = fig2-inset\n");
  fs::remove_all(base);
  c.note("fig2", a ? "identical" : "differs").note("fig3 quasistatic", b ? "identical" : "differs");
  c.note("fig2-inset", d ? "identical" : "differs");
  c.require(a && b && d, "byte-identical CSV");
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "dark-state stationarity", 1.0, stationarity},
      {2, "fig2 reproduction", 30.0, fig2},
      {3, "steady-state uniqueness", 0.0, uniqueness},
      {4, "robustness grid", 120.0, robustness},
      {5, "integrator cross-validation", 0.0, integrators},
      {6, "CPTP property suite", 0.0, cptp},
      {7, "pulsed protocol ordering", 0.0, pulsed},
      {8, "feasibility numbers", 0.0, feasibility_numbers},
      {9, "T2* monotonicity", 0.0, t2_monotone},
      {10, "two-nuclei extension", 120.0, two_nuclei},
      {11, "determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      cr.body(c);
    } catch (const std::exception& e) {
      c.ok = false;
      c.detail << " [exception: " << e.what() << "]";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.time_limit_s > 0.0) {
      c.require(secs < cr.time_limit_s, "runtime < " + num(cr.time_limit_s) + " s");
    }
    if (!c.ok) ++failed;
    std::cout << (c.ok ? "PASS" : "FAIL") << "  " << cr.id << ". " << cr.title << " (" << num(secs) << " s):"
              << c.detail.str() << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " passed\n";
  return failed;
}
