#pragma once

// Lindblad master equation on column-stacked density matrices:
//
//   d rho/dt = -i (H_eff rho - rho H_eff^dag) + sum_k C_k rho C_k^dag,
//   H_eff    = H - (i/2) sum_k C_k^dag C_k,
//
// so that L = -i (I kron H_eff - conj(H_eff) kron I) + sum_k conj(C_k) kron C_k.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "darksteady/errors.hpp"
#include "darksteady/linalg.hpp"

namespace darksteady {

struct Liouvillian {
  ComplexMatrix matrix;  // d^2 x d^2, us^-1
  Eigen::Index dim = 0;
  SpaceLayout layout;

  /// Max column sum of |L|; bounds the spectral radius.
  double spectral_bound() const { return linalg::one_norm(matrix); }
  double norm() const { return matrix.norm(); }
};

inline ComplexMatrix effective_hamiltonian(const ComplexMatrix& h,
                                           const std::vector<ComplexMatrix>& cs) {
  ComplexMatrix heff = h;
  for (const auto& c : cs) heff -= 0.5 * kI * (c.adjoint() * c);
  return heff;
}

inline void check_operator_dims(const ComplexMatrix& h, const std::vector<ComplexMatrix>& cs) {
  linalg::require_square(h, "lindblad");
  for (const auto& c : cs) {
    if (c.rows() != h.rows() || c.cols() != h.cols()) {
      throw DimensionError("collapse operator dimension does not match the Hamiltonian");
    }
  }
}

/// Right-hand side of the master equation evaluated directly on rho.
inline ComplexMatrix lindblad_rhs(const ComplexMatrix& h, const std::vector<ComplexMatrix>& cs,
                                  const ComplexMatrix& rho) {
  check_operator_dims(h, cs);
  if (rho.rows() != h.rows() || rho.cols() != h.cols()) {
    throw DimensionError("density matrix dimension does not match the Hamiltonian");
  }
  const ComplexMatrix heff = effective_hamiltonian(h, cs);
  ComplexMatrix out = -kI * (heff * rho - rho * heff.adjoint());
  for (const auto& c : cs) out += c * rho * c.adjoint();
  return out;
}

inline Liouvillian build_liouvillian(const ComplexMatrix& h, const std::vector<ComplexMatrix>& cs,
                                     std::optional<SpaceLayout> layout = std::nullopt) {
  check_operator_dims(h, cs);
  const Eigen::Index d = h.rows();
  if (layout && static_cast<Eigen::Index>(layout->total()) != d) {
    throw DimensionError("layout does not match the Hamiltonian dimension");
  }
  const ComplexMatrix id = linalg::identity(d);
  const ComplexMatrix heff = effective_hamiltonian(h, cs);
  Liouvillian l;
  l.dim = d;
  l.layout = layout.value_or(SpaceLayout{{static_cast<std::size_t>(d)}});
  l.matrix = -kI * (linalg::kron(id, heff) - linalg::kron(ComplexMatrix(heff.conjugate()), id));
  for (const auto& c : cs) l.matrix += linalg::kron(ComplexMatrix(c.conjugate()), c);
  return l;
}

/// Superoperator of the unitary conjugation rho -> U rho U^dag.
inline ComplexMatrix unitary_superoperator(const ComplexMatrix& u) {
  return linalg::kron(ComplexMatrix(u.conjugate()), u);
}

// ---------------------------------------------------------------------------
// Observables

inline double fidelity(const ComplexMatrix& rho, const ComplexVector& psi) {
  if (rho.rows() != psi.size() || rho.cols() != psi.size()) {
    throw DimensionError("fidelity: state and density matrix dimensions differ");
  }
  if (std::abs(psi.norm() - 1.0) > 1e-9) throw DomainError("fidelity: target is not unit norm");
  const Complex f = (psi.adjoint() * rho * psi)(0, 0);
  if (std::abs(f.imag()) > 1e-12) {
    throw NumericalError("fidelity: imaginary residue " + std::to_string(f.imag()));
  }
  return f.real();
}

inline double purity(const ComplexMatrix& rho) {
  return (rho * rho).trace().real();
}

struct Observables {
  double fidelity = 0.0;
  double purity = 0.0;
  double trace_deviation = 0.0;        // |Tr rho - 1|
  double hermiticity_deviation = 0.0;  // max |rho - rho^dag|
  double min_eigenvalue = 0.0;
  std::vector<double> populations;
};

inline Observables observe(const ComplexMatrix& rho, const ComplexVector& target) {
  Observables o;
  o.fidelity = fidelity(rho, target);
  o.purity = purity(rho);
  o.trace_deviation = std::abs(rho.trace() - Complex{1.0, 0.0});
  o.hermiticity_deviation = linalg::hermiticity_deviation(rho);
  o.min_eigenvalue = linalg::min_eigenvalue_hermitian(rho);
  o.populations.resize(static_cast<std::size_t>(rho.rows()));
  for (Eigen::Index i = 0; i < rho.rows(); ++i) o.populations[static_cast<std::size_t>(i)] = rho(i, i).real();
  return o;
}

/// Time-sampled record of an evolution. Times are in us (or cycle indices
/// for pulse runs, with the wall-clock time kept in `times`).
struct Trajectory {
  std::vector<double> times;
  std::vector<ComplexMatrix> states;  // filled only when requested
  std::vector<Observables> records;

  std::size_t size() const { return times.size(); }
  const Observables& back() const { return records.back(); }
};

namespace detail {

inline void record(Trajectory& traj, double t, const ComplexMatrix& rho,
                   const ComplexVector& target, bool keep_states) {
  traj.times.push_back(t);
  traj.records.push_back(observe(rho, target));
  if (keep_states) traj.states.push_back(rho);
}

inline void check_initial(const ComplexMatrix& rho0, const Liouvillian& l) {
  if (rho0.rows() != l.dim || rho0.cols() != l.dim) {
    throw DimensionError("initial state dimension does not match the Liouvillian");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Time evolution

/// One classical fourth-order Runge-Kutta step on vec(rho).
inline ComplexVector rk4_step(const ComplexMatrix& l, const ComplexVector& v, double dt) {
  const ComplexVector k1 = l * v;
  const ComplexVector k2 = l * (v + 0.5 * dt * k1);
  const ComplexVector k3 = l * (v + 0.5 * dt * k2);
  const ComplexVector k4 = l * (v + dt * k3);
  return v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Transfer matrix of one RK4 step for the linear system v' = L v:
/// T = I + hL + (hL)^2/2 + (hL)^3/6 + (hL)^4/24, so rk4_step(L, v, h) = T v.
inline ComplexMatrix rk4_transfer(const ComplexMatrix& l, double dt) {
  const ComplexMatrix id = linalg::identity(l.rows());
  const ComplexMatrix a = dt * l;
  return id + a * (id + (a / 2.0) * (id + (a / 3.0) * (id + a / 4.0)));
}

inline ComplexMatrix matrix_power(ComplexMatrix base, std::size_t exponent) {
  ComplexMatrix result = linalg::identity(base.rows());
  while (exponent > 0) {
    if (exponent & 1U) result = result * base;
    exponent >>= 1U;
    if (exponent > 0) base = base * base;
  }
  return result;
}

/// Largest dt admitted by the step guard dt * spectral_bound <= 0.1.
inline double max_stable_dt(const Liouvillian& l) {
  const double bound = l.spectral_bound();
  return bound > 0.0 ? 0.1 / bound : std::numeric_limits<double>::infinity();
}

inline void check_step(const Liouvillian& l, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw StepSizeError("dt must be positive", max_stable_dt(l));
  if (dt * l.spectral_bound() > 0.1 * (1.0 + 1e-12)) {
    const double suggested = max_stable_dt(l);
    throw StepSizeError("dt = " + std::to_string(dt) + " us violates dt*|L| <= 0.1; use dt <= " +
                            std::to_string(suggested) + " us",
                        suggested);
  }
}

/// Fixed-step RK4 from 0 to t_end, sampling every `sample_every` steps plus
/// the final step. The trace is recorded, never renormalized.
inline Trajectory evolve_fixed_step(const ComplexMatrix& rho0, const Liouvillian& l, double t_end,
                                    double dt, std::size_t sample_every,
                                    const ComplexVector& target, bool keep_states = false) {
  detail::check_initial(rho0, l);
  if (!(t_end > 0.0)) throw DomainError("t_end must be positive");
  if (sample_every == 0) throw DomainError("sample_every must be >= 1");
  check_step(l, dt);

  auto steps = static_cast<std::size_t>(std::llround(t_end / dt));
  if (steps == 0) steps = 1;
  double h = dt;
  if (std::abs(static_cast<double>(steps) * dt - t_end) > 1e-9 * t_end) {
    steps = static_cast<std::size_t>(std::ceil(t_end / dt));
    h = t_end / static_cast<double>(steps);
  }

  const ComplexMatrix step = rk4_transfer(l.matrix, h);
  const std::size_t stride = std::min(sample_every, steps);
  const ComplexMatrix stride_map = matrix_power(step, stride);

  Trajectory traj;
  ComplexVector v = linalg::vectorize(rho0);
  detail::record(traj, 0.0, rho0, target, keep_states);
  std::size_t done = 0;
  while (done < steps) {
    const std::size_t n = std::min(stride, steps - done);
    v = (n == stride) ? ComplexVector(stride_map * v) : ComplexVector(matrix_power(step, n) * v);
    done += n;
    const ComplexMatrix rho = linalg::unvectorize(v, l.dim);
    if (!linalg::all_finite(rho)) throw NumericalError("evolve_fixed_step: non-finite state");
    detail::record(traj, static_cast<double>(done) * h, rho, target, keep_states);
  }
  return traj;
}

/// rho(t) = unvec(exp(L t) vec rho0).
inline ComplexMatrix evolve_propagator(const ComplexMatrix& rho0, const Liouvillian& l, double t) {
  detail::check_initial(rho0, l);
  if (!(t >= 0.0)) throw DomainError("t must be >= 0");
  if (t == 0.0) return rho0;
  return linalg::unvectorize(linalg::expm(l.matrix, t) * linalg::vectorize(rho0), l.dim);
}

enum class Integrator { Rk4, Propagator };

/// Residual |L vec rho|_2, zero exactly at stationarity.
inline double stationarity_residual(const Liouvillian& l, const ComplexMatrix& rho) {
  return (l.matrix * linalg::vectorize(rho)).norm();
}

inline constexpr double kNullTolerance = 1e-10;

struct ConvergenceOptions {
  Integrator integrator = Integrator::Rk4;
  double dt = 0.0;               // RK4 step; 0 selects max_stable_dt
  double sample_interval = 0.05; // us between samples
  double tolerance = 1e-8;       // on stationarity_residual
  double max_time = 2000.0;      // us
  double pad_fraction = 0.2;     // keep integrating this fraction past convergence
  bool keep_states = false;
  // Measure the residual after removing the component on eigenvalues with
  // |Re lambda| < kNullTolerance*|L|_F. Needed when that component oscillates.
  bool remove_peripheral = false;
};

struct ConvergedRun {
  Trajectory trajectory;
  double convergence_time = 0.0;  // first sample meeting the tolerance
  ComplexMatrix final_state;
};

/// Integrates until |L vec rho| < tolerance, then continues for
/// pad_fraction of the elapsed time.
inline ConvergedRun evolve_until_converged(const ComplexMatrix& rho0, const Liouvillian& l,
                                           const ComplexVector& target,
                                           const ConvergenceOptions& opt = {}) {
  detail::check_initial(rho0, l);
  if (!(opt.sample_interval > 0.0)) throw DomainError("sample_interval must be positive");

  ComplexMatrix sample_map;
  double interval = opt.sample_interval;
  if (opt.integrator == Integrator::Rk4) {
    const double dt = opt.dt > 0.0 ? opt.dt : max_stable_dt(l);
    check_step(l, dt);
    const auto per_sample = static_cast<std::size_t>(std::max(1.0, std::ceil(interval / dt)));
    const double h = interval / static_cast<double>(per_sample);
    sample_map = matrix_power(rk4_transfer(l.matrix, h), per_sample);
  } else {
    sample_map = linalg::expm(l.matrix, interval);
  }

  ConvergedRun run;
  ComplexVector v = linalg::vectorize(rho0);

  // Peripheral modes k evolve as c_k mu_k^n under the sample map.
  ComplexMatrix modes;
  ComplexVector coeff, mu;
  if (opt.remove_peripheral) {
    const linalg::EigenDecomposition eig = linalg::eig_full(l.matrix);
    const ComplexVector all = eig.vectors.partialPivLu().solve(v);
    const double tol = kNullTolerance * l.norm();
    std::vector<Eigen::Index> idx;
    for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
      if (std::abs(eig.values(k).real()) < tol) idx.push_back(k);
    }
    const auto m = static_cast<Eigen::Index>(idx.size());
    modes.resize(v.size(), m);
    coeff.resize(m);
    mu.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index k = idx[static_cast<std::size_t>(j)];
      modes.col(j) = eig.vectors.col(k);
      coeff(j) = all(k);
      mu(j) = modes.col(j).dot(sample_map * modes.col(j)) / modes.col(j).squaredNorm();
    }
  }
  detail::record(run.trajectory, 0.0, rho0, target, opt.keep_states);
  std::optional<std::size_t> converged_at;
  std::size_t n = 0;
  std::size_t stop_at = 0;
  for (;;) {
    v = sample_map * v;
    ++n;
    const double t = static_cast<double>(n) * interval;
    const ComplexMatrix rho = linalg::unvectorize(v, l.dim);
    if (!linalg::all_finite(rho)) throw NumericalError("evolve_until_converged: non-finite state");
    detail::record(run.trajectory, t, rho, target, opt.keep_states);
    ComplexVector decaying = v;
    if (coeff.size() > 0) {
      for (Eigen::Index j = 0; j < coeff.size(); ++j) coeff(j) *= mu(j);
      decaying -= modes * coeff;
    }
    if (!converged_at && (l.matrix * decaying).norm() < opt.tolerance) {
      converged_at = n;
      run.convergence_time = t;
      stop_at = n + static_cast<std::size_t>(std::ceil(opt.pad_fraction * static_cast<double>(n)));
    }
    if (converged_at && n >= stop_at) break;
    if (!converged_at && t >= opt.max_time) {
      throw NumericalError("no convergence within " + std::to_string(opt.max_time) + " us");
    }
  }
  run.final_state = linalg::unvectorize(v, l.dim);
  return run;
}

// ---------------------------------------------------------------------------
// Steady state

class NonUniqueSteadyState : public Error {
 public:
  NonUniqueSteadyState(std::size_t null_count, std::vector<ComplexMatrix> basis)
      : Error("stationary space has dimension " + std::to_string(null_count)),
        null_count_(null_count),
        basis_(std::move(basis)) {}
  std::size_t null_count() const noexcept { return null_count_; }
  const std::vector<ComplexMatrix>& basis() const noexcept { return basis_; }

 private:
  std::size_t null_count_;
  std::vector<ComplexMatrix> basis_;
};

struct SteadyState {
  ComplexMatrix rho;
  std::size_t null_count = 0;  // eigenvalues with |lambda| < tol
  double spectral_gap = 0.0;   // smallest |Re lambda| among the rest
  double null_eigenvalue = 0.0;  // |lambda| of the selected null pair
  double clipped_weight = 0.0;
};

/// Stationary state from the null space of L (tolerance kNullTolerance*|L|_F).
/// The eigenvector is Hermitized, negative eigenvalues below -1e-10 are
/// clipped (at most 1e-8 total weight) and the trace renormalized.
inline SteadyState steady_state(const Liouvillian& l) {
  const linalg::EigenDecomposition eig = linalg::eig_full(l.matrix);
  const double tol = kNullTolerance * l.norm();

  std::vector<Eigen::Index> null_idx;
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    if (std::abs(eig.values(k)) < tol) null_idx.push_back(k);
  }

  auto to_state = [&](Eigen::Index k) {
    ComplexMatrix m = linalg::unvectorize(eig.vectors.col(k), l.dim);
    const Complex tr = m.trace();
    if (std::abs(tr) > 1e-12) m /= tr;
    return m;
  };

  if (null_idx.empty()) throw NumericalError("steady_state: no eigenvalue within the null tolerance");
  if (null_idx.size() > 1) {
    std::vector<ComplexMatrix> basis;
    for (auto k : null_idx) basis.push_back(to_state(k));
    throw NonUniqueSteadyState(null_idx.size(), std::move(basis));
  }

  SteadyState ss;
  ss.null_count = 1;
  ss.null_eigenvalue = std::abs(eig.values(null_idx.front()));
  ss.spectral_gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < eig.values.size(); ++k) {
    if (k != null_idx.front()) ss.spectral_gap = std::min(ss.spectral_gap, std::abs(eig.values(k).real()));
  }

  ComplexMatrix m = linalg::unvectorize(eig.vectors.col(null_idx.front()), l.dim);
  const Complex tr = m.trace();
  if (std::abs(tr) < 1e-12) throw NumericalError("steady_state: null vector is traceless");
  m /= tr;
  m = 0.5 * (m + m.adjoint());

  Eigen::SelfAdjointEigenSolver<ComplexMatrix> se(m);
  RealVector w = se.eigenvalues();
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) < -1e-10) {
      ss.clipped_weight += -w(i);
      w(i) = 0.0;
    }
  }
  if (ss.clipped_weight > 1e-8) {
    throw NumericalError("steady_state: clipping removed " + std::to_string(ss.clipped_weight) +
                         " weight");
  }
  m = se.eigenvectors() * w.cast<Complex>().asDiagonal() * se.eigenvectors().adjoint();
  ss.rho = m / m.trace().real();
  return ss;
}

}  // namespace darksteady
