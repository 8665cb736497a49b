#pragma once

// Stroboscopic pulsed protocol: optical pumping, instantaneous rotations in
// the {|0>, |D>} subspaces, hyperfine free evolution and a slow nuclear
// rotation whose residual error under dynamical decoupling is the analytic
// angle error eps(tau).
//
// Every segment is a fixed linear map on vec(rho); a cycle is compiled once
// and replayed, and the state is sampled once per cycle at the readout point.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "darksteady/errors.hpp"
#include "darksteady/lindblad.hpp"
#include "darksteady/linalg.hpp"
#include "darksteady/model.hpp"

namespace darksteady {

enum class RotationAxis { X, Y };

namespace segment {

struct OpticalPump {
  double duration = 0.1;  // us
};

struct ElectronRotation {
  double angle = std::numbers::pi / 2;
  RotationAxis axis = RotationAxis::Y;
  double duration = 0.01;  // us, wall-clock bookkeeping only
};

struct FreeEvolution {
  double duration = 0.1;  // us
};

struct NuclearRotation {
  double angle = std::numbers::pi / 2;
  RotationAxis axis = RotationAxis::Y;
  double dd_interval = 0.0;  // tau, us
  double duration = 10.0;    // us, used for noise bookkeeping only
};

struct Idle {
  double duration = 0.0;  // us
};

}  // namespace segment

using PulseSegment = std::variant<segment::OpticalPump, segment::ElectronRotation,
                                  segment::FreeEvolution, segment::NuclearRotation, segment::Idle>;

inline double wall_clock(const PulseSegment& seg) {
  return std::visit([](const auto& s) { return s.duration; }, seg);
}

inline void validate_segment(const PulseSegment& seg) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if (!(std::isfinite(s.duration) && s.duration >= 0.0)) {
          throw ConfigError("segment duration must be >= 0");
        }
        if constexpr (std::is_same_v<T, segment::ElectronRotation> ||
                      std::is_same_v<T, segment::NuclearRotation>) {
          if (!std::isfinite(s.angle)) throw ConfigError("rotation angle must be finite");
        }
        if constexpr (std::is_same_v<T, segment::NuclearRotation>) {
          if (!(std::isfinite(s.dd_interval) && s.dd_interval >= 0.0)) {
            throw ConfigError("dd interval tau must be >= 0");
          }
        }
      },
      seg);
}

struct PulseSequence {
  std::vector<PulseSegment> segments;  // one cycle
  std::size_t cycles = 0;
  bool correction_enabled = false;
  /// Segment index after which each cycle is sampled; nullopt samples at the
  /// end of the cycle.
  std::optional<std::size_t> readout_after;

  double cycle_duration() const {
    double t = 0.0;
    for (const auto& s : segments) t += wall_clock(s);
    return t;
  }
};

/// Segment timings of a standard cycle.
struct PulseTiming {
  double pump = 0.1;            // us
  double electron_pulse = 0.01; // us
  std::optional<double> free;   // us; default pi/(2 g) in angular units, i.e. 1/(4 g)
  double nuclear_pulse = 10.0;  // us
  double tau = 0.0;             // us
  RotationAxis axis = RotationAxis::Y;
};

inline double optimal_free_time(double g_mhz) {
  if (!(g_mhz > 0.0)) throw DomainError("free-evolution time needs g > 0");
  return std::numbers::pi / (2.0 * kTwoPi * g_mhz);
}

/// OpticalPump -> ElectronRotation(pi/2) -> FreeEvolution(pi/2g) ->
/// NuclearRotation(pi/2, tau), sampled after the free evolution, where the
/// noiseless fixed point is the dark entangled state.
inline PulseSequence standard_sequence(const SystemParams& p, const PulseTiming& timing,
                                       std::size_t cycles, bool correction) {
  PulseSequence seq;
  seq.segments = {
      segment::OpticalPump{timing.pump},
      segment::ElectronRotation{std::numbers::pi / 2, timing.axis, timing.electron_pulse},
      segment::FreeEvolution{timing.free.value_or(optimal_free_time(p.g))},
      segment::NuclearRotation{std::numbers::pi / 2, timing.axis, timing.tau, timing.nuclear_pulse}};
  seq.cycles = cycles;
  seq.correction_enabled = correction;
  seq.readout_after = 2;
  return seq;
}

inline bool is_standard_cycle(const PulseSequence& seq) {
  return seq.segments.size() == 4 && std::holds_alternative<segment::OpticalPump>(seq.segments[0]) &&
         std::holds_alternative<segment::ElectronRotation>(seq.segments[1]) &&
         std::holds_alternative<segment::FreeEvolution>(seq.segments[2]) &&
         std::holds_alternative<segment::NuclearRotation>(seq.segments[3]);
}

/// Nuclear rotation error eps = sin(g^2 tau / sqrt(g^2 + Omega_n^2)) with
/// g, Omega_n converted to rad/us. Returned in radians.
inline double dd_error(double g_mhz, double omega_n_mhz, double tau_us) {
  if (!(g_mhz >= 0.0) || !(omega_n_mhz >= 0.0) || !(tau_us >= 0.0)) {
    throw DomainError("dd_error: arguments must be >= 0");
  }
  if (g_mhz == 0.0 && omega_n_mhz == 0.0) throw DomainError("dd_error: g and omega_n both zero");
  const double g = kTwoPi * g_mhz;
  const double w = kTwoPi * omega_n_mhz;
  return std::sin(g * g * tau_us / std::hypot(g, w));
}

/// How eps enters the nuclear rotation angle.
enum class DdErrorSign { Excess, Deficit };

struct PulseOptions {
  bool dd_filters_t2 = true;  // DD also removes T2* dephasing during the nuclear pulse
  DdErrorSign dd_error_sign = DdErrorSign::Excess;
  std::uint64_t seed = 0;     // quasi-static noise only
};

// ---------------------------------------------------------------------------
// Rotations

enum class Party { Electron, Nucleus };

/// Named single-party states; Dark/Bright are (|+1> +- |-1>)/sqrt2.
enum class SubspaceLevel { Plus, Minus, Zero, A1, Dark, Bright };

inline ComplexVector level_vector(Party party, SubspaceLevel level) {
  const Eigen::Index dim = party == Party::Electron ? 4 : 3;
  switch (level) {
    case SubspaceLevel::Plus: return ops::basis(dim, 0);
    case SubspaceLevel::Minus: return ops::basis(dim, 1);
    case SubspaceLevel::Zero: return ops::basis(dim, 2);
    case SubspaceLevel::A1:
      if (party != Party::Electron) throw ConfigError("A1 is an electron level");
      return ops::basis(dim, 3);
    case SubspaceLevel::Dark: return ops::dark_triplet(dim);
    case SubspaceLevel::Bright: return ops::bright_triplet(dim);
  }
  throw ConfigError("unknown level");
}

/// exp(-i angle/2 sigma_axis) on span{a, b} (a plays |0> of the Pauli
/// matrices), identity on the orthogonal complement.
inline ComplexMatrix local_rotation(const ComplexVector& a, const ComplexVector& b, double angle,
                                    RotationAxis axis) {
  if (a.size() != b.size()) throw DimensionError("rotation levels differ in dimension");
  if (std::abs(a.dot(b)) > 1e-12 || std::abs(a.norm() - 1.0) > 1e-12 ||
      std::abs(b.norm() - 1.0) > 1e-12) {
    throw ConfigError("rotation levels must be orthonormal");
  }
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  Eigen::Matrix2cd u;
  if (axis == RotationAxis::X) {
    u << c, -kI * s, -kI * s, c;
  } else {
    u << c, -s, s, c;
  }
  ComplexMatrix basis(a.size(), 2);
  basis.col(0) = a;
  basis.col(1) = b;
  return linalg::identity(a.size()) - basis * basis.adjoint() + basis * u * basis.adjoint();
}

/// Rotation of one party inside the full single-nucleus space.
inline ComplexMatrix subspace_rotation(Party party, std::pair<SubspaceLevel, SubspaceLevel> levels,
                                       double angle, RotationAxis axis) {
  if (levels.first == levels.second) throw ConfigError("rotation needs two distinct levels");
  if (!std::isfinite(angle)) throw ConfigError("rotation angle must be finite");
  const ComplexMatrix local = local_rotation(level_vector(party, levels.first),
                                             level_vector(party, levels.second), angle, axis);
  const SpaceLayout layout = layout_for(Variant::SingleNucleusSpin1);
  return linalg::embed(local, layout, party == Party::Electron ? 0 : 1);
}

// ---------------------------------------------------------------------------
// Segment maps

namespace detail {

inline const ComplexVector& target_single() {
  static const ComplexVector t = target_states(Variant::SingleNucleusSpin1).target;
  return t;
}

inline double actual_nuclear_angle(const segment::NuclearRotation& n, const SystemParams& p,
                                   const PulseOptions& opt) {
  const double eps = n.dd_interval > 0.0 ? dd_error(p.g, p.omega_n, n.dd_interval) : 0.0;
  return opt.dd_error_sign == DdErrorSign::Excess ? n.angle + eps : n.angle - eps;
}

// Map exp(L t) for Hamiltonian h plus an optional dephasing channel.
inline ComplexMatrix evolution_map(const ComplexMatrix& h, std::vector<ComplexMatrix> cs, double t) {
  if (t == 0.0) return linalg::identity(h.rows() * h.rows());
  return linalg::expm(build_liouvillian(h, cs).matrix, t);
}

// Noise acting on the electron for t us: Markovian dephasing or a static
// detuning `detuning` (rad/us) times S_z.
struct Noise {
  std::optional<double> t2_star;  // Markovian when set
  double detuning = 0.0;
};

inline ComplexMatrix segment_map(const PulseSegment& seg, const SystemParams& p,
                                 const PulseOptions& opt, const Noise& noise,
                                 std::optional<double> electron_angle_override) {
  const Operators o = build_operators(Variant::SingleNucleusSpin1);
  auto dephasing = [&]() {
    std::vector<ComplexMatrix> cs;
    if (noise.t2_star) cs.push_back(build_dephasing_op(p, *noise.t2_star));
    return cs;
  };
  return std::visit(
      [&](const auto& s) -> ComplexMatrix {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, segment::OpticalPump>) {
          return evolution_map(build_optical_hamiltonian(p), build_decay_ops(p), s.duration);
        } else if constexpr (std::is_same_v<T, segment::ElectronRotation>) {
          const double angle = electron_angle_override.value_or(s.angle);
          return unitary_superoperator(subspace_rotation(
              Party::Electron, {SubspaceLevel::Zero, SubspaceLevel::Dark}, angle, s.axis));
        } else if constexpr (std::is_same_v<T, segment::FreeEvolution> ||
                             std::is_same_v<T, segment::Idle>) {
          const ComplexMatrix h = build_hyperfine(p) + noise.detuning * o.sz;
          return evolution_map(h, dephasing(), s.duration);
        } else {
          const ComplexMatrix rot = unitary_superoperator(
              subspace_rotation(Party::Nucleus, {SubspaceLevel::Zero, SubspaceLevel::Dark},
                                actual_nuclear_angle(s, p, opt), s.axis));
          if (opt.dd_filters_t2 || (!noise.t2_star && noise.detuning == 0.0)) return rot;
          const ComplexMatrix h = noise.detuning * o.sz;
          return rot * evolution_map(h, dephasing(), s.duration);
        }
      },
      seg);
}

inline Noise markovian_noise(const SystemParams& p) {
  Noise n;
  if (p.t2_star && p.noise_model == NoiseModel::Markovian) n.t2_star = p.t2_star;
  return n;
}

inline void require_single_nucleus(const SystemParams& p) {
  if (p.variant != Variant::SingleNucleusSpin1) {
    throw ConfigError("the pulsed protocol is defined for the single-nucleus model");
  }
}

}  // namespace detail

/// Applies one segment to rho. With quasi-static noise this uses zero
/// detuning; run_sequence averages over sampled detunings.
inline ComplexMatrix apply_segment(const ComplexMatrix& rho, const PulseSegment& seg,
                                   const SystemParams& p, const PulseOptions& opt = {}) {
  p.validate();
  detail::require_single_nucleus(p);
  validate_segment(seg);
  if (rho.rows() != 12 || rho.cols() != 12) throw DimensionError("apply_segment: expected 12x12");
  const ComplexMatrix map = detail::segment_map(seg, p, opt, detail::markovian_noise(p), std::nullopt);
  return linalg::unvectorize(map * linalg::vectorize(rho), 12);
}

/// Static detunings (rad/us) drawn from N(0, sqrt2 / T2*), which gives the
/// Gaussian free-induction decay exp(-(t/T2*)^2).
inline std::vector<double> sample_detunings(double t2_star, int samples, std::uint64_t seed) {
  if (!(t2_star > 0.0)) throw ConfigError("t2_star must be > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0) / t2_star);
  std::vector<double> out(static_cast<std::size_t>(samples));
  for (auto& x : out) x = normal(rng);
  return out;
}

/// Runs `seq.cycles` cycles from rho0 and samples once per cycle. Sample 0
/// is the initial state at t = 0; sample k is taken at the readout point of
/// cycle k and timestamped with the elapsed wall-clock time (us).
inline Trajectory run_sequence(const ComplexMatrix& rho0, const PulseSequence& seq,
                               const SystemParams& p, const PulseOptions& opt = {},
                               bool keep_states = false) {
  p.validate();
  detail::require_single_nucleus(p);
  if (rho0.rows() != 12 || rho0.cols() != 12) throw DimensionError("run_sequence: expected 12x12");
  if (seq.segments.empty()) throw ConfigError("pulse sequence has no segments");
  for (const auto& s : seq.segments) validate_segment(s);
  const std::size_t readout =
      seq.readout_after.value_or(seq.segments.size() - 1);
  if (readout >= seq.segments.size()) throw ConfigError("readout index outside the cycle");

  std::optional<double> electron_angle;
  if (seq.correction_enabled) {
    const segment::NuclearRotation* nuclear = nullptr;
    for (const auto& s : seq.segments) {
      if (const auto* n = std::get_if<segment::NuclearRotation>(&s)) {
        if (nuclear) throw ConfigError("correction needs exactly one nuclear rotation per cycle");
        nuclear = n;
      }
    }
    if (!nuclear) throw ConfigError("correction needs a nuclear rotation in the cycle");
    electron_angle = detail::actual_nuclear_angle(*nuclear, p, opt);
  }

  double readout_time = 0.0;
  for (std::size_t i = 0; i <= readout; ++i) readout_time += wall_clock(seq.segments[i]);
  const double cycle_time = seq.cycle_duration();

  std::vector<detail::Noise> noises;
  if (p.t2_star && p.noise_model == NoiseModel::QuasiStatic) {
    for (double delta : sample_detunings(*p.t2_star, p.noise_samples, opt.seed)) {
      noises.push_back(detail::Noise{std::nullopt, delta});
    }
  } else {
    noises.push_back(detail::markovian_noise(p));
  }

  const Eigen::Index d = 12;
  std::vector<ComplexVector> sums(seq.cycles, ComplexVector::Zero(d * d));
  for (const auto& noise : noises) {
    // Cycle split at the readout point: before = segments[0..readout],
    // after = the remainder, applied at the start of the next cycle.
    ComplexMatrix before = linalg::identity(d * d);
    ComplexMatrix after = linalg::identity(d * d);
    for (std::size_t i = 0; i < seq.segments.size(); ++i) {
      const ComplexMatrix m = detail::segment_map(seq.segments[i], p, opt, noise, electron_angle);
      if (i <= readout) before = m * before; else after = m * after;
    }
    const ComplexMatrix between = before * after;
    ComplexVector v = linalg::vectorize(rho0);
    for (std::size_t c = 0; c < seq.cycles; ++c) {
      v = (c == 0 ? before : between) * v;
      sums[c] += v;
    }
  }

  Trajectory traj;
  detail::record(traj, 0.0, rho0, detail::target_single(), keep_states);
  const double weight = 1.0 / static_cast<double>(noises.size());
  for (std::size_t c = 0; c < seq.cycles; ++c) {
    const ComplexMatrix rho = linalg::unvectorize(sums[c] * weight, d);
    if (!linalg::all_finite(rho)) throw NumericalError("run_sequence: non-finite state");
    detail::record(traj, static_cast<double>(c) * cycle_time + readout_time, rho,
                   detail::target_single(), keep_states);
  }
  return traj;
}

inline double max_fidelity(const Trajectory& traj) {
  double best = 0.0;
  for (const auto& r : traj.records) best = std::max(best, r.fidelity);
  return best;
}

struct T2Point {
  double t2_star;
  double max_fidelity;
};

/// Maximal cycle fidelity for each T2* value.
inline std::vector<T2Point> t2star_sweep(const SystemParams& p, const PulseSequence& seq,
                                         const std::vector<double>& t2_values,
                                         const PulseOptions& opt = {}) {
  std::vector<T2Point> out;
  const ComplexMatrix rho0 = fully_mixed_ground(Variant::SingleNucleusSpin1);
  for (double t2 : t2_values) {
    if (!(t2 > 0.0)) throw ConfigError("T2* values must be > 0");
    SystemParams q = p;
    q.t2_star = t2;
    out.push_back({t2, max_fidelity(run_sequence(rho0, seq, q, opt))});
  }
  return out;
}

}  // namespace darksteady
