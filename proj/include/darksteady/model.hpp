#pragma once

// Electron-nuclear spin model of a single NV centre: Hilbert-space layout,
// spin and optical operators, the driven Hamiltonian, decay/dephasing
// collapse operators and the dark target states.
//
// Basis ordering (all golden outputs depend on it): the electron index varies
// slowest. Electron levels are ordered (+1, -1, 0, A1); a spin-1 nucleus is
// ordered (+1, -1, 0); a spin-1/2 nucleus is ordered (0, 1).
//
// Units: user-facing frequencies and rates are in MHz and times in us.
// Internally every frequency f becomes 2*pi*f rad/us; the dephasing rate is
// 1/T2* (us^-1) without the 2*pi factor.

#include <cmath>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "darksteady/errors.hpp"
#include "darksteady/linalg.hpp"

namespace darksteady {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum class Variant { SingleNucleusSpin1, TwoNucleiSpinHalf };

enum class ElectronLevel : int { Plus = 0, Minus = 1, Zero = 2, A1 = 3 };
enum class NuclearLevel : int { Plus = 0, Minus = 1, Zero = 2 };

/// Relative sign of the two optical couplings. Antisymmetric (E_- -> -E_-)
/// leaves (|+1> + |-1>)/sqrt2 optically dark.
enum class OpticalSign { Antisymmetric, Symmetric };

/// Phase of the electron microwave drive. Auto picks x for the spin-1 nucleus
/// model and y for the two-nuclei model, where the y phase is what makes the
/// two-nuclei dark state (with its relative phase i) stationary.
enum class DriveAxis { Auto, X, Y };

/// How a finite T2* enters: Markovian S_z dephasing or seeded quasi-static
/// Gaussian detunings averaged over samples.
enum class NoiseModel { Markovian, QuasiStatic };

struct SystemParams {
  double omega_e = 1.0;
  double omega_n = 1.0;
  double g = 2.5;
  double e_plus = 10.0;
  double e_minus = 10.0;
  double gamma_plus = 30.0;
  double gamma_minus = 30.0;
  double gamma_zero = 40.0;
  std::optional<double> t2_star;
  Variant variant = Variant::SingleNucleusSpin1;
  std::vector<double> asymmetry;  // per-nucleus drive weights; empty means all 1
  bool asymmetry_hyperfine = false;
  OpticalSign optical_sign = OpticalSign::Antisymmetric;
  DriveAxis electron_drive_axis = DriveAxis::Auto;
  NoiseModel noise_model = NoiseModel::Markovian;
  int noise_samples = 64;

  std::size_t nucleus_count() const {
    return variant == Variant::SingleNucleusSpin1 ? 1 : 2;
  }
  std::size_t dimension() const {
    return variant == Variant::SingleNucleusSpin1 ? 12 : 16;
  }

  void validate() const {
    const std::pair<const char*, double> rates[] = {
        {"omega_e", omega_e},       {"omega_n", omega_n},         {"g", g},
        {"e_plus", e_plus},         {"e_minus", e_minus},         {"gamma_plus", gamma_plus},
        {"gamma_minus", gamma_minus}, {"gamma_zero", gamma_zero}};
    for (const auto& [name, value] : rates) {
      if (!std::isfinite(value) || value < 0.0) {
        throw ConfigError(std::string(name) + " must be finite and >= 0");
      }
    }
    if (t2_star && !(std::isfinite(*t2_star) && *t2_star > 0.0)) {
      throw ConfigError("t2_star must be > 0");
    }
    if (!asymmetry.empty()) {
      if (variant != Variant::TwoNucleiSpinHalf) {
        throw ConfigError("asymmetry requires the two-nuclei variant");
      }
      if (asymmetry.size() != nucleus_count()) {
        throw ConfigError("asymmetry needs one factor per nucleus");
      }
      double sum = 0.0;
      for (double f : asymmetry) {
        if (!std::isfinite(f) || f < 0.0) throw ConfigError("asymmetry factors must be >= 0");
        sum += f;
      }
      if (sum <= 0.0) throw ConfigError("asymmetry factors must not all be zero");
    }
    if (noise_samples < 1) throw ConfigError("noise_samples must be >= 1");
  }
};

inline SpaceLayout layout_for(Variant variant) {
  return variant == Variant::SingleNucleusSpin1 ? SpaceLayout{{4, 3}} : SpaceLayout{{4, 2, 2}};
}

// ---------------------------------------------------------------------------
// Single-party operators

namespace ops {

inline ComplexVector basis(Eigen::Index dim, Eigen::Index i) {
  ComplexVector v = ComplexVector::Zero(dim);
  v(i) = 1.0;
  return v;
}

inline ComplexMatrix outer(Eigen::Index dim, Eigen::Index i, Eigen::Index j) {
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  m(i, j) = 1.0;
  return m;
}

inline ComplexMatrix hermitian_part_plus_adjoint(const ComplexMatrix& m) {
  return m + m.adjoint();
}

/// S_x = |0><+1| + |0><-1| + h.c. on the 4-level electron (A1 untouched).
inline ComplexMatrix electron_sx() {
  return hermitian_part_plus_adjoint(outer(4, 2, 0) + outer(4, 2, 1));
}

/// y-phased partner of S_x: -i(|0><+1| + |0><-1|) + h.c.
inline ComplexMatrix electron_sy() {
  return hermitian_part_plus_adjoint(-kI * (outer(4, 2, 0) + outer(4, 2, 1)));
}

inline ComplexMatrix electron_sz() { return outer(4, 0, 0) - outer(4, 1, 1); }

inline ComplexMatrix spin1_ix() {
  return hermitian_part_plus_adjoint(outer(3, 2, 0) + outer(3, 2, 1));
}

inline ComplexMatrix spin1_iz() { return outer(3, 0, 0) - outer(3, 1, 1); }

inline ComplexMatrix spin_half_ix() { return hermitian_part_plus_adjoint(outer(2, 0, 1)); }

inline ComplexMatrix spin_half_iz() { return outer(2, 1, 1) - outer(2, 0, 0); }

/// |k><A1| on the electron.
inline ComplexMatrix electron_lowering(ElectronLevel k) {
  return outer(4, static_cast<int>(k), static_cast<int>(ElectronLevel::A1));
}

inline ComplexVector dark_triplet(Eigen::Index dim) {
  return (basis(dim, 0) + basis(dim, 1)) / std::sqrt(2.0);
}

inline ComplexVector bright_triplet(Eigen::Index dim) {
  return (basis(dim, 0) - basis(dim, 1)) / std::sqrt(2.0);
}

}  // namespace ops

/// Full-space operators for a model variant.
struct Operators {
  SpaceLayout layout;
  ComplexMatrix sx, sy, sz;
  std::vector<ComplexMatrix> ix, iz;  // one per nucleus
  ComplexMatrix raise_plus;           // |A1><+1|
  ComplexMatrix raise_minus;          // |A1><-1|
  std::vector<ComplexMatrix> lowering;  // |+1><A1|, |-1><A1|, |0><A1|
  ComplexMatrix excited_projector;    // |A1><A1| (x) I
  ComplexMatrix ground_projector;
  ComplexMatrix nuclear_swap;         // exchange of the two nuclei; empty for one nucleus
};

inline Operators build_operators(Variant variant) {
  Operators o;
  o.layout = layout_for(variant);
  const auto e = [&](const ComplexMatrix& m) { return linalg::embed(m, o.layout, 0); };
  o.sx = e(ops::electron_sx());
  o.sy = e(ops::electron_sy());
  o.sz = e(ops::electron_sz());
  if (variant == Variant::SingleNucleusSpin1) {
    o.ix.push_back(linalg::embed(ops::spin1_ix(), o.layout, 1));
    o.iz.push_back(linalg::embed(ops::spin1_iz(), o.layout, 1));
  } else {
    for (std::size_t k = 1; k <= 2; ++k) {
      o.ix.push_back(linalg::embed(ops::spin_half_ix(), o.layout, k));
      o.iz.push_back(linalg::embed(ops::spin_half_iz(), o.layout, k));
    }
    ComplexMatrix swap2 = ComplexMatrix::Zero(4, 4);
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) swap2(b * 2 + a, a * 2 + b) = 1.0;
    }
    o.nuclear_swap = linalg::kron(linalg::identity(4), swap2);
  }
  o.raise_plus = e(ops::electron_lowering(ElectronLevel::Plus).adjoint());
  o.raise_minus = e(ops::electron_lowering(ElectronLevel::Minus).adjoint());
  for (auto k : {ElectronLevel::Plus, ElectronLevel::Minus, ElectronLevel::Zero}) {
    o.lowering.push_back(e(ops::electron_lowering(k)));
  }
  o.excited_projector = e(ops::outer(4, 3, 3));
  o.ground_projector = linalg::identity(o.excited_projector.rows()) - o.excited_projector;
  return o;
}

/// Per-nucleus drive and hyperfine weights after applying the asymmetry.
struct NucleusCouplings {
  std::vector<double> drive;
  std::vector<double> hyperfine;
};

/// Asymmetry weights are normalized to unit mean, so the collective
/// (exchange-symmetric) drive keeps amplitude omega_n and only the
/// antisymmetric part changes.
inline NucleusCouplings apply_asymmetry(const SystemParams& p) {
  const std::size_t n = p.nucleus_count();
  NucleusCouplings c{std::vector<double>(n, 1.0), std::vector<double>(n, 1.0)};
  if (p.asymmetry.empty()) return c;
  if (p.variant != Variant::TwoNucleiSpinHalf) {
    throw ConfigError("asymmetry requires the two-nuclei variant");
  }
  if (p.asymmetry.size() != n) {
    throw ConfigError("asymmetry has " + std::to_string(p.asymmetry.size()) +
                      " factors for " + std::to_string(n) + " nuclei");
  }
  double mean = 0.0;
  for (double f : p.asymmetry) mean += f;
  mean /= static_cast<double>(n);
  if (mean <= 0.0) throw ConfigError("asymmetry factors must not all be zero");
  for (std::size_t k = 0; k < n; ++k) {
    c.drive[k] = p.asymmetry[k] / mean;
    if (p.asymmetry_hyperfine) c.hyperfine[k] = c.drive[k];
  }
  return c;
}

inline DriveAxis resolved_drive_axis(const SystemParams& p) {
  if (p.electron_drive_axis != DriveAxis::Auto) return p.electron_drive_axis;
  return p.variant == Variant::SingleNucleusSpin1 ? DriveAxis::X : DriveAxis::Y;
}

/// Optical coupling E_+|+1><A1| + E_-|-1><A1| + h.c. in MHz (no 2*pi).
inline ComplexMatrix optical_term(const Operators& o, const SystemParams& p) {
  const double sign = p.optical_sign == OpticalSign::Antisymmetric ? -1.0 : 1.0;
  const ComplexMatrix down = p.e_plus * o.raise_plus.adjoint() + sign * p.e_minus * o.raise_minus.adjoint();
  return down + down.adjoint();
}

/// Hamiltonian in rad/us:
///   2pi [ Omega_e S + Omega_n I_x + g S_z I_z + optical ]  (spin-1 nucleus)
///   2pi [ Omega_e S + Omega_n/sqrt2 sum_k w_k I_x^k + g S_z sum_k h_k I_z^k + optical ]
/// where S is S_x or S_y per the drive axis. The 1/sqrt2 makes the
/// symmetric two-nucleus transition match the spin-1 matrix element, so
/// Omega_e = Omega_n is the darkness condition in both variants.
inline ComplexMatrix build_hamiltonian(const SystemParams& p) {
  p.validate();
  const Operators o = build_operators(p.variant);
  const NucleusCouplings c = apply_asymmetry(p);
  const ComplexMatrix& s = resolved_drive_axis(p) == DriveAxis::X ? o.sx : o.sy;

  ComplexMatrix h = p.omega_e * s + optical_term(o, p);
  const double nuclear_scale =
      p.variant == Variant::SingleNucleusSpin1 ? 1.0 : 1.0 / std::sqrt(2.0);
  for (std::size_t k = 0; k < o.ix.size(); ++k) {
    h += p.omega_n * nuclear_scale * c.drive[k] * o.ix[k];
    h += p.g * c.hyperfine[k] * (o.sz * o.iz[k]);
  }
  return kTwoPi * h;
}

/// Hyperfine coupling alone, g S_z sum I_z (rad/us).
inline ComplexMatrix build_hyperfine(const SystemParams& p) {
  const Operators o = build_operators(p.variant);
  const NucleusCouplings c = apply_asymmetry(p);
  ComplexMatrix h = ComplexMatrix::Zero(o.sz.rows(), o.sz.cols());
  for (std::size_t k = 0; k < o.iz.size(); ++k) h += p.g * c.hyperfine[k] * (o.sz * o.iz[k]);
  return kTwoPi * h;
}

/// Optical coupling alone (rad/us).
inline ComplexMatrix build_optical_hamiltonian(const SystemParams& p) {
  return kTwoPi * optical_term(build_operators(p.variant), p);
}

/// Spontaneous decay C_k = sqrt(2pi gamma_k) |k><A1| for k = +1, -1, 0.
inline std::vector<ComplexMatrix> build_decay_ops(const SystemParams& p) {
  const Operators o = build_operators(p.variant);
  const double rates[] = {p.gamma_plus, p.gamma_minus, p.gamma_zero};
  std::vector<ComplexMatrix> out;
  for (std::size_t k = 0; k < 3; ++k) out.push_back(std::sqrt(kTwoPi * rates[k]) * o.lowering[k]);
  return out;
}

/// sqrt(Gamma_phi / 2) S_z with Gamma_phi = 1/T2*.
inline ComplexMatrix build_dephasing_op(const SystemParams& p, double t2_star) {
  if (!(t2_star > 0.0)) throw ConfigError("t2_star must be > 0");
  return std::sqrt(0.5 / t2_star) * build_operators(p.variant).sz;
}

/// Decay operators plus Markovian dephasing when T2* is set.
inline std::vector<ComplexMatrix> build_collapse_ops(const SystemParams& p) {
  p.validate();
  auto out = build_decay_ops(p);
  if (p.t2_star && p.noise_model == NoiseModel::Markovian) {
    out.push_back(build_dephasing_op(p, *p.t2_star));
  }
  return out;
}

struct TargetStates {
  ComplexVector target;  // dark entangled state in the full space
  ComplexVector dark_e, bright_e;  // electron (4 levels)
  ComplexVector dark_n, bright_n;  // spin-1 nucleus; empty for the two-nuclei variant
  ComplexVector nuclear_singlet;   // (|10> - |01>)/sqrt2; empty for one nucleus
};

inline std::size_t basis_index(ElectronLevel e, NuclearLevel n) {
  return static_cast<std::size_t>(e) * 3 + static_cast<std::size_t>(n);
}

inline std::size_t basis_index(ElectronLevel e, int n1, int n2) {
  return static_cast<std::size_t>(e) * 4 + static_cast<std::size_t>(n1 * 2 + n2);
}

/// Dark target states:
///   spin-1:     (|D>_e|0>_n - |0>_e|D>_n)/sqrt2
///   two nuclei: (|D>_e(|10>+|01>) + i|0>_e(|11>+|00>))/2
inline TargetStates target_states(Variant variant) {
  TargetStates t;
  t.dark_e = ops::dark_triplet(4);
  t.bright_e = ops::bright_triplet(4);
  const ComplexVector zero_e = ops::basis(4, static_cast<int>(ElectronLevel::Zero));
  if (variant == Variant::SingleNucleusSpin1) {
    t.dark_n = ops::dark_triplet(3);
    t.bright_n = ops::bright_triplet(3);
    const ComplexVector zero_n = ops::basis(3, static_cast<int>(NuclearLevel::Zero));
    t.target = (linalg::kron(t.dark_e, zero_n) - linalg::kron(zero_e, t.dark_n)) / std::sqrt(2.0);
  } else {
    auto pair = [](int a, int b) { return ops::basis(4, a * 2 + b); };
    t.nuclear_singlet = (pair(1, 0) - pair(0, 1)) / std::sqrt(2.0);
    t.target = 0.5 * (linalg::kron(t.dark_e, ComplexVector(pair(1, 0) + pair(0, 1))) +
                      kI * linalg::kron(zero_e, ComplexVector(pair(1, 1) + pair(0, 0))));
  }
  return t;
}

/// Uniform mixture over all electron ground levels and nuclear levels.
inline ComplexMatrix fully_mixed_ground(Variant variant) {
  const Operators o = build_operators(variant);
  const double ground = static_cast<double>(o.ground_projector.trace().real());
  return o.ground_projector / ground;
}

/// Population of the nuclear singlet after tracing out the electron.
inline double nuclear_singlet_population(const ComplexMatrix& rho) {
  if (rho.rows() != 16) throw DimensionError("singlet population needs the two-nuclei space");
  const ComplexMatrix nuclear = linalg::partial_trace(rho, layout_for(Variant::TwoNucleiSpinHalf), {1, 2});
  const ComplexVector s = target_states(Variant::TwoNucleiSpinHalf).nuclear_singlet;
  return (s.adjoint() * nuclear * s)(0, 0).real();
}

/// Diagonal populations of rho, one per basis state.
inline std::vector<double> level_populations(const ComplexMatrix& rho) {
  std::vector<double> out(static_cast<std::size_t>(rho.rows()));
  for (Eigen::Index i = 0; i < rho.rows(); ++i) out[static_cast<std::size_t>(i)] = rho(i, i).real();
  return out;
}

/// Short label of each basis state, e.g. "+1,0" or "A1,01".
inline std::vector<std::string> basis_labels(Variant variant) {
  const char* elec[] = {"+1", "-1", "0", "A1"};
  std::vector<std::string> out;
  for (const char* e : elec) {
    if (variant == Variant::SingleNucleusSpin1) {
      for (const char* n : {"+1", "-1", "0"}) out.push_back(std::string(e) + "|" + n);
    } else {
      for (const char* n : {"00", "01", "10", "11"}) out.push_back(std::string(e) + "|" + n);
    }
  }
  return out;
}

}  // namespace darksteady
