#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "darksteady/pulse.hpp"
#include "helpers.hpp"

using namespace darksteady;
using darksteady::testing::random_density;

namespace {

constexpr double kPi = std::numbers::pi;

SystemParams feasibility(double g = 2.5) {
  SystemParams p;
  p.e_plus = p.e_minus = 30.0;
  p.g = g;
  return p;
}

ComplexMatrix mixed() { return fully_mixed_ground(Variant::SingleNucleusSpin1); }

}  // namespace

TEST(DdError, ZeroTau) { EXPECT_EQ(dd_error(2.5, 0.05, 0.0), 0.0); }

TEST(DdError, FrozenValue) {
  // sin((2pi 2.5)^2 0.02 / sqrt((2pi 2.5)^2 + (2pi 0.05)^2)), 30-digit evaluation
  EXPECT_NEAR(dd_error(2.5, 0.05, 0.02), 0.308957255043102007882843500039, 1e-15);
}

TEST(DdError, VanishesForStrongNuclearDrive) {
  double prev = dd_error(2.5, 1.0, 0.01);
  for (double w : {10.0, 100.0, 1000.0, 10000.0}) {
    const double e = dd_error(2.5, w, 0.01);
    EXPECT_LT(e, prev);
    const double g = kTwoPi * 2.5;
    if (w >= 1000.0) {
      EXPECT_NEAR(e, std::sin(g * g * 0.01 / (kTwoPi * w)), 1e-4 * e);
    }
    prev = e;
  }
}

TEST(DdError, Domain) {
  EXPECT_THROW(dd_error(0.0, 0.0, 0.1), DomainError);
  EXPECT_THROW(dd_error(1.0, 1.0, -0.1), DomainError);
}

TEST(Rotation, ZeroIsIdentityAndTwoPiIsMinusOne) {
  const ComplexMatrix id = subspace_rotation(Party::Electron, {SubspaceLevel::Zero, SubspaceLevel::Dark}, 0.0,
                                             RotationAxis::Y);
  EXPECT_LT(linalg::max_abs(id - linalg::identity(12)), 1e-15);
  const ComplexMatrix u = subspace_rotation(Party::Electron, {SubspaceLevel::Zero, SubspaceLevel::Dark},
                                            2 * kPi, RotationAxis::X);
  const ComplexVector z = linalg::kron(ops::basis(4, 2), ops::basis(3, 0));
  EXPECT_LT((u * z + z).norm(), 1e-15);
  std::mt19937_64 rng(8);
  const ComplexMatrix rho = random_density(12, rng);
  const ComplexMatrix rotated = u * rho * u.adjoint();
  // populations in the rotation's own basis {+1 -> B, -1 -> D, 0, A1}
  ComplexMatrix w = ComplexMatrix::Zero(4, 4);
  w.col(0) = ops::bright_triplet(4);
  w.col(1) = ops::dark_triplet(4);
  w.col(2) = ops::basis(4, 2);
  w.col(3) = ops::basis(4, 3);
  const ComplexMatrix change = linalg::kron(w, linalg::identity(3));
  const ComplexMatrix before = change.adjoint() * rho * change;
  const ComplexMatrix after = change.adjoint() * rotated * change;
  for (Eigen::Index i = 0; i < 12; ++i) EXPECT_NEAR(std::abs(after(i, i) - before(i, i)), 0.0, 1e-14);
}

TEST(Rotation, PiSwapsZeroAndDark) {
  const ComplexMatrix u = subspace_rotation(Party::Electron, {SubspaceLevel::Zero, SubspaceLevel::Dark}, kPi,
                                            RotationAxis::X);
  const ComplexVector n0 = ops::basis(3, 2);
  const ComplexVector out = u * linalg::kron(ops::basis(4, 2), n0);
  const ComplexVector dark = linalg::kron(ops::dark_triplet(4), n0);
  const Complex amp = dark.dot(out);
  EXPECT_NEAR(std::abs(amp), 1.0, 1e-15);
  EXPECT_NEAR(amp.imag(), -1.0, 1e-15);
}

TEST(Rotation, UnitaryAndInverse) {
  for (auto axis : {RotationAxis::X, RotationAxis::Y}) {
    const ComplexMatrix u =
        subspace_rotation(Party::Nucleus, {SubspaceLevel::Zero, SubspaceLevel::Dark}, 0.731, axis);
    const ComplexMatrix v =
        subspace_rotation(Party::Nucleus, {SubspaceLevel::Zero, SubspaceLevel::Dark}, -0.731, axis);
    EXPECT_LT(linalg::max_abs(u * u.adjoint() - linalg::identity(12)), 1e-15);
    EXPECT_LT(linalg::max_abs(u * v - linalg::identity(12)), 1e-12);
  }
}

TEST(Rotation, InvalidLevels) {
  EXPECT_THROW(subspace_rotation(Party::Nucleus, {SubspaceLevel::Zero, SubspaceLevel::A1}, 1.0, RotationAxis::Y),
               ConfigError);
  EXPECT_THROW(subspace_rotation(Party::Electron, {SubspaceLevel::Dark, SubspaceLevel::Dark}, 1.0, RotationAxis::Y),
               ConfigError);
  EXPECT_THROW(subspace_rotation(Party::Electron, {SubspaceLevel::Plus, SubspaceLevel::Dark}, 1.0, RotationAxis::Y),
               ConfigError);
}

TEST(Segments, Validation) {
  EXPECT_THROW(validate_segment(segment::FreeEvolution{-1.0}), ConfigError);
  EXPECT_THROW(validate_segment(segment::NuclearRotation{kPi / 2, RotationAxis::Y, -0.1, 10.0}), ConfigError);
  EXPECT_THROW(validate_segment(segment::ElectronRotation{std::nan(""), RotationAxis::Y, 0.01}), ConfigError);
}

TEST(Segments, StandardCycleShape) {
  const SystemParams p = feasibility(2.0);
  const PulseSequence seq = standard_sequence(p, PulseTiming{}, 10, false);
  EXPECT_TRUE(is_standard_cycle(seq));
  const auto& free = std::get<segment::FreeEvolution>(seq.segments[2]);
  EXPECT_NEAR(free.duration * kTwoPi * p.g, kPi / 2, 1e-15);
  EXPECT_NEAR(seq.cycle_duration(), 0.1 + 0.01 + 0.125 + 10.0, 1e-12);
}

TEST(Segments, PumpLeavesDarkStateAlone) {
  const SystemParams p = feasibility();
  const ComplexMatrix rho = linalg::projector(target_states(p.variant).target);
  const ComplexMatrix out = apply_segment(rho, segment::OpticalPump{0.1}, p);
  EXPECT_LT(linalg::max_abs(out - rho), 1e-12);
}

TEST(Segments, LongPumpDrainsExcitedState) {
  const SystemParams p = feasibility();
  const ComplexMatrix rho = linalg::kron(linalg::projector(ops::bright_triplet(4)), ops::outer(3, 2, 2));
  const ComplexMatrix out = apply_segment(rho, segment::OpticalPump{5.0}, p);
  double a1 = 0.0;
  for (int n = 0; n < 3; ++n) a1 += out(9 + n, 9 + n).real();
  EXPECT_LT(a1, 1e-6);
}

TEST(Segments, ExactNuclearRotation) {
  const SystemParams p = feasibility();
  std::mt19937_64 rng(12);
  const ComplexMatrix rho = random_density(12, rng);
  const ComplexMatrix u =
      subspace_rotation(Party::Nucleus, {SubspaceLevel::Zero, SubspaceLevel::Dark}, kPi / 2, RotationAxis::Y);
  const ComplexMatrix out = apply_segment(rho, segment::NuclearRotation{kPi / 2, RotationAxis::Y, 0.0, 10.0}, p);
  EXPECT_LT(linalg::max_abs(out - u * rho * u.adjoint()), 1e-13);
}

TEST(Segments, MapsAreCptp) {
  SystemParams p = feasibility();
  p.t2_star = 2.0;
  std::mt19937_64 rng(21);
  PulseOptions opt;
  opt.dd_filters_t2 = false;
  const std::vector<PulseSegment> segs{segment::OpticalPump{0.1}, segment::ElectronRotation{},
                                       segment::FreeEvolution{0.1},
                                       segment::NuclearRotation{kPi / 2, RotationAxis::Y, 0.01, 10.0},
                                       segment::Idle{1.0}};
  for (const auto& s : segs) {
    for (int k = 0; k < 20; ++k) {
      const ComplexMatrix out = apply_segment(random_density(12, rng), s, p, opt);
      EXPECT_LE(std::abs(out.trace() - Complex(1.0, 0.0)), 1e-8);
      EXPECT_GE(linalg::min_eigenvalue_hermitian(out), -1e-8);
    }
  }
}

TEST(Sequence, ZeroCyclesHasOnlyInitialSample) {
  const SystemParams p = feasibility();
  const Trajectory t = run_sequence(mixed(), standard_sequence(p, PulseTiming{}, 0, false), p);
  EXPECT_EQ(t.size(), 1u);
  EXPECT_NEAR(t.records[0].fidelity, 1.0 / 9.0, 1e-15);
}

TEST(Sequence, NoiselessPlateauMatchesContinuousDrive) {
  const SystemParams p = feasibility();
  const Trajectory t = run_sequence(mixed(), standard_sequence(p, PulseTiming{}, 200, false), p);
  EXPECT_GE(t.back().fidelity, 0.97);
  const SteadyState ss = steady_state(build_liouvillian(build_hamiltonian(p), build_collapse_ops(p)));
  EXPECT_NEAR(t.back().fidelity, fidelity(ss.rho, target_states(p.variant).target), 0.02);
}

TEST(Sequence, CorrectionOrdering) {
  const SystemParams p = feasibility();
  PulseTiming timing;
  timing.tau = 0.005;
  const auto exact = run_sequence(mixed(), standard_sequence(p, PulseTiming{}, 200, false), p);
  const auto bad = run_sequence(mixed(), standard_sequence(p, timing, 200, false), p);
  const auto fixed = run_sequence(mixed(), standard_sequence(p, timing, 200, true), p);
  EXPECT_LT(bad.back().fidelity, exact.back().fidelity);
  EXPECT_LE(std::abs(fixed.back().fidelity - exact.back().fidelity), 0.02);
  for (std::size_t i = 0; i < bad.size(); ++i) EXPECT_GE(fixed.records[i].fidelity, bad.records[i].fidelity - 1e-12);
}

TEST(Sequence, T2MonotoneAndLimit) {
  const SystemParams p = feasibility(2.0);
  const PulseSequence seq = standard_sequence(p, PulseTiming{}, 200, false);
  const auto pts = t2star_sweep(p, seq, {1, 5, 10, 50, 100, 1e9});
  for (std::size_t i = 1; i < pts.size(); ++i) EXPECT_GE(pts[i].max_fidelity, pts[i - 1].max_fidelity);
  const double clean = max_fidelity(run_sequence(mixed(), seq, p));
  EXPECT_NEAR(pts.back().max_fidelity, clean, 1e-6);
  EXPECT_NEAR(pts[2].max_fidelity, 0.95, 0.03);
}

TEST(Sequence, QuasiStaticIsSeededAndDeterministic) {
  SystemParams p = feasibility(2.0);
  p.t2_star = 10.0;
  p.noise_model = NoiseModel::QuasiStatic;
  p.noise_samples = 8;
  const PulseSequence seq = standard_sequence(p, PulseTiming{}, 20, false);
  PulseOptions a, b;
  a.seed = b.seed = 17;
  const auto ta = run_sequence(mixed(), seq, p, a);
  const auto tb = run_sequence(mixed(), seq, p, b);
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(ta.records[i].fidelity, tb.records[i].fidelity);
  b.seed = 18;
  EXPECT_NE(run_sequence(mixed(), seq, p, b).back().fidelity, ta.back().fidelity);
}

TEST(Sequence, DetuningSpread) {
  const auto d = sample_detunings(10.0, 20000, 5);
  double s2 = 0.0;
  for (double x : d) s2 += x * x;
  EXPECT_NEAR(std::sqrt(s2 / static_cast<double>(d.size())), std::sqrt(2.0) / 10.0, 0.01 * std::sqrt(2.0) / 10.0 * 3);
}

TEST(Sequence, RejectsTwoNuclei) {
  SystemParams p;
  p.variant = Variant::TwoNucleiSpinHalf;
  EXPECT_THROW(run_sequence(mixed(), standard_sequence(feasibility(), PulseTiming{}, 1, false), p), ConfigError);
}
