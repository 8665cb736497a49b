#pragma once

// Dense complex linear algebra used by the model, engine and pulse simulator.
//
// Conventions:
//  * tensor products order factors left to right, the first factor varies
//    slowest in the flattened index;
//  * vectorization is column stacking, so vec(A X B) = (B^T kron A) vec(X).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "darksteady/errors.hpp"

namespace darksteady {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

/// Ordered subsystem dimensions of a tensor-product Hilbert space.
struct SpaceLayout {
  std::vector<std::size_t> factor_dims;

  std::size_t total() const {
    return std::accumulate(factor_dims.begin(), factor_dims.end(), std::size_t{1},
                           std::multiplies<>());
  }
  std::size_t factor_count() const { return factor_dims.size(); }

  friend bool operator==(const SpaceLayout&, const SpaceLayout&) = default;
};

namespace linalg {

inline void require_square(const ComplexMatrix& a, const char* who) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(who) + ": expected a square matrix, got " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
}

inline bool all_finite(const ComplexMatrix& a) {
  return a.allFinite();
}

inline ComplexMatrix identity(Eigen::Index dim) {
  return ComplexMatrix::Identity(dim, dim);
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_square(a, "kron");
  require_square(b, "kron");
  const Eigen::Index na = a.rows();
  const Eigen::Index nb = b.rows();
  ComplexMatrix out(na * nb, na * nb);
  for (Eigen::Index i = 0; i < na; ++i) {
    for (Eigen::Index j = 0; j < na; ++j) {
      out.block(i * nb, j * nb, nb, nb) = a(i, j) * b;
    }
  }
  return out;
}

/// Kronecker product of a list of square factors, left to right.
inline ComplexMatrix kron_all(const std::vector<ComplexMatrix>& factors) {
  if (factors.empty()) throw DimensionError("kron_all: no factors");
  ComplexMatrix out = factors.front();
  for (std::size_t k = 1; k < factors.size(); ++k) out = kron(out, factors[k]);
  return out;
}

inline ComplexVector kron(const ComplexVector& a, const ComplexVector& b) {
  ComplexVector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

/// Embeds `op` acting on subsystem `site` into the full space of `layout`.
inline ComplexMatrix embed(const ComplexMatrix& op, const SpaceLayout& layout, std::size_t site) {
  require_square(op, "embed");
  if (site >= layout.factor_count() ||
      static_cast<std::size_t>(op.rows()) != layout.factor_dims[site]) {
    throw DimensionError("embed: operator does not match subsystem " + std::to_string(site));
  }
  std::vector<ComplexMatrix> factors;
  for (std::size_t k = 0; k < layout.factor_count(); ++k) {
    factors.push_back(k == site ? op : identity(static_cast<Eigen::Index>(layout.factor_dims[k])));
  }
  return kron_all(factors);
}

inline double one_norm(const ComplexMatrix& a) {
  return a.cwiseAbs().colwise().sum().maxCoeff();
}

inline double max_abs(const ComplexMatrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

inline double hermiticity_deviation(const ComplexMatrix& a) {
  return max_abs(a - a.adjoint());
}

namespace detail {

// Pade(13) coefficients for scaling-and-squaring (Higham 2005).
inline constexpr std::array<double, 14> kPade13{
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};
inline constexpr double kTheta13 = 5.371920351148152;

}  // namespace detail

/// exp(s * a) by scaling and squaring with a degree-13 Pade approximant.
inline ComplexMatrix expm(const ComplexMatrix& a, double s = 1.0) {
  require_square(a, "expm");
  if (!std::isfinite(s)) throw NumericalError("expm: non-finite scale");
  const Eigen::Index n = a.rows();
  ComplexMatrix x = s * a;
  if (!all_finite(x)) throw NumericalError("expm: non-finite input");
  const double norm = one_norm(x);
  if (norm == 0.0) return identity(n);

  int squarings = 0;
  if (norm > detail::kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / detail::kTheta13)));
  }
  if (squarings > 1023) throw NumericalError("expm: norm too large to scale");
  x /= std::ldexp(1.0, squarings);

  const auto& b = detail::kPade13;
  const ComplexMatrix id = identity(n);
  const ComplexMatrix x2 = x * x;
  const ComplexMatrix x4 = x2 * x2;
  const ComplexMatrix x6 = x4 * x2;
  const ComplexMatrix u_inner = x6 * (b[13] * x6 + b[11] * x4 + b[9] * x2);
  const ComplexMatrix u =
      x * (u_inner + b[7] * x6 + b[5] * x4 + b[3] * x2 + b[1] * id);
  const ComplexMatrix v = x6 * (b[12] * x6 + b[10] * x4 + b[8] * x2) + b[6] * x6 + b[4] * x4 +
                          b[2] * x2 + b[0] * id;
  ComplexMatrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  if (!all_finite(r)) throw NumericalError("expm: overflow while squaring");
  return r;
}

struct EigenDecomposition {
  ComplexVector values;
  ComplexMatrix vectors;  // column k pairs with values(k); unit 2-norm
};

/// All eigenpairs of a general complex matrix, residual-checked.
inline EigenDecomposition eig_full(const ComplexMatrix& a) {
  require_square(a, "eig_full");
  if (a.rows() > 512) throw DimensionError("eig_full: dimension above 512");
  Eigen::ComplexEigenSolver<ComplexMatrix> solver(a, true);
  if (solver.info() != Eigen::Success) throw NumericalError("eig_full: no convergence");
  EigenDecomposition out{solver.eigenvalues(), solver.eigenvectors()};
  const double scale = std::max(a.norm(), 1e-300);
  for (Eigen::Index k = 0; k < a.rows(); ++k) {
    out.vectors.col(k).normalize();
    const double res = (a * out.vectors.col(k) - out.values(k) * out.vectors.col(k)).norm();
    if (!(res <= 1e-8 * scale)) {
      throw NumericalError("eig_full: residual " + std::to_string(res) + " exceeds tolerance");
    }
  }
  return out;
}

/// Smallest eigenvalue of a Hermitian matrix (the Hermitian part is used).
inline double min_eigenvalue_hermitian(const ComplexMatrix& a) {
  require_square(a, "min_eigenvalue_hermitian");
  const ComplexMatrix h = 0.5 * (a + a.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

/// Column stacking.
inline ComplexVector vectorize(const ComplexMatrix& rho) {
  ComplexVector v(rho.size());
  const Eigen::Index r = rho.rows();
  for (Eigen::Index j = 0; j < rho.cols(); ++j) v.segment(j * r, r) = rho.col(j);
  return v;
}

inline ComplexMatrix unvectorize(const ComplexVector& v, Eigen::Index dim) {
  if (dim < 0 || v.size() != dim * dim) {
    throw DimensionError("unvectorize: length " + std::to_string(v.size()) +
                         " is not dim^2 for dim " + std::to_string(dim));
  }
  ComplexMatrix m(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) m.col(j) = v.segment(j * dim, dim);
  return m;
}

/// Reduced matrix over the subsystems in `keep` (kept in layout order).
inline ComplexMatrix partial_trace(const ComplexMatrix& rho, const SpaceLayout& layout,
                                   const std::set<std::size_t>& keep) {
  require_square(rho, "partial_trace");
  const std::size_t n = layout.factor_count();
  if (n == 0 || static_cast<std::size_t>(rho.rows()) != layout.total()) {
    throw DimensionError("partial_trace: matrix dimension does not match layout");
  }
  for (std::size_t k : keep) {
    if (k >= n) throw DimensionError("partial_trace: subsystem index out of range");
  }

  // Strides of each factor in the full row-major multi-index.
  std::vector<std::size_t> stride(n, 1);
  for (std::size_t k = n - 1; k-- > 0;) stride[k] = stride[k + 1] * layout.factor_dims[k + 1];

  std::vector<std::size_t> kept, traced;
  for (std::size_t k = 0; k < n; ++k) (keep.count(k) ? kept : traced).push_back(k);

  auto product = [&](const std::vector<std::size_t>& sites) {
    std::size_t p = 1;
    for (std::size_t k : sites) p *= layout.factor_dims[k];
    return p;
  };
  const std::size_t dk = product(kept);
  const std::size_t dt = product(traced);

  // Offset in the full index of the i-th multi-index over `sites`.
  auto offset = [&](const std::vector<std::size_t>& sites, std::size_t i) {
    std::size_t off = 0;
    for (std::size_t k = sites.size(); k-- > 0;) {
      const std::size_t d = layout.factor_dims[sites[k]];
      off += (i % d) * stride[sites[k]];
      i /= d;
    }
    return off;
  };

  std::vector<std::size_t> kept_off(dk), traced_off(dt);
  for (std::size_t i = 0; i < dk; ++i) kept_off[i] = offset(kept, i);
  for (std::size_t i = 0; i < dt; ++i) traced_off[i] = offset(traced, i);

  ComplexMatrix out = ComplexMatrix::Zero(static_cast<Eigen::Index>(dk),
                                          static_cast<Eigen::Index>(dk));
  for (std::size_t a = 0; a < dk; ++a) {
    for (std::size_t b = 0; b < dk; ++b) {
      Complex acc{0.0, 0.0};
      for (std::size_t t = 0; t < dt; ++t) {
        acc += rho(static_cast<Eigen::Index>(kept_off[a] + traced_off[t]),
                   static_cast<Eigen::Index>(kept_off[b] + traced_off[t]));
      }
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = acc;
    }
  }
  return out;
}

inline ComplexMatrix projector(const ComplexVector& psi) {
  return psi * psi.adjoint();
}

}  // namespace linalg
}  // namespace darksteady
