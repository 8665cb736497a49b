#pragma once

#include <random>

#include <gtest/gtest.h>

#include "darksteady/linalg.hpp"

namespace darksteady::testing {

/// Random density matrix: A A^dag / Tr, A with Gaussian complex entries.
inline ComplexMatrix random_density(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix a(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) a(i, j) = Complex(n(rng), n(rng));
  ComplexMatrix rho = a * a.adjoint();
  return rho / rho.trace();
}

inline ComplexVector random_pure(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexVector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = Complex(n(rng), n(rng));
  return v / v.norm();
}

inline ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

inline ComplexMatrix diag(std::initializer_list<double> xs) {
  ComplexMatrix m = ComplexMatrix::Zero(static_cast<Eigen::Index>(xs.size()),
                                        static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) { m(i, i) = x; ++i; }
  return m;
}

}  // namespace darksteady::testing
