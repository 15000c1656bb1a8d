#pragma once

#include <cmath>
#include <random>

#include "rankone/core.hpp"
#include "rankone/labbench/oracle.hpp"

namespace rankone::testing {

using Rng = std::mt19937_64;

inline Matrix gaussian(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

inline Vector random_unit(Index n, Rng& rng) {
  Vector v = gaussian(n, 1, rng);
  return v / v.norm();
}

/// Haar-distributed n x k orthonormal block.
inline Matrix random_orthonormal(Index n, Index k, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian(n, k, rng));
  Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  return q;
}

inline Matrix random_symmetric(Index n, Rng& rng) {
  Matrix g = gaussian(n, n, rng);
  return 0.5 * (g + g.transpose());
}

/// Q diag(values) Q^T for a random orthogonal Q; returns both pieces.
struct Spectral {
  Matrix a;
  Vector values;   // descending
  Matrix vectors;  // columns match values
};

inline Spectral with_spectrum(Vector values, Rng& rng) {
  std::sort(values.data(), values.data() + values.size(), std::greater<double>());
  Spectral s;
  s.vectors = random_orthonormal(values.size(), values.size(), rng);
  s.values = values;
  s.a = s.vectors * values.asDiagonal() * s.vectors.transpose();
  s.a = Matrix(0.5 * (s.a + s.a.transpose()));
  return s;
}

inline PartialEigen leading(const Spectral& s, Index m) {
  return PartialEigen(s.values.head(m), s.vectors.leftCols(m), s.values.sum());
}

inline double angle_deg(const Vector& p, const Vector& q) {
  const Vector u = p / p.norm();
  const Vector w = q / q.norm();
  const double c = std::abs(u.dot(w));
  const double s = (w - u.dot(w) * u).norm();
  return std::atan2(s, c) * 180.0 / M_PI;
}

}  // namespace rankone::testing
