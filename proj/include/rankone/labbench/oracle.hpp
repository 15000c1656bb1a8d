#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>

#include "rankone/core.hpp"

namespace rankone::lab {

/// Complete eigendecomposition: values descending, vectors as columns.
struct FullEigen {
  Vector values;
  Matrix vectors;
};

namespace detail {

inline FullEigen sorted_descending(const Vector& values, const Matrix& vectors) {
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return values(a) > values(b); });
  FullEigen out;
  out.values.resize(values.size());
  out.vectors.resize(vectors.rows(), vectors.cols());
  for (std::size_t k = 0; k < order.size(); ++k) {
    out.values(static_cast<Index>(k)) = values(order[k]);
    out.vectors.col(static_cast<Index>(k)) = vectors.col(order[k]);
  }
  return out;
}

}  // namespace detail

/// Cyclic Jacobi eigensolver for dense symmetric matrices. Sweeps until the
/// off-diagonal Frobenius mass drops below tol * ||A||_F.
inline FullEigen jacobi_eigh(const Matrix& input, double tol = 1e-15, int max_sweeps = 60) {
  rankone::detail::require_dims(input.rows() == input.cols(), "jacobi_eigh: matrix must be square");
  const Index n = input.rows();
  Matrix a = 0.5 * (input + input.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double scale = a.norm();
  if (n == 0 || scale == 0.0) return detail::sorted_descending(a.diagonal(), v);

  auto off_norm = [&] {
    double s = 0.0;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < j; ++i) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_norm() <= tol * scale) return detail::sorted_descending(a.diagonal(), v);
    for (Index p = 0; p < n - 1; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J with J the rotation in the (p, q) plane
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (off_norm() <= 1e-12 * scale) return detail::sorted_descending(a.diagonal(), v);
  throw Error(Errc::NonConvergence, "jacobi_eigh: off-diagonal mass did not vanish");
}

/// Largest dimension handled by the Jacobi backend of oracle_eigh.
inline constexpr Index kJacobiLimit = 160;

/// Brute-force full decomposition used as ground truth. Jacobi for small
/// matrices; larger ones go through Eigen's tridiagonal QR solver.
inline FullEigen oracle_eigh(const Matrix& a) {
  rankone::detail::require_dims(a.rows() == a.cols(), "oracle_eigh: matrix must be square");
  if (a.rows() > 5000) throw Error(Errc::InvalidArgument, "oracle_eigh: dense oracle limited to n <= 5000");
  if (a.rows() <= kJacobiLimit) return jacobi_eigh(a);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()));
  if (solver.info() != Eigen::Success) throw Error(Errc::NonConvergence, "oracle_eigh: QR iteration failed");
  return detail::sorted_descending(solver.eigenvalues(), solver.eigenvectors());
}

inline FullEigen oracle_eigh(const SymmetricMatrix& a) { return oracle_eigh(a.to_dense()); }

/// Eigenvalues only; cheaper above the Jacobi limit.
inline Vector oracle_eigvals(const Matrix& a) {
  if (a.rows() <= kJacobiLimit) return jacobi_eigh(a).values;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error(Errc::NonConvergence, "oracle_eigvals: QR iteration failed");
  Vector v = solver.eigenvalues().reverse();
  return v;
}

}  // namespace rankone::lab
