#pragma once

#include <algorithm>
#include <cmath>

#include "rankone/core.hpp"

namespace rankone {

/// Which approximation of the tail sum sum_{j>m} z_j q_j / (lambda_j - t) is used.
///   Naive       drops it.
///   FirstOrder  replaces every unknown lambda_j by mu:  r / (mu - t).
///   SecondOrder adds the linear term of the expansion around mu, which needs A r.
enum class EigvecFormula { Naive, FirstOrder, SecondOrder };

inline const char* to_string(EigvecFormula f) {
  switch (f) {
    case EigvecFormula::Naive: return "naive";
    case EigvecFormula::FirstOrder: return "first";
    case EigvecFormula::SecondOrder: return "second";
  }
  return "unknown";
}

namespace detail {

/// Unnormalized estimates for all roots at once.
///   gaps(j, i) = lambda_j - t_i,  mu_gaps(i) = mu - t_i.
/// r and a_r = A r are shared across columns.
inline Matrix eigvec_columns(const Matrix& q, const Vector& z, const Matrix& gaps, const Vector& mu_gaps,
                             const Vector& r, const Vector* a_r, double mu, EigvecFormula formula) {
  const Index k = gaps.cols();
  Matrix coeff(gaps.rows(), k);
  for (Index i = 0; i < k; ++i) coeff.col(i) = z.array() / gaps.col(i).array();
  Matrix p = q * coeff;
  if (formula == EigvecFormula::Naive) return p;
  Vector a(k);
  for (Index i = 0; i < k; ++i) {
    const double d = mu_gaps(i);
    a(i) = formula == EigvecFormula::FirstOrder ? 1.0 / d : 1.0 / d + mu / (d * d);
  }
  p.noalias() += r * a.transpose();
  if (formula == EigvecFormula::SecondOrder) {
    Vector b(k);
    for (Index i = 0; i < k; ++i) b(i) = -1.0 / (mu_gaps(i) * mu_gaps(i));
    p.noalias() += (*a_r) * b.transpose();
  }
  return p;
}

/// Unit columns, each flipped so that its largest-magnitude entry is positive.
inline Matrix normalize_columns(Matrix p) {
  for (Index i = 0; i < p.cols(); ++i) {
    const double norm = p.col(i).norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(Errc::PoleCollision, "eigenvector estimate has zero or non-finite norm",
                  static_cast<std::size_t>(i));
    }
    p.col(i) /= norm;
    Index arg = 0;
    p.col(i).cwiseAbs().maxCoeff(&arg);
    if (p(arg, i) < 0.0) p.col(i) = -p.col(i);
  }
  return p;
}

}  // namespace detail

/// Unnormalized eigenvector estimates p_i for the given updated values t.
/// Column i is
///   Q (Lambda - t_i)^{-1} z                                          (Naive)
///   ... + r / (mu - t_i)                                             (FirstOrder)
///   ... + (1/(mu - t_i) + mu/(mu - t_i)^2) r - A r / (mu - t_i)^2    (SecondOrder)
/// with z = Q^T v and r = v - Q Q^T v.
inline Matrix eigvec_estimate_raw(const PartialEigen& eig, const Vector& v, const Vector& t, double mu,
                                  EigvecFormula formula, const SymmetricMatrix* a = nullptr) {
  detail::require_dims(v.size() == eig.n(), "eigvec_estimate: len(v) must equal n");
  detail::require_dims(t.size() == eig.m(), "eigvec_estimate: need one updated value per known pair");
  if (formula == EigvecFormula::SecondOrder) {
    if (!a) throw Error(Errc::MissingMatrix, "second order eigenvector formula needs A");
    detail::require_dims(a->n() == eig.n(), "eigvec_estimate: A has wrong dimension");
  }
  for (Index i = 1; i < t.size(); ++i) {
    if (!(t(i) < t(i - 1))) {
      throw Error(Errc::NotDescending, "updated values must be strictly descending", static_cast<std::size_t>(i));
    }
  }
  const Vector& lam = eig.values();
  const double scale = std::max({lam.cwiseAbs().maxCoeff(), t.cwiseAbs().maxCoeff(), std::abs(mu), 1e-300});
  const double tiny = 1e-14 * scale;
  Matrix gaps(lam.size(), t.size());
  Vector mu_gaps(t.size());
  for (Index i = 0; i < t.size(); ++i) {
    for (Index j = 0; j < lam.size(); ++j) {
      gaps(j, i) = lam(j) - t(i);
      if (std::abs(gaps(j, i)) <= tiny) {
        throw Error(Errc::PoleCollision, "updated value coincides with a known eigenvalue",
                    static_cast<std::size_t>(i));
      }
    }
    mu_gaps(i) = mu - t(i);
    if (formula != EigvecFormula::Naive && std::abs(mu_gaps(i)) <= tiny) {
      throw Error(Errc::PoleCollision, "updated value coincides with mu", static_cast<std::size_t>(i));
    }
  }
  const Vector z = coefficients_z(eig.vectors(), v);
  const Vector r = project_residual(eig.vectors(), v);
  Vector a_r;
  if (formula == EigvecFormula::SecondOrder) a_r = a->matvec(r);
  return detail::eigvec_columns(eig.vectors(), z, gaps, mu_gaps, r, &a_r, mu, formula);
}

/// Normalized eigenvector estimates with the sign convention applied.
inline Matrix eigvec_estimate(const PartialEigen& eig, const Vector& v, const Vector& t, double mu,
                              EigvecFormula formula, const SymmetricMatrix* a = nullptr) {
  return detail::normalize_columns(eigvec_estimate_raw(eig, v, t, mu, formula, a));
}

}  // namespace rankone
