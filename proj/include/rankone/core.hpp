#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rankone/error.hpp"

namespace rankone {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseUpper = Eigen::SparseMatrix<double, Eigen::RowMajor, Index>;
using Triplet = Eigen::Triplet<double, Index>;

namespace detail {

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::DimensionMismatch, what);
}

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

}  // namespace detail

/// Real symmetric matrix held either densely or as the upper triangle of a
/// sparse matrix. Sparse entries below the diagonal are mirrored on access.
class SymmetricMatrix {
 public:
  SymmetricMatrix() : storage_(Matrix()) {}

  /// Dense construction. Rejects input whose asymmetry exceeds
  /// `rel_tol * max|entry|`; the stored matrix is the exact symmetric part.
  static SymmetricMatrix dense(const Matrix& m, double rel_tol = 1e-12) {
    detail::require_dims(m.rows() == m.cols(), "dense matrix must be square");
    if (!m.allFinite()) throw Error(Errc::InvalidArgument, "matrix has non-finite entries");
    const double scale = m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
    const double asym = m.size() == 0 ? 0.0 : (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > rel_tol * scale) {
      throw Error(Errc::Asymmetric, "max |A - A^T| = " + std::to_string(asym) +
                                        " exceeds tolerance relative to max|A| = " +
                                        std::to_string(scale));
    }
    SymmetricMatrix out;
    out.storage_ = Matrix(0.5 * (m + m.transpose()));
    return out;
  }

  /// Sparse construction from coordinate entries. Entries below the diagonal
  /// are folded into the upper triangle; duplicates are summed.
  static SymmetricMatrix from_triplets(Index n, std::span<const Triplet> entries) {
    if (n < 0) throw Error(Errc::InvalidArgument, "negative dimension");
    std::vector<Triplet> upper;
    upper.reserve(entries.size());
    for (const auto& e : entries) {
      if (e.row() < 0 || e.col() < 0 || e.row() >= n || e.col() >= n) {
        throw Error(Errc::DimensionMismatch, "triplet index out of range");
      }
      if (!std::isfinite(e.value())) throw Error(Errc::InvalidArgument, "non-finite entry");
      const Index i = std::min(e.row(), e.col());
      const Index j = std::max(e.row(), e.col());
      upper.emplace_back(i, j, e.value());
    }
    SparseUpper s(n, n);
    s.setFromTriplets(upper.begin(), upper.end());
    s.prune(0.0);
    s.makeCompressed();
    SymmetricMatrix out;
    out.storage_ = std::move(s);
    return out;
  }

  /// Takes ownership of an upper-triangular sparse matrix. Any strictly lower
  /// entries are rejected.
  static SymmetricMatrix from_upper(SparseUpper upper) {
    detail::require_dims(upper.rows() == upper.cols(), "sparse matrix must be square");
    for (Index i = 0; i < upper.outerSize(); ++i) {
      for (SparseUpper::InnerIterator it(upper, i); it; ++it) {
        if (it.col() < it.row()) throw Error(Errc::InvalidArgument, "entry below the diagonal");
      }
    }
    upper.prune(0.0);
    upper.makeCompressed();
    SymmetricMatrix out;
    out.storage_ = std::move(upper);
    return out;
  }

  static SymmetricMatrix diagonal(const Vector& d) {
    std::vector<Triplet> t;
    for (Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d(i));
    return from_triplets(d.size(), t);
  }

  static SymmetricMatrix identity(Index n) { return diagonal(Vector::Ones(n)); }

  Index n() const {
    return std::visit([](const auto& s) -> Index { return s.rows(); }, storage_);
  }

  bool is_sparse() const { return std::holds_alternative<SparseUpper>(storage_); }

  /// Stored nonzeros: the full count for dense storage, the upper triangle for sparse.
  Index nnz() const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) {
      return static_cast<Index>((d->array() != 0.0).count());
    }
    return std::get<SparseUpper>(storage_).nonZeros();
  }

  Vector matvec(const Vector& x) const {
    detail::require_dims(x.size() == n(), "matvec: vector length does not match matrix");
    if (const auto* d = std::get_if<Matrix>(&storage_)) return (*d) * x;
    const auto& s = std::get<SparseUpper>(storage_);
    Vector y = s.selfadjointView<Eigen::Upper>() * x;
    return y;
  }

  /// Block product A X.
  Matrix apply(const Matrix& x) const {
    detail::require_dims(x.rows() == n(), "apply: block row count does not match matrix");
    if (const auto* d = std::get_if<Matrix>(&storage_)) return (*d) * x;
    const auto& s = std::get<SparseUpper>(storage_);
    Matrix y = s.selfadjointView<Eigen::Upper>() * x;
    return y;
  }

  double operator()(Index i, Index j) const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) return (*d)(i, j);
    const auto& s = std::get<SparseUpper>(storage_);
    return s.coeff(std::min(i, j), std::max(i, j));
  }

  Vector diagonal_entries() const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) return d->diagonal();
    return std::get<SparseUpper>(storage_).diagonal();
  }

  double trace() const { return diagonal_entries().sum(); }

  double max_abs() const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) return d->size() ? d->cwiseAbs().maxCoeff() : 0.0;
    const auto& s = std::get<SparseUpper>(storage_);
    double m = 0.0;
    for (Index k = 0; k < s.nonZeros(); ++k) m = std::max(m, std::abs(s.valuePtr()[k]));
    return m;
  }

  /// Frobenius norm of the full (mirrored) matrix.
  double frobenius_norm() const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) return d->norm();
    double sum = 0.0;
    for_each_upper([&](Index i, Index j, double v) { sum += (i == j ? 1.0 : 2.0) * v * v; });
    return std::sqrt(sum);
  }

  Matrix to_dense() const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) return *d;
    const auto& s = std::get<SparseUpper>(storage_);
    Matrix out = Matrix::Zero(s.rows(), s.cols());
    for_each_upper([&](Index i, Index j, double v) {
      out(i, j) = v;
      out(j, i) = v;
    });
    return out;
  }

  /// Visits every stored upper-triangle entry (i <= j) in row-major order.
  /// Dense storage visits the nonzero entries only.
  template <class F>
  void for_each_upper(F&& f) const {
    if (const auto* d = std::get_if<Matrix>(&storage_)) {
      for (Index i = 0; i < d->rows(); ++i) {
        for (Index j = i; j < d->cols(); ++j) {
          if ((*d)(i, j) != 0.0) f(i, j, (*d)(i, j));
        }
      }
      return;
    }
    const auto& s = std::get<SparseUpper>(storage_);
    for (Index i = 0; i < s.outerSize(); ++i) {
      for (SparseUpper::InnerIterator it(s, i); it; ++it) f(it.row(), it.col(), it.value());
    }
  }

  const Matrix* dense_storage() const { return std::get_if<Matrix>(&storage_); }
  const SparseUpper* sparse_storage() const { return std::get_if<SparseUpper>(&storage_); }

 private:
  std::variant<Matrix, SparseUpper> storage_;
};

inline Vector matvec(const SymmetricMatrix& a, const Vector& x) { return a.matvec(x); }

/// The m leading eigenpairs of an n x n symmetric matrix: values in
/// descending order, vectors as the columns of an n x m orthonormal block.
class PartialEigen {
 public:
  PartialEigen() = default;

  PartialEigen(Vector values, Matrix vectors, std::optional<double> trace_hint = std::nullopt)
      : PartialEigen(std::move(values), std::move(vectors), trace_hint, true) {}

  /// Skips the O(n m^2) orthonormality check. For blocks derived from an
  /// already validated PartialEigen (subsets, rotations within a cluster).
  static PartialEigen trusted(Vector values, Matrix vectors, std::optional<double> trace_hint = std::nullopt) {
    return PartialEigen(std::move(values), std::move(vectors), trace_hint, false);
  }

  Index n() const { return vectors_.rows(); }
  Index m() const { return vectors_.cols(); }
  const Vector& values() const { return values_; }
  const Matrix& vectors() const { return vectors_; }
  std::optional<double> trace_hint() const { return trace_hint_; }

  double orthonormality_defect() const {
    return (vectors_.transpose() * vectors_ - Matrix::Identity(m(), m())).norm();
  }

 private:
  PartialEigen(Vector values, Matrix vectors, std::optional<double> trace_hint, bool check_gram)
      : values_(std::move(values)), vectors_(std::move(vectors)), trace_hint_(trace_hint) {
    detail::require_dims(values_.size() == vectors_.cols(),
                         "PartialEigen: value count does not match vector count");
    if (m() < 1) throw Error(Errc::InvalidArgument, "PartialEigen: need at least one eigenpair");
    if (m() > n()) throw Error(Errc::InvalidArgument, "PartialEigen: more pairs than the dimension");
    if (!values_.allFinite() || !vectors_.allFinite()) {
      throw Error(Errc::InvalidArgument, "PartialEigen: non-finite entries");
    }
    for (Index i = 1; i < m(); ++i) {
      if (values_(i) > values_(i - 1)) {
        throw Error(Errc::NotDescending, "PartialEigen: eigenvalues must be sorted descending",
                    static_cast<std::size_t>(i));
      }
    }
    if (check_gram) {
      const double defect = orthonormality_defect();
      if (defect > 1e-10 * static_cast<double>(m())) {
        throw Error(Errc::NotOrthonormal,
                    "PartialEigen: ||Q^T Q - I||_F = " + std::to_string(defect));
      }
    }
  }

  Vector values_;
  Matrix vectors_;
  std::optional<double> trace_hint_;
};

/// A perturbation rho v v^T with ||v|| = 1. A non-unit v is normalized and
/// rho rescaled so the product is unchanged.
class RankOneUpdate {
 public:
  RankOneUpdate(double rho, const Vector& v) {
    const double norm = v.norm();
    if (!std::isfinite(rho) || !v.allFinite()) throw Error(Errc::InvalidArgument, "non-finite update");
    if (norm == 0.0) throw Error(Errc::InvalidArgument, "update vector is zero");
    v_ = v / norm;
    rho_ = rho * norm * norm;
  }

  double rho() const { return rho_; }
  const Vector& v() const { return v_; }
  Index n() const { return v_.size(); }

 private:
  double rho_ = 0.0;
  Vector v_;
};

/// r = v - Q Q^T v, orthogonalized twice so that Q^T r sits at rounding level.
inline Vector project_residual(const Matrix& q, const Vector& v) {
  detail::require_dims(q.rows() == v.size(), "project_residual: Q rows must equal len(v)");
  Vector r = v - q * (q.transpose() * v);
  r -= q * (q.transpose() * r);
  return r;
}

inline Vector coefficients_z(const Matrix& q, const Vector& v) {
  detail::require_dims(q.rows() == v.size(), "coefficients_z: Q rows must equal len(v)");
  return q.transpose() * v;
}

}  // namespace rankone
