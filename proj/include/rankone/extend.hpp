#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rankone/core.hpp"
#include "rankone/graph.hpp"
#include "rankone/update.hpp"

namespace rankone {

/// Lifts eigenpairs of an n-point Laplacian to the augmented (n+1)-dimensional
/// one: vectors get a zero at index 0 and the isolated vertex contributes the
/// exact pair (1, e_0), inserted in descending position. All m input pairs are
/// kept, so the result holds m + 1 pairs.
inline PartialEigen lift_eigenpairs(const PartialEigen& eig) {
  const Index n = eig.n();
  const Index m = eig.m();
  Vector values(m + 1);
  Matrix vectors = Matrix::Zero(n + 1, m + 1);
  Index pos = 0;
  while (pos < m && eig.values()(pos) > 1.0) ++pos;
  Index src = 0;
  for (Index c = 0; c < m + 1; ++c) {
    if (c == pos) {
      values(c) = 1.0;
      vectors(0, c) = 1.0;
      continue;
    }
    values(c) = eig.values()(src);
    vectors.col(c).tail(n) = eig.vectors().col(src);
    ++src;
  }
  std::optional<double> trace;
  if (eig.trace_hint()) trace = *eig.trace_hint() + 1.0;
  return PartialEigen::trusted(std::move(values), std::move(vectors), trace);
}

struct CorrectionResult {
  Vector values;
  Matrix vectors;
  Index skipped_terms = 0;
};

namespace detail {

/// Shared core: `m_proj` is P^T C P.
inline CorrectionResult correct_with_projection(const Matrix& m_proj, const Vector& t, const Matrix& p) {
  const Index m = t.size();
  CorrectionResult out;
  const double spread = m > 0 ? t.maxCoeff() - t.minCoeff() : 0.0;
  const double tiny = 1e-10 * spread;
  Vector vals = t + m_proj.diagonal();
  Matrix vecs = p;
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (j == i) continue;
      const double gap = t(i) - t(j);
      if (!(std::abs(gap) >= tiny) || gap == 0.0) {
        ++out.skipped_terms;
        continue;
      }
      vecs.col(i) += (m_proj(j, i) / gap) * p.col(j);
    }
    const double norm = vecs.col(i).norm();
    if (norm > 0.0) vecs.col(i) /= norm;
  }
  std::vector<Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return vals(a) > vals(b); });
  out.values.resize(m);
  out.vectors.resize(p.rows(), m);
  for (Index k = 0; k < m; ++k) {
    out.values(k) = vals(order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = vecs.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

}  // namespace detail

/// First order perturbation corrections for B = proxy + C with (t, P)
/// approximate eigenpairs of the proxy:
///   t_i <- t_i + p_i^T C p_i
///   p_i <- p_i + sum_{j != i} (p_j^T C p_i) / (t_i - t_j) p_j
/// The sum runs over the m available vectors only. Terms with
/// |t_i - t_j| < 1e-10 * spread(t) are skipped and counted. Columns are
/// renormalized and the pairs re-sorted by value.
inline CorrectionResult perturbation_correct(const SymmetricMatrix& c, const Vector& t, const Matrix& p) {
  detail::require_dims(c.n() == p.rows() && p.cols() == t.size(), "perturbation_correct: inconsistent dimensions");
  const Matrix m_proj = p.transpose() * c.apply(p);
  return detail::correct_with_projection(0.5 * (m_proj + m_proj.transpose()), t, p);
}

/// Same with C = delta - rho v v^T applied implicitly.
inline CorrectionResult perturbation_correct(const SymmetricMatrix& delta, double rho, const Vector& v,
                                             const Vector& t, const Matrix& p) {
  detail::require_dims(delta.n() == p.rows() && v.size() == p.rows() && p.cols() == t.size(),
                       "perturbation_correct: inconsistent dimensions");
  const Vector pv = p.transpose() * v;
  Matrix m_proj = p.transpose() * delta.apply(p) - rho * pv * pv.transpose();
  return detail::correct_with_projection(0.5 * (m_proj + m_proj.transpose()), t, p);
}

/// ||delta - rho v v^T||_F without forming the dense outer product.
inline double proxy_residual_norm(const SymmetricMatrix& delta, double rho, const Vector& v) {
  const double d2 = delta.frobenius_norm() * delta.frobenius_norm();
  const double cross = v.dot(delta.matvec(v));
  const double vv = v.squaredNorm();
  return std::sqrt(std::max(0.0, d2 - 2.0 * rho * cross + rho * rho * vv * vv));
}

struct ExtendOptions {
  TruncationConfig truncation;
  UpdateOptions update;
  bool correct = true;
  Index report_count = 0;  // 0 reports every pair
  double power_tol = 1e-12;
  int power_max_iters = 10000;
};

struct ExtensionResult {
  double rho = 0.0;
  Vector v;
  int power_iterations = 0;
  double power_residual = 0.0;
  Vector uncorrected_values;
  Matrix uncorrected_vectors;
  Vector corrected_values;
  Matrix corrected_vectors;
  bool corrected = false;
  double correction_matrix_norm = 0.0;  // ||delta - rho v v^T||_F
  double gram_defect = 0.0;
  Index skipped_terms = 0;
  bool unchanged = false;  // the new vertex did not connect; input returned
  UpdateResult update;
  std::vector<std::string> notes;
};

/// Estimates the leading eigenpairs of L1 from those of the augmented L0:
/// rank-one update with the dominant eigenpair (rho, v) of L1 - L0, followed
/// optionally by the perturbation corrections for the remainder
/// C = L1 - L0 - rho v v^T.
inline ExtensionResult extend(const SymmetricMatrix& l0_aug, const PartialEigen& eig, const LaplacianPair& pair,
                              const ExtendOptions& opts = {}) {
  detail::require_dims(l0_aug.n() == eig.n() && pair.delta.n() == eig.n(), "extend: inconsistent dimensions");
  const Index report = opts.report_count > 0 ? std::min(opts.report_count, eig.m()) : eig.m();
  ExtensionResult out;
  auto take = [&](const Vector& vals, const Matrix& vecs) {
    out.uncorrected_values = vals.head(report);
    out.uncorrected_vectors = vecs.leftCols(report);
    out.corrected_values = out.uncorrected_values;
    out.corrected_vectors = out.uncorrected_vectors;
  };

  PowerResult power;
  try {
    power = top_eigenpair_power(pair.delta, opts.power_tol, opts.power_max_iters);
  } catch (const Error& e) {
    if (e.code() != Errc::ZeroMatrix) throw;
    out.unchanged = true;
    out.notes.push_back("new vertex is disconnected; eigenpairs returned unchanged");
    take(eig.values(), eig.vectors());
    out.gram_defect = detail::gram_defect(out.uncorrected_vectors);
    return out;
  }
  out.rho = power.rho;
  out.v = power.v;
  out.power_iterations = power.iterations;
  out.power_residual = power.residual;

  out.update = rank_one_update(eig, RankOneUpdate(power.rho, power.v), opts.truncation, &l0_aug, opts.update);
  take(out.update.values, out.update.vectors);
  out.gram_defect = detail::gram_defect(out.uncorrected_vectors);
  out.correction_matrix_norm = proxy_residual_norm(pair.delta, power.rho, power.v);
  out.notes = out.update.notes;

  if (opts.correct) {
    auto corr = perturbation_correct(pair.delta, power.rho, power.v, out.update.values, out.update.vectors);
    out.corrected_values = corr.values.head(report);
    out.corrected_vectors = corr.vectors.leftCols(report);
    out.skipped_terms = corr.skipped_terms;
    out.corrected = true;
    out.notes.push_back("eigenvector correction sums over the " + std::to_string(eig.m()) +
                        " available pairs only");
  }
  return out;
}

/// Whole pipeline for one new point: builds the Laplacian pair, lifts the
/// m known pairs of the n-point Laplacian, and reports the top m pairs.
inline ExtensionResult extend_point(const PointCloud& pc, const Eigen::RowVectorXd& x0, const PartialEigen& eig_n,
                                    const GraphConfig& graph, ExtendOptions opts = {}) {
  detail::require_dims(eig_n.n() == pc.n(), "extend_point: eigenvectors do not match the point count");
  const LaplacianPair pair = augment_and_delta(pc, x0, graph);
  const PartialEigen lifted = lift_eigenpairs(eig_n);
  if (opts.report_count == 0) opts.report_count = eig_n.m();
  return extend(pair.l0_aug, lifted, pair, opts);
}

}  // namespace rankone
