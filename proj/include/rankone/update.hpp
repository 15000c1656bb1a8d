#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "rankone/core.hpp"
#include "rankone/eigvec.hpp"
#include "rankone/secular.hpp"

namespace rankone {

struct DeflationTolerances {
  double tau_z = 1e-12;
  std::optional<double> tau_lambda;  // default: 1e-10 * max|lambda|

  double lambda_tol(const Vector& lambdas) const {
    if (tau_lambda) return *tau_lambda;
    return 1e-10 * lambdas.cwiseAbs().maxCoeff();
  }
};

/// Known eigenvalues within tau_lambda of each other that are coupled to v.
/// They enter the secular equation as one atom along the normalized
/// projection of v onto their span, with weight sqrt(sum z_i^2). The other
/// directions of that span are eigenvectors of the update with the same value.
struct MergedGroup {
  std::vector<Index> members;
  double lambda = 0.0;
  double weight = 0.0;
};

struct DeflationReport {
  std::vector<Index> kept;    // one index per atom; the first member of a merged group
  std::vector<Index> frozen;  // |z_i| < tau_z, plus non-leading members of merged groups
  std::vector<MergedGroup> merged;
  double tau_z = 0.0;
  double tau_lambda = 0.0;
  double residual_norm = 0.0;
};

namespace detail {

struct DeflationPlan {
  DeflationReport report;
  Vector atom_lambda;
  Vector atom_z;
  Matrix atom_vectors;
  std::vector<Index> atom_index;
  // pairs that bypass the secular solve
  std::vector<double> pass_value;
  std::vector<Index> pass_index;
  Matrix pass_vectors;
};

inline DeflationPlan plan_deflation(const PartialEigen& eig, const Vector& v, const DeflationTolerances& tol) {
  detail::require_dims(v.size() == eig.n(), "deflate: len(v) must equal n");
  const Vector& lam = eig.values();
  const Matrix& q = eig.vectors();
  const Vector z = coefficients_z(q, v);
  DeflationPlan plan;
  auto& rep = plan.report;
  rep.tau_z = tol.tau_z;
  rep.tau_lambda = tol.lambda_tol(lam);
  rep.residual_norm = project_residual(q, v).norm();

  std::vector<Index> coupled;
  for (Index i = 0; i < eig.m(); ++i) {
    if (std::abs(z(i)) < rep.tau_z) rep.frozen.push_back(i);
    else coupled.push_back(i);
  }

  std::vector<std::vector<Index>> groups;
  for (Index i : coupled) {
    if (!groups.empty() && lam(groups.back().front()) - lam(i) <= rep.tau_lambda) groups.back().push_back(i);
    else groups.push_back({i});
  }

  std::vector<Matrix> pass_blocks;
  std::vector<double> atom_l, atom_w;
  std::vector<Vector> atom_v;
  for (const auto& g : groups) {
    plan.atom_index.push_back(g.front());
    rep.kept.push_back(g.front());
    if (g.size() == 1) {
      atom_l.push_back(lam(g.front()));
      atom_w.push_back(z(g.front()));
      atom_v.push_back(q.col(g.front()));
      continue;
    }
    const Index s = static_cast<Index>(g.size());
    Matrix qg(q.rows(), s);
    Vector zg(s);
    double lsum = 0.0;
    for (Index k = 0; k < s; ++k) {
      qg.col(k) = q.col(g[static_cast<std::size_t>(k)]);
      zg(k) = z(g[static_cast<std::size_t>(k)]);
      lsum += zg(k) * zg(k) * lam(g[static_cast<std::size_t>(k)]);
    }
    const double w = zg.norm();
    MergedGroup mg{g, lsum / (w * w), w};
    // orthonormal basis of span(qg) whose first direction is the coupled one
    Eigen::HouseholderQR<Matrix> qr(zg / w);
    Matrix basis = qr.householderQ() * Matrix::Identity(s, s);
    atom_l.push_back(mg.lambda);
    atom_w.push_back(w);
    atom_v.push_back(qg * (zg / w));
    pass_blocks.push_back(qg * basis.rightCols(s - 1));
    for (std::size_t k = 1; k < g.size(); ++k) {
      rep.frozen.push_back(g[k]);
      plan.pass_index.push_back(g[k]);
      plan.pass_value.push_back(mg.lambda);
    }
    rep.merged.push_back(std::move(mg));
  }
  std::sort(rep.frozen.begin(), rep.frozen.end());

  const Index k = static_cast<Index>(atom_l.size());
  plan.atom_lambda.resize(k);
  plan.atom_z.resize(k);
  plan.atom_vectors.resize(q.rows(), k);
  for (Index i = 0; i < k; ++i) {
    plan.atom_lambda(i) = atom_l[static_cast<std::size_t>(i)];
    plan.atom_z(i) = atom_w[static_cast<std::size_t>(i)];
    plan.atom_vectors.col(i) = atom_v[static_cast<std::size_t>(i)];
  }

  // pass-through columns: frozen originals, then merged complements
  std::vector<Index> small_z;
  for (Index i = 0; i < eig.m(); ++i)
    if (std::abs(z(i)) < rep.tau_z) small_z.push_back(i);
  const Index merged_extra = static_cast<Index>(plan.pass_index.size());
  plan.pass_vectors.resize(q.rows(), static_cast<Index>(small_z.size()) + merged_extra);
  std::vector<double> values;
  std::vector<Index> index;
  Index col = 0;
  for (Index i : small_z) {
    plan.pass_vectors.col(col++) = q.col(i);
    values.push_back(lam(i));
    index.push_back(i);
  }
  for (const auto& block : pass_blocks) {
    plan.pass_vectors.middleCols(col, block.cols()) = block;
    col += block.cols();
  }
  values.insert(values.end(), plan.pass_value.begin(), plan.pass_value.end());
  index.insert(index.end(), plan.pass_index.begin(), plan.pass_index.end());
  plan.pass_value = std::move(values);
  plan.pass_index = std::move(index);
  return plan;
}

}  // namespace detail

/// Splits the known pairs into those entering the secular solve and those
/// that pass through. Throws AllDeflated when v is orthogonal to every known
/// eigenvector and has no residual either.
inline DeflationReport deflate(const PartialEigen& eig, const Vector& v, const DeflationTolerances& tol = {}) {
  auto plan = detail::plan_deflation(eig, v, tol);
  if (plan.report.kept.empty() && plan.report.residual_norm < tol.tau_z) {
    throw Error(Errc::AllDeflated, "update vector is orthogonal to every known eigenvector and has no residual");
  }
  return plan.report;
}

enum class OrthoMethod { GramSchmidt, Polar };

struct ReorthResult {
  Matrix vectors;         // P_bar
  double gram_defect = 0; // ||P^T P - I||_F of the input
  Matrix e;               // E with P = P_bar (I + E)
  bool bounded = false;   // gram_defect < 1/4
  double e_bound = 0;     // 2 * gram_defect when bounded
};

namespace detail {

inline double gram_defect(const Matrix& p) {
  return (p.transpose() * p - Matrix::Identity(p.cols(), p.cols())).norm();
}

}  // namespace detail

/// Orthonormalizes the columns of P. Columns flagged in `locked` are taken as
/// already orthonormal and returned untouched; the rest are orthogonalized
/// against them and each other.
inline ReorthResult reorthogonalize(const Matrix& p, OrthoMethod method = OrthoMethod::GramSchmidt,
                                    const std::vector<bool>& locked = {}) {
  const Index m = p.cols();
  detail::require_dims(locked.empty() || static_cast<Index>(locked.size()) == m,
                       "reorthogonalize: lock mask length must equal the column count");
  auto is_locked = [&](Index j) { return !locked.empty() && locked[static_cast<std::size_t>(j)]; };
  ReorthResult out;
  out.gram_defect = detail::gram_defect(p);
  out.bounded = out.gram_defect < 0.25;
  out.e_bound = out.bounded ? 2.0 * out.gram_defect : std::numeric_limits<double>::infinity();
  Matrix bar = p;

  std::vector<Index> fixed, free;
  for (Index j = 0; j < m; ++j) (is_locked(j) ? fixed : free).push_back(j);
  Matrix basis(p.rows(), static_cast<Index>(fixed.size()));
  for (std::size_t k = 0; k < fixed.size(); ++k) basis.col(static_cast<Index>(k)) = p.col(fixed[k]);

  auto project_out = [](const Matrix& b, Index used, Vector& w) {
    if (used == 0) return;
    for (int pass = 0; pass < 2; ++pass) w -= b.leftCols(used) * (b.leftCols(used).transpose() * w);
  };

  if (method == OrthoMethod::GramSchmidt) {
    Matrix all(p.rows(), m);
    all.leftCols(basis.cols()) = basis;
    Index used = basis.cols();
    for (Index j : free) {
      Vector w = p.col(j);
      const double norm0 = w.norm();
      project_out(all, used, w);
      const double norm = w.norm();
      if (!(norm > 1e-10 * norm0)) {
        throw Error(Errc::RankDeficient, "columns are numerically dependent", static_cast<std::size_t>(j));
      }
      w /= norm;
      all.col(used++) = w;
      bar.col(j) = w;
    }
  } else {
    Matrix rest(p.rows(), static_cast<Index>(free.size()));
    for (std::size_t k = 0; k < free.size(); ++k) {
      Vector w = p.col(free[k]);
      project_out(basis, basis.cols(), w);
      rest.col(static_cast<Index>(k)) = w;
    }
    if (rest.cols() > 0) {
      Eigen::JacobiSVD<Matrix> svd(rest, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const Vector sv = svd.singularValues();
      if (!(sv.minCoeff() > 1e-10 * std::max(sv.maxCoeff(), 1e-300))) {
        throw Error(Errc::RankDeficient, "columns are numerically dependent");
      }
      const Matrix polar = svd.matrixU() * svd.matrixV().transpose();
      for (std::size_t k = 0; k < free.size(); ++k) bar.col(free[k]) = polar.col(static_cast<Index>(k));
    }
  }
  out.e = bar.transpose() * p - Matrix::Identity(m, m);
  out.vectors = std::move(bar);
  return out;
}

/// ||B P - P diag(T)||_F.
inline double residual_quality(const SymmetricMatrix& b, const Matrix& p, const Vector& t) {
  detail::require_dims(b.n() == p.rows() && p.cols() == t.size(), "residual_quality: inconsistent dimensions");
  return (b.apply(p) - p * t.asDiagonal()).norm();
}

/// Same with B = A + rho v v^T applied implicitly.
inline double residual_quality(const SymmetricMatrix& a, const RankOneUpdate& upd, const Matrix& p,
                               const Vector& t) {
  detail::require_dims(a.n() == p.rows() && p.cols() == t.size() && upd.n() == a.n(),
                       "residual_quality: inconsistent dimensions");
  Matrix bp = a.apply(p);
  bp.noalias() += upd.rho() * upd.v() * (upd.v().transpose() * p);
  return (bp - p * t.asDiagonal()).norm();
}

struct UpdateOptions {
  bool orthogonalize = false;
  OrthoMethod ortho_method = OrthoMethod::GramSchmidt;
  std::optional<EigvecFormula> formula;  // default follows the truncation order
  DeflationTolerances deflation;
  bool compute_quality = true;           // residual norms, needs A
  std::optional<double> s;               // supplies s when A is not available
};

struct UpdateResult {
  Vector values;
  Matrix vectors;       // final estimates (orthogonalized when requested)
  Matrix raw_vectors;   // unit-column estimates before orthogonalization
  DeflationReport deflation;
  double mu_used = 0.0;
  MuPolicyKind mu_policy_used = MuPolicyKind::Zero;
  bool mu_fallback = false;
  std::optional<double> s;
  double residual_mass = 0.0;
  double gram_defect = 0.0;         // of raw_vectors
  double output_gram_defect = 0.0;  // of vectors
  bool orthogonalized = false;
  std::optional<double> e_bound;    // 2 ||G||_F when ||G||_F < 1/4
  std::optional<double> residual_quality_raw;
  std::optional<double> residual_quality;
  bool unchanged = false;
  std::vector<int> root_iterations;
  std::vector<std::string> notes;
};

namespace detail {

struct MuResolution {
  double mu = 0.0;
  MuPolicyKind used = MuPolicyKind::Zero;
  bool fallback = false;
  std::vector<std::string> notes;
};

/// Applies the policy with the fallback chain Star -> Mean -> Zero.
inline MuResolution resolve_mu(const MuPolicy& policy, const PartialEigen& eig, const SymmetricMatrix* a,
                               std::optional<double> s, double residual_mass) {
  MuResolution out;
  MuPolicyKind kind = policy.kind;
  if (kind == MuPolicyKind::Star) {
    try {
      if (!s) throw Error(Errc::MissingS, "star policy needs s");
      out.mu = weighted_tail_mean(*s, residual_mass);
      out.used = kind;
      return out;
    } catch (const Error& e) {
      out.notes.push_back(std::string("mu star unavailable (") + e.what() + "), falling back to mean");
      out.fallback = true;
      kind = MuPolicyKind::Mean;
    }
  }
  if (kind == MuPolicyKind::Mean) {
    try {
      std::optional<double> trace = eig.trace_hint();
      if (!trace && a) trace = a->trace();
      out.mu = mean_of_tail(eig, trace);
      out.used = kind;
      return out;
    } catch (const Error& e) {
      out.notes.push_back(std::string("mu mean unavailable (") + e.what() + "), falling back to zero");
      out.fallback = true;
      kind = MuPolicyKind::Zero;
    }
  }
  out.used = kind;
  out.mu = kind == MuPolicyKind::Explicit ? policy.value : 0.0;
  return out;
}

inline EigvecFormula default_formula(Order order) {
  return order == Order::First ? EigvecFormula::FirstOrder : EigvecFormula::SecondOrder;
}

inline UpdateResult unchanged_result(const PartialEigen& eig, std::string note) {
  UpdateResult out;
  out.values = eig.values();
  out.vectors = eig.vectors();
  out.raw_vectors = eig.vectors();
  out.gram_defect = eig.orthonormality_defect();
  out.output_gram_defect = out.gram_defect;
  out.unchanged = true;
  out.notes.push_back(std::move(note));
  return out;
}

}  // namespace detail

/// Updates the m known leading eigenpairs of A to estimates for A + rho v v^T:
/// deflation, choice of mu, truncated secular roots, eigenvector formula, and
/// optionally re-orthogonalization. A is needed for the second order method,
/// for mu star, and for the residual diagnostics.
inline UpdateResult rank_one_update(const PartialEigen& eig, const RankOneUpdate& upd, const TruncationConfig& cfg,
                                    const SymmetricMatrix* a = nullptr, const UpdateOptions& opts = {}) {
  cfg.validate();
  detail::require_dims(upd.n() == eig.n(), "rank_one_update: len(v) must equal n");
  if (a) detail::require_dims(a->n() == eig.n(), "rank_one_update: A has wrong dimension");
  if (upd.rho() == 0.0) return detail::unchanged_result(eig, "rho is zero; eigenpairs returned unchanged");

  const Vector& v = upd.v();
  auto plan = detail::plan_deflation(eig, v, opts.deflation);
  if (plan.report.kept.empty()) {
    auto out = detail::unchanged_result(eig, "update vector is orthogonal to every known eigenvector");
    out.deflation = plan.report;
    return out;
  }

  Vector r = project_residual(eig.vectors(), v);
  double residual_mass = r.squaredNorm();
  if (std::sqrt(residual_mass) < opts.deflation.tau_z) {
    r.setZero();
    residual_mass = 0.0;
  }
  const EigvecFormula formula = opts.formula.value_or(detail::default_formula(cfg.order));
  const bool need_ar = formula == EigvecFormula::SecondOrder;
  if (need_ar && !a) throw Error(Errc::MissingMatrix, "second order eigenvector formula needs A");

  Vector a_r;
  std::optional<double> s = opts.s;
  if (a && (need_ar || !s)) {
    a_r = a->matvec(r);
    if (!s) s = r.dot(a_r);
  }
  if (residual_mass == 0.0) s = 0.0;
  if (cfg.order == Order::Second && !s) throw Error(Errc::MissingS, "second order equation needs s (or A)");

  auto mu = detail::resolve_mu(cfg.mu, eig, a, s, residual_mass);
  UpdateResult out;
  out.notes = mu.notes;
  out.mu_used = mu.mu;
  out.mu_policy_used = mu.used;
  out.mu_fallback = mu.fallback;
  out.s = s;
  out.residual_mass = residual_mass;
  out.deflation = plan.report;
  if (!plan.report.merged.empty()) out.notes.push_back("merged clusters of equal eigenvalues");

  const auto problem =
      SecularProblem::make(plan.atom_lambda, plan.atom_z, upd.rho(), mu.mu, s, residual_mass);
  const auto roots = solve_roots_detailed(problem, cfg);
  out.root_iterations = roots.iterations;

  const Matrix gaps = roots.pole_gaps(plan.atom_lambda);
  const Vector mu_gaps = roots.mu_gaps(mu.mu);
  const Matrix atom_p = detail::normalize_columns(
      detail::eigvec_columns(plan.atom_vectors, plan.atom_z, gaps, mu_gaps, r, &a_r, mu.mu, formula));

  // interleave roots with the pass-through pairs, descending, ties by original index
  struct Entry {
    double value;
    Index index;
    bool from_root;
    Index col;
  };
  std::vector<Entry> entries;
  for (Index i = 0; i < roots.size(); ++i) {
    entries.push_back({roots.values(i), plan.atom_index[static_cast<std::size_t>(i)], true, i});
  }
  for (std::size_t k = 0; k < plan.pass_value.size(); ++k) {
    entries.push_back({plan.pass_value[k], plan.pass_index[k], false, static_cast<Index>(k)});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    if (x.value != y.value) return x.value > y.value;
    return x.index < y.index;
  });
  const Index m = eig.m();
  out.values.resize(m);
  out.raw_vectors.resize(eig.n(), m);
  std::vector<bool> locked(static_cast<std::size_t>(m), false);
  for (Index i = 0; i < m; ++i) {
    const auto& e = entries[static_cast<std::size_t>(i)];
    out.values(i) = e.value;
    if (e.from_root) out.raw_vectors.col(i) = atom_p.col(e.col);
    else out.raw_vectors.col(i) = plan.pass_vectors.col(e.col);
    locked[static_cast<std::size_t>(i)] = !e.from_root;
  }
  out.gram_defect = detail::gram_defect(out.raw_vectors);

  if (opts.orthogonalize) {
    auto re = reorthogonalize(out.raw_vectors, opts.ortho_method, locked);
    out.vectors = std::move(re.vectors);
    out.orthogonalized = true;
    if (re.bounded) out.e_bound = re.e_bound;
    else out.notes.push_back("gram defect >= 1/4; orthogonalization error is not bounded");
  } else {
    out.vectors = out.raw_vectors;
  }
  out.output_gram_defect = detail::gram_defect(out.vectors);

  if (a && opts.compute_quality) {
    out.residual_quality_raw = residual_quality(*a, upd, out.raw_vectors, out.values);
    out.residual_quality =
        opts.orthogonalize ? residual_quality(*a, upd, out.vectors, out.values) : *out.residual_quality_raw;
  }
  return out;
}

inline UpdateResult rank_one_update(const PartialEigen& eig, const RankOneUpdate& upd, const TruncationConfig& cfg,
                                    const SymmetricMatrix* a, bool orthogonalize) {
  UpdateOptions opts;
  opts.orthogonalize = orthogonalize;
  return rank_one_update(eig, upd, cfg, a, opts);
}

}  // namespace rankone
