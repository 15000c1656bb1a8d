#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "rankone/core.hpp"

namespace rankone {

/// Points as rows of an n x d matrix. ids default to the row numbers.
class PointCloud {
 public:
  PointCloud() = default;

  explicit PointCloud(Matrix points, std::vector<Index> ids = {}) : points_(std::move(points)), ids_(std::move(ids)) {
    if (!points_.allFinite()) {
      for (Index i = 0; i < points_.rows(); ++i) {
        if (!points_.row(i).allFinite()) {
          throw Error(Errc::InvalidArgument, "point has non-finite coordinates", static_cast<std::size_t>(i));
        }
      }
    }
    if (ids_.empty()) {
      ids_.resize(static_cast<std::size_t>(points_.rows()));
      for (Index i = 0; i < points_.rows(); ++i) ids_[static_cast<std::size_t>(i)] = i;
    }
    detail::require_dims(static_cast<Index>(ids_.size()) == points_.rows(), "PointCloud: one id per point");
  }

  Index n() const { return points_.rows(); }
  Index d() const { return points_.cols(); }
  const Matrix& points() const { return points_; }
  const std::vector<Index>& ids() const { return ids_; }
  Eigen::RowVectorXd point(Index i) const { return points_.row(i); }

  /// New cloud with `x0` as row 0 followed by the current points.
  PointCloud with_first(const Eigen::RowVectorXd& x0) const {
    detail::require_dims(x0.size() == d(), "new point has the wrong dimension");
    Matrix p(n() + 1, d());
    p.row(0) = x0;
    p.bottomRows(n()) = points_;
    return PointCloud(std::move(p));
  }

 private:
  Matrix points_;
  std::vector<Index> ids_;
};

struct KnnRule {
  Index k = 10;
};

/// Connects i and j when ||x_i - x_j|| < delta.
struct DeltaRule {
  double delta = 1.0;
};

struct GraphConfig {
  std::variant<KnnRule, DeltaRule> rule = KnnRule{};
  double epsilon = 1.0;  // Gaussian kernel width: exp(-||x - y||^2 / epsilon)
  bool self_loops = true;

  void validate() const {
    if (!(epsilon > 0.0)) throw Error(Errc::InvalidArgument, "kernel width epsilon must be positive");
    if (const auto* k = std::get_if<KnnRule>(&rule)) {
      if (k->k < 1) throw Error(Errc::InvalidArgument, "kNN rule needs k >= 1");
    } else if (!(std::get<DeltaRule>(rule).delta > 0.0)) {
      throw Error(Errc::InvalidArgument, "delta rule needs delta > 0");
    }
  }
};

namespace detail {

using Adjacency = std::vector<std::vector<std::pair<Index, double>>>;

inline double sq_dist(const Matrix& p, Index i, Index j) { return (p.row(i) - p.row(j)).squaredNorm(); }

/// Neighbor lists (column-sorted, self loop included when enabled).
inline Adjacency build_adjacency(const PointCloud& pc, const GraphConfig& cfg) {
  cfg.validate();
  const Index n = pc.n();
  if (n < 2) throw Error(Errc::InvalidArgument, "graph construction needs at least two points");
  const Matrix& p = pc.points();
  std::vector<std::vector<Index>> nbrs(static_cast<std::size_t>(n));

  if (const auto* knn = std::get_if<KnnRule>(&cfg.rule)) {
    const Index k = std::min(knn->k, n - 1);
    std::vector<std::pair<double, Index>> cand(static_cast<std::size_t>(n - 1));
    for (Index i = 0; i < n; ++i) {
      std::size_t c = 0;
      for (Index j = 0; j < n; ++j)
        if (j != i) cand[c++] = {sq_dist(p, i, j), j};
      // ties in distance resolved by index
      std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
      std::sort(cand.begin(), cand.begin() + k);
      for (Index r = 0; r < k; ++r) {
        const Index j = cand[static_cast<std::size_t>(r)].second;
        nbrs[static_cast<std::size_t>(i)].push_back(j);
        nbrs[static_cast<std::size_t>(j)].push_back(i);
      }
    }
  } else {
    const double delta = std::get<DeltaRule>(cfg.rule).delta;
    for (Index i = 0; i < n; ++i)
      for (Index j = i + 1; j < n; ++j)
        if (std::sqrt(sq_dist(p, i, j)) < delta) {
          nbrs[static_cast<std::size_t>(i)].push_back(j);
          nbrs[static_cast<std::size_t>(j)].push_back(i);
        }
  }

  Adjacency adj(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto& list = nbrs[static_cast<std::size_t>(i)];
    if (cfg.self_loops) list.push_back(i);
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    if (list.empty()) {
      throw Error(Errc::IsolatedVertexWithoutSelfLoop, "vertex has no neighbors and self loops are off",
                  static_cast<std::size_t>(i));
    }
    auto& row = adj[static_cast<std::size_t>(i)];
    row.reserve(list.size());
    for (Index j : list) row.emplace_back(j, j == i ? 1.0 : std::exp(-sq_dist(p, i, j) / cfg.epsilon));
  }
  return adj;
}

inline SymmetricMatrix from_adjacency(const Adjacency& adj) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < adj.size(); ++i)
    for (const auto& [j, w] : adj[i])
      if (j >= static_cast<Index>(i)) t.emplace_back(static_cast<Index>(i), j, w);
  return SymmetricMatrix::from_triplets(static_cast<Index>(adj.size()), t);
}

}  // namespace detail

/// Gaussian-kernel weight matrix. kNN edges use the union rule (i among the
/// k nearest of j, or j among the k nearest of i); ties in distance go to the
/// lower index. Self loops carry weight exp(0) = 1.
inline SymmetricMatrix build_weights(const PointCloud& pc, const GraphConfig& cfg) {
  return detail::from_adjacency(detail::build_adjacency(pc, cfg));
}

/// Degrees of a symmetric weight matrix, each accumulated in ascending column order.
inline Vector degrees(const SymmetricMatrix& w) {
  Vector d = Vector::Zero(w.n());
  w.for_each_upper([&](Index i, Index j, double v) {
    d(i) += v;
    if (i != j) d(j) += v;
  });
  return d;
}

/// L = D^{-1/2} W D^{-1/2}.
inline SymmetricMatrix laplacian_sym(const SymmetricMatrix& w) {
  const Vector d = degrees(w);
  for (Index i = 0; i < d.size(); ++i) {
    if (!(d(i) > 0.0)) throw Error(Errc::ZeroDegree, "vertex has zero degree", static_cast<std::size_t>(i));
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(w.nnz()));
  w.for_each_upper([&](Index i, Index j, double v) { t.emplace_back(i, j, v / std::sqrt(d(i) * d(j))); });
  return SymmetricMatrix::from_triplets(w.n(), t);
}

inline SymmetricMatrix laplacian_of(const PointCloud& pc, const GraphConfig& cfg) {
  return laplacian_sym(build_weights(pc, cfg));
}

/// L with an isolated vertex prepended at index 0: row and column e_0.
inline SymmetricMatrix augment_isolated(const SymmetricMatrix& l) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(l.nnz()) + 1);
  t.emplace_back(0, 0, 1.0);
  l.for_each_upper([&](Index i, Index j, double v) { t.emplace_back(i + 1, j + 1, v); });
  return SymmetricMatrix::from_triplets(l.n() + 1, t);
}

struct LaplacianPair {
  SymmetricMatrix l0_aug;  // old Laplacian with the new vertex isolated at index 0
  SymmetricMatrix l1;      // Laplacian of the new point followed by the old ones
  SymmetricMatrix delta;   // l1 - l0_aug, exact zeros dropped
  std::vector<Index> neighbors;  // vertices adjacent to the new one (indices in l1)
  std::vector<Index> affected;   // vertices other than 0 whose row of delta is nonzero
};

/// Inserts x0 as vertex 0. Both Laplacians are built from scratch with the
/// same summation order, so entries untouched by the insertion cancel exactly.
/// Under the kNN rule x0 can displace neighbors of other points, so `affected`
/// may extend beyond `neighbors`.
inline LaplacianPair augment_and_delta(const PointCloud& pc, const Eigen::RowVectorXd& x0, const GraphConfig& cfg) {
  LaplacianPair out;
  out.l0_aug = augment_isolated(laplacian_of(pc, cfg));
  const auto adj1 = detail::build_adjacency(pc.with_first(x0), cfg);
  for (const auto& [j, w] : adj1[0])
    if (j != 0) out.neighbors.push_back(j);
  out.l1 = laplacian_sym(detail::from_adjacency(adj1));
  SparseUpper diff = *out.l1.sparse_storage() - *out.l0_aug.sparse_storage();
  diff.prune(0.0);
  out.delta = SymmetricMatrix::from_upper(std::move(diff));
  std::vector<bool> touched(static_cast<std::size_t>(out.delta.n()), false);
  out.delta.for_each_upper([&](Index i, Index j, double) {
    touched[static_cast<std::size_t>(i)] = true;
    touched[static_cast<std::size_t>(j)] = true;
  });
  for (Index i = 1; i < out.delta.n(); ++i)
    if (touched[static_cast<std::size_t>(i)]) out.affected.push_back(i);
  return out;
}

struct PowerResult {
  double rho = 0.0;
  Vector v;
  int iterations = 0;
  double residual = 0.0;  // ||M v - rho v||
};

/// Eigenpair of largest magnitude by power iteration. Stops when
/// ||M v - rho v|| <= tol * ||M||_F. The default seed is the indicator of
/// vertex 0 with a small fixed perturbation so that it is never exactly
/// orthogonal to the dominant direction.
inline PowerResult top_eigenpair_power(const SymmetricMatrix& m, double tol = 1e-12, int max_iters = 10000,
                                       const Vector* seed = nullptr) {
  const Index n = m.n();
  if (n == 0) throw Error(Errc::InvalidArgument, "empty matrix");
  const double scale = m.frobenius_norm();
  if (scale == 0.0) throw Error(Errc::ZeroMatrix, "power method on the zero matrix");
  Vector x;
  if (seed) {
    detail::require_dims(seed->size() == n, "power method seed has the wrong length");
    x = *seed;
  } else {
    std::mt19937_64 rng(0x5eedULL);
    std::normal_distribution<double> g(0.0, 1.0);
    x.resize(n);
    for (Index i = 0; i < n; ++i) x(i) = g(rng);
    x *= 1e-2 / x.norm();
    x(0) += 1.0;
  }
  const double xn = x.norm();
  if (!(xn > 0.0)) throw Error(Errc::InvalidArgument, "power method seed is zero");
  x /= xn;
  PowerResult out;
  Vector y = m.matvec(x);
  for (int it = 1; it <= max_iters; ++it) {
    const double rho = x.dot(y);
    const double res = (y - rho * x).norm();
    out.iterations = it;
    if (res <= tol * scale) {
      out.rho = rho;
      out.v = x;
      out.residual = res;
      return out;
    }
    const double yn = y.norm();
    if (yn == 0.0) throw Error(Errc::ZeroMatrix, "iterate mapped to zero; seed lies in the null space");
    x = y / yn;
    y = m.matvec(x);
  }
  throw Error(Errc::MaxIterations, "power method did not converge (small spectral gap?)");
}

/// Reads one point per line, comma separated. A first line that does not
/// parse as numbers is taken as a header. Blank lines are skipped.
inline PointCloud read_point_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open point file '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  Index width = -1;
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty()) continue;
    std::vector<double> row;
    bool ok = true;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = sv.find(',', start);
      std::string_view field = trim(sv.substr(start, comma == std::string_view::npos ? sv.npos : comma - start));
      if (!field.empty() && field.front() == '+') field.remove_prefix(1);
      double value = 0.0;
      const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
      if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size() || !std::isfinite(value)) {
        ok = false;
        break;
      }
      row.push_back(value);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!ok) {
      if (rows.empty() && width < 0) {
        width = static_cast<Index>(std::count(sv.begin(), sv.end(), ',')) + 1;  // header
        continue;
      }
      throw Error(Errc::Parse, path + ":" + std::to_string(lineno) + ": malformed coordinate row", lineno);
    }
    if (width >= 0 && static_cast<Index>(row.size()) != width) {
      throw Error(Errc::Parse,
                  path + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) + " columns",
                  lineno);
    }
    width = static_cast<Index>(row.size());
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(Errc::Parse, path + ": no points");
  Matrix p(static_cast<Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Index j = 0; j < width; ++j) p(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  return PointCloud(std::move(p));
}

}  // namespace rankone
