#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rankone/core.hpp"
#include "rankone/extend.hpp"
#include "rankone/graph.hpp"
#include "rankone/labbench/metrics.hpp"
#include "rankone/labbench/oracle.hpp"
#include "rankone/labbench/parallel.hpp"
#include "rankone/secular.hpp"
#include "rankone/update.hpp"

namespace rankone::lab {

enum class ExperimentKind { SyntheticRankOne, GraphSigma, ExtensionCompare, Scaling };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::SyntheticRankOne: return "synthetic";
    case ExperimentKind::GraphSigma: return "graph-sigma";
    case ExperimentKind::ExtensionCompare: return "extension";
    case ExperimentKind::Scaling: return "scaling";
  }
  return "?";
}

inline ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::SyntheticRankOne, ExperimentKind::GraphSigma, ExperimentKind::ExtensionCompare,
                 ExperimentKind::Scaling}) {
    if (s == to_string(k)) return k;
  }
  throw Error(Errc::InvalidArgument, "unknown experiment kind '" + s + "'");
}

/// Every knob of every experiment. Fields that a kind does not use are
/// ignored by its runner; `defaults` fills in the values each kind expects.
struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::SyntheticRankOne;
  std::uint64_t seed = 1;
  Index n = 1000;
  Index m = 10;
  Index trials = 5;
  double rho = 1.0;

  // synthetic rank-one update
  std::vector<double> mu_hats{1.0, 1e-1, 1e-2, 1e-3, 1e-4};
  double sigma = 1e-4;
  double top_low = 1.0;
  double top_high = 2.0;

  // point clouds
  Index dim = 8;
  Index clusters = 5;
  double separation = 3.0;  // cluster centers ~ N(0, separation^2 I)
  double epsilon = 50.0;
  std::vector<Index> ks{5, 10, 20, 40};
  Index k = 10;

  // scaling
  std::vector<Index> n_ladder{2000, 4000, 8000, 16000};
  std::vector<Index> m_ladder{};
  Index m_ladder_n = 20000;
  Index nnz_per_row = 100;
  Index vector_nnz = 100;
  Index repeats = 3;

  static ExperimentSpec defaults(ExperimentKind kind) {
    ExperimentSpec s;
    s.kind = kind;
    switch (kind) {
      case ExperimentKind::SyntheticRankOne:
        break;
      case ExperimentKind::GraphSigma:
        s.trials = 10;
        break;
      case ExperimentKind::ExtensionCompare:
        s.m = 5;
        s.trials = 10;
        s.separation = 1.0;
        s.epsilon = 50.0;
        break;
      case ExperimentKind::Scaling:
        s.m = 10;
        s.trials = 1;
        s.m_ladder = {50, 100, 200, 400};
        break;
    }
    return s;
  }

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(Errc::InvalidArgument, "experiment spec: " + what); };
    if (trials < 1) bad("trials must be >= 1");
    if (n < 2) bad("n must be >= 2");
    if (m < 1 || m >= n) bad("m must satisfy 1 <= m < n");
    if (kind == ExperimentKind::SyntheticRankOne) {
      if (mu_hats.empty()) bad("mu_hat grid is empty");
      if (!(sigma >= 0.0)) bad("sigma must be non-negative");
      for (double mh : mu_hats)
        if (!(mh + 6.0 * sigma < top_high)) bad("tail mean must stay below the range of the known eigenvalues");
    }
    if (kind == ExperimentKind::GraphSigma && ks.empty()) bad("k grid is empty");
    if (kind == ExperimentKind::GraphSigma || kind == ExperimentKind::ExtensionCompare) {
      if (dim < 1 || clusters < 1) bad("dim and clusters must be >= 1");
      if (!(epsilon > 0.0)) bad("epsilon must be positive");
      for (Index kk : ks)
        if (kk < 1 || kk >= n) bad("k must satisfy 1 <= k < n");
      if (k < 1 || k >= n) bad("k must satisfy 1 <= k < n");
    }
    if (kind == ExperimentKind::Scaling) {
      if (n_ladder.empty() && m_ladder.empty()) bad("both ladders are empty");
      if (repeats < 1) bad("repeats must be >= 1");
      if (nnz_per_row < 1 || vector_nnz < 1) bad("sparsity counts must be >= 1");
      for (Index nn : n_ladder)
        if (nn <= m) bad("n ladder entries must exceed m");
      for (Index mm : m_ladder)
        if (mm < 1 || mm >= m_ladder_n) bad("m ladder entries must lie in [1, m_ladder_n)");
    }
  }
};

/// One measurement. Per-trial rows carry stat "value" and the trial index;
/// aggregate rows (mean, median, geomean, slope) carry trial -1.
struct MetricRow {
  std::string experiment;
  std::string variant;
  std::string param;
  double param_value = std::nan("");
  Index trial = -1;
  std::string stat = "value";
  double eigenvalue_abs_err = std::nan("");
  double eigenvector_angle_deg = std::nan("");
  double eigenvector_err_norm = std::nan("");
  double sigma[4] = {std::nan(""), std::nan(""), std::nan(""), std::nan("")};
  std::string slope_of;
  double slope = std::nan("");
  double wall_time = std::nan("");
};

/// Rows are deterministic given the configuration. Wall-clock measurements go to
/// `timings` so that the main table stays byte-reproducible.
struct ExperimentResult {
  std::vector<MetricRow> rows;
  std::vector<MetricRow> timings;
};

inline const char* csv_header() {
  return "experiment,variant,param,param_value,trial,stat,eigenvalue_abs_err,eigenvector_angle_deg,"
         "eigenvector_err_norm,sigma1,sigma2,sigma3,sigma4,slope_of,slope,wall_time";
}

inline std::string format_g9(double x) {
  if (std::isnan(x)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline void write_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  os << csv_header() << '\n';
  for (const auto& r : rows) {
    os << r.experiment << ',' << r.variant << ',' << r.param << ',' << format_g9(r.param_value) << ','
       << (r.trial >= 0 ? std::to_string(r.trial) : std::string()) << ',' << r.stat << ','
       << format_g9(r.eigenvalue_abs_err) << ',' << format_g9(r.eigenvector_angle_deg) << ','
       << format_g9(r.eigenvector_err_norm);
    for (double s : r.sigma) os << ',' << format_g9(s);
    os << ',' << r.slope_of << ',' << format_g9(r.slope) << ',' << format_g9(r.wall_time) << '\n';
  }
}

inline std::string to_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

// ---------------------------------------------------------------------------
// random instances

using Rng = std::mt19937_64;

/// Independent generator per (seed, stream, trial).
inline Rng trial_rng(std::uint64_t seed, std::uint32_t stream, std::uint64_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream,
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return Rng(seq);
}

inline Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) out(i, j) = g(rng);
  return out;
}

/// First k columns of a Haar-distributed orthogonal matrix: QR of a Gaussian
/// matrix with the signs of diag(R) folded into Q.
inline Matrix haar_orthonormal(Index n, Index k, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(n, k, rng));
  Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  const auto& r = qr.matrixQR();
  for (Index j = 0; j < k; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

inline Vector random_unit_vector(Index n, Rng& rng) {
  Vector v = gaussian_matrix(n, 1, rng);
  return v / v.norm();
}

/// Gaussian mixture: centers ~ N(0, separation^2 I), equal cluster
/// probabilities, unit within-cluster covariance.
inline Matrix mixture_cloud(Index count, Index dim, Index clusters, double separation, Rng& rng) {
  Matrix centers = separation * gaussian_matrix(clusters, dim, rng);
  std::uniform_int_distribution<Index> pick(0, clusters - 1);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix p(count, dim);
  for (Index i = 0; i < count; ++i) {
    const Index c = pick(rng);
    for (Index j = 0; j < dim; ++j) p(i, j) = centers(c, j) + g(rng);
  }
  return p;
}

/// Sparse symmetric matrix with about `per_row` nonzeros per row: a diagonal
/// plus per_row / 2 random off-diagonal positions per row, mirrored.
inline SymmetricMatrix random_sparse_symmetric(Index n, Index per_row, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<Index> col(0, n - 1);
  const double scale = 1.0 / std::sqrt(static_cast<double>(per_row));
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(n * (per_row / 2 + 1)));
  for (Index i = 0; i < n; ++i) {
    t.emplace_back(i, i, scale * g(rng));
    for (Index r = 0; r < per_row / 2; ++r) t.emplace_back(i, col(rng), scale * g(rng));
  }
  return SymmetricMatrix::from_triplets(n, t);
}

inline Vector sparse_unit_vector(Index n, Index nnz, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<Index> pos(0, n - 1);
  Vector v = Vector::Zero(n);
  for (Index r = 0; r < nnz; ++r) v(pos(rng)) += g(rng);
  const double nv = v.norm();
  if (nv == 0.0) v(0) = 1.0;
  return v / v.norm();
}

// ---------------------------------------------------------------------------
// shared helpers

namespace detail {

struct Variant {
  std::string label;
  Order order;
  MuPolicy mu;
};

inline std::vector<Variant> synthetic_variants() {
  std::vector<Variant> out;
  for (auto mu : {MuPolicy::zero(), MuPolicy::star(), MuPolicy::mean()}) {
    for (auto order : {Order::First, Order::Second}) {
      out.push_back({std::string(to_string(order)) + ":" + to_string(mu.kind), order, mu});
    }
  }
  return out;
}

inline TruncationConfig truncation_for(const Variant& v) {
  TruncationConfig cfg;
  cfg.order = v.order;
  cfg.mu = v.mu;
  return cfg;
}

/// Concatenates per-trial row blocks in trial order.
inline std::vector<MetricRow> flatten(std::vector<std::vector<MetricRow>>& blocks) {
  std::vector<MetricRow> out;
  for (auto& b : blocks)
    for (auto& r : b) out.push_back(std::move(r));
  return out;
}

/// Top m eigenpairs from the dense oracle.
inline PartialEigen oracle_top(const SymmetricMatrix& a, Index m) {
  FullEigen e = oracle_eigh(a);
  return PartialEigen::trusted(e.values.head(m), e.vectors.leftCols(m), a.trace());
}

inline MetricRow error_row(const std::string& experiment, const std::string& variant, const std::string& param,
                           double param_value, Index trial, const Vector& values, const Matrix& vectors,
                           const FullEigen& truth) {
  MetricRow r;
  r.experiment = experiment;
  r.variant = variant;
  r.param = param;
  r.param_value = param_value;
  r.trial = trial;
  r.eigenvalue_abs_err = max_value_error(values, truth.values);
  r.eigenvector_angle_deg = max_angle(vectors, truth.vectors);
  r.eigenvector_err_norm = max_error_norm(vectors, truth.vectors);
  return r;
}

/// Collects a metric across trial rows matching (variant, param_value).
template <class Get>
std::vector<double> collect(const std::vector<MetricRow>& rows, const std::string& variant, double param_value,
                            Get get) {
  std::vector<double> out;
  for (const auto& r : rows)
    if (r.stat == "value" && r.variant == variant && r.param_value == param_value) out.push_back(get(r));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// runners

/// A + rho v v^T with A = Q diag(top, tail) Q^T, top m eigenvalues uniform in
/// [top_low, top_high], tail ~ N(mu_hat, sigma^2). Q, the top values, the
/// tail noise and v are shared across the mu_hat grid within a trial.
/// Rows: per (trial, mu_hat, variant) errors; per (mu_hat, variant) geometric
/// means over trials; per variant the log2-log2 slope of each error against
/// mu_hat, fitted over points whose aggregate exceeds 1e-12.
inline ExperimentResult run_synthetic(const ExperimentSpec& spec) {
  spec.validate();
  const Index n = spec.n, m = spec.m;
  const auto variants = detail::synthetic_variants();
  std::vector<std::vector<MetricRow>> blocks(static_cast<std::size_t>(spec.trials));

  parallel_for(blocks.size(), [&](std::size_t trial) {
    Rng rng = trial_rng(spec.seed, 1, trial);
    const Matrix q = haar_orthonormal(n, n, rng);
    const Vector noise = gaussian_matrix(n - m, 1, rng);
    double tail_max = -std::numeric_limits<double>::infinity();
    for (double mu_hat : spec.mu_hats) tail_max = std::max(tail_max, mu_hat + spec.sigma * noise.maxCoeff());
    // the known pairs must be the leading ones: redraw until they clear the tail
    std::uniform_real_distribution<double> top_dist(spec.top_low, spec.top_high);
    Vector top(m);
    do {
      for (Index i = 0; i < m; ++i) top(i) = top_dist(rng);
    } while (top.minCoeff() <= tail_max);
    std::sort(top.data(), top.data() + m, std::greater<double>());
    const Vector v = random_unit_vector(n, rng);

    auto& out = blocks[trial];
    for (double mu_hat : spec.mu_hats) {
      Vector lambda(n);
      lambda.head(m) = top;
      lambda.tail(n - m) = (mu_hat + spec.sigma * noise.array()).matrix();
      Matrix a = q * lambda.asDiagonal() * q.transpose();
      a = Matrix(0.5 * (a + a.transpose()));
      const SymmetricMatrix as = SymmetricMatrix::dense(a);
      const FullEigen truth = oracle_eigh(Matrix(a + spec.rho * v * v.transpose()));
      const PartialEigen eig = PartialEigen::trusted(top, q.leftCols(m), lambda.sum());
      for (const auto& var : variants) {
        UpdateOptions opts;
        opts.compute_quality = false;
        const UpdateResult res = rank_one_update(eig, RankOneUpdate(spec.rho, v), detail::truncation_for(var), &as, opts);
        out.push_back(detail::error_row("synthetic", var.label, "mu_hat", mu_hat, static_cast<Index>(trial),
                                        res.values, res.vectors, truth));
      }
    }
  });

  ExperimentResult result;
  result.rows = detail::flatten(blocks);
  std::vector<MetricRow> aggregates;
  for (const auto& var : variants) {
    std::vector<double> xs, ev, en, ea;
    for (double mu_hat : spec.mu_hats) {
      MetricRow g;
      g.experiment = "synthetic";
      g.variant = var.label;
      g.param = "mu_hat";
      g.param_value = mu_hat;
      g.stat = "geomean";
      g.eigenvalue_abs_err =
          geometric_mean(detail::collect(result.rows, var.label, mu_hat, [](auto& r) { return r.eigenvalue_abs_err; }));
      g.eigenvector_angle_deg = geometric_mean(
          detail::collect(result.rows, var.label, mu_hat, [](auto& r) { return r.eigenvector_angle_deg; }));
      g.eigenvector_err_norm = geometric_mean(
          detail::collect(result.rows, var.label, mu_hat, [](auto& r) { return r.eigenvector_err_norm; }));
      xs.push_back(mu_hat);
      ev.push_back(g.eigenvalue_abs_err);
      ea.push_back(g.eigenvector_angle_deg);
      en.push_back(g.eigenvector_err_norm);
      aggregates.push_back(g);
    }
    auto fit = [&](const char* of, const std::vector<double>& ys) {
      MetricRow s;
      s.experiment = "synthetic";
      s.variant = var.label;
      s.param = "mu_hat";
      s.stat = "slope";
      s.slope_of = of;
      s.slope = log2_slope(xs, ys, 1e-12);
      aggregates.push_back(s);
    };
    fit("eigenvalue_abs_err", ev);
    fit("eigenvector_err_norm", en);
    fit("eigenvector_angle_deg", ea);
  }
  result.rows.insert(result.rows.end(), aggregates.begin(), aggregates.end());
  return result;
}

/// Singular values of Delta L for one inserted point. Delta L vanishes outside
/// the rows/columns of x0 and the affected vertices, so the oracle runs on
/// that block only.
inline Vector delta_singular_values(const LaplacianPair& pair) {
  std::vector<Index> support{0};
  support.insert(support.end(), pair.affected.begin(), pair.affected.end());
  std::map<Index, Index> slot;
  for (std::size_t i = 0; i < support.size(); ++i) slot[support[i]] = static_cast<Index>(i);
  const Index b = static_cast<Index>(support.size());
  Matrix block = Matrix::Zero(b, b);
  pair.delta.for_each_upper([&](Index i, Index j, double v) {
    const Index a = slot.at(i), c = slot.at(j);
    block(a, c) = v;
    block(c, a) = v;
  });
  Vector sv = oracle_eigh(block).values.cwiseAbs();
  std::sort(sv.data(), sv.data() + sv.size(), std::greater<double>());
  return sv;
}

/// Singular values of Delta L over the k grid. Each trial draws a mixture
/// cloud of n + 1 points; the first point is inserted into the graph of the
/// remaining n, using the same cloud for every k.
/// Rows: sigma_1..4 per (trial, k); means per k; slopes of log2(1 - mean
/// sigma_1) and log2(mean sigma_i), i = 2..4, against log2 k.
inline ExperimentResult run_graph_sigma(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<std::vector<MetricRow>> blocks(static_cast<std::size_t>(spec.trials));
  parallel_for(blocks.size(), [&](std::size_t trial) {
    Rng rng = trial_rng(spec.seed, 2, trial);
    const Matrix p = mixture_cloud(spec.n + 1, spec.dim, spec.clusters, spec.separation, rng);
    const PointCloud pc(p.bottomRows(spec.n));
    const Eigen::RowVectorXd x0 = p.row(0);
    for (Index k : spec.ks) {
      const LaplacianPair pair = augment_and_delta(pc, x0, GraphConfig{KnnRule{k}, spec.epsilon, true});
      const Vector sv = delta_singular_values(pair);
      MetricRow r;
      r.experiment = "graph-sigma";
      r.variant = "knn";
      r.param = "k";
      r.param_value = static_cast<double>(k);
      r.trial = static_cast<Index>(trial);
      for (Index i = 0; i < 4; ++i) r.sigma[i] = i < sv.size() ? sv(i) : 0.0;
      blocks[trial].push_back(r);
    }
  });
  ExperimentResult result;
  result.rows = detail::flatten(blocks);
  std::vector<double> xs;
  std::vector<std::vector<double>> ys(4);
  std::vector<MetricRow> aggregates;
  for (Index k : spec.ks) {
    MetricRow g;
    g.experiment = "graph-sigma";
    g.variant = "knn";
    g.param = "k";
    g.param_value = static_cast<double>(k);
    g.stat = "mean";
    for (int i = 0; i < 4; ++i) {
      g.sigma[i] = mean(detail::collect(result.rows, "knn", g.param_value, [i](auto& r) { return r.sigma[i]; }));
    }
    xs.push_back(g.param_value);
    ys[0].push_back(1.0 - g.sigma[0]);
    for (int i = 1; i < 4; ++i) ys[static_cast<std::size_t>(i)].push_back(g.sigma[i]);
    aggregates.push_back(g);
  }
  const char* names[4] = {"one_minus_sigma1", "sigma2", "sigma3", "sigma4"};
  for (int i = 0; i < 4; ++i) {
    MetricRow s;
    s.experiment = "graph-sigma";
    s.variant = "knn";
    s.param = "k";
    s.stat = "slope";
    s.slope_of = names[i];
    s.slope = log2_slope(xs, ys[static_cast<std::size_t>(i)]);
    aggregates.push_back(s);
  }
  result.rows.insert(result.rows.end(), aggregates.begin(), aggregates.end());
  return result;
}

/// Out-of-sample extension accuracy. Each trial draws a mixture cloud of
/// n + 1 points, takes the top m pairs of the Laplacian of the last n from
/// the oracle, inserts the first point and compares estimates of the top m
/// pairs of L1 against the oracle:
///   no_update             old pairs, vectors zero-padded at x0
///   first:zero:{raw,corrected}
///   second:star:{raw,corrected}
/// Aggregates: median and mean over trials per variant.
inline ExperimentResult run_extension_compare(const ExperimentSpec& spec) {
  spec.validate();
  const Index n = spec.n, m = spec.m;
  const GraphConfig graph{KnnRule{spec.k}, spec.epsilon, true};
  const std::vector<detail::Variant> variants{{"first:zero", Order::First, MuPolicy::zero()},
                                              {"second:star", Order::Second, MuPolicy::star()}};
  std::vector<std::vector<MetricRow>> blocks(static_cast<std::size_t>(spec.trials));
  parallel_for(blocks.size(), [&](std::size_t trial) {
    Rng rng = trial_rng(spec.seed, 3, trial);
    const Matrix p = mixture_cloud(n + 1, spec.dim, spec.clusters, spec.separation, rng);
    const PointCloud pc(p.bottomRows(n));
    const Eigen::RowVectorXd x0 = p.row(0);
    const PartialEigen eig = detail::oracle_top(laplacian_of(pc, graph), m);
    const LaplacianPair pair = augment_and_delta(pc, x0, graph);
    const FullEigen truth = oracle_eigh(pair.l1);
    const Index t = static_cast<Index>(trial);
    const double kk = static_cast<double>(spec.k);
    auto& out = blocks[trial];

    Matrix padded = Matrix::Zero(n + 1, m);
    padded.bottomRows(n) = eig.vectors();
    out.push_back(detail::error_row("extension", "no_update", "k", kk, t, eig.values(), padded, truth));

    const PartialEigen lifted = lift_eigenpairs(eig);
    for (const auto& var : variants) {
      ExtendOptions opts;
      opts.truncation = detail::truncation_for(var);
      opts.report_count = m;
      const ExtensionResult res = extend(pair.l0_aug, lifted, pair, opts);
      out.push_back(detail::error_row("extension", var.label + ":raw", "k", kk, t, res.uncorrected_values,
                                      res.uncorrected_vectors, truth));
      out.push_back(detail::error_row("extension", var.label + ":corrected", "k", kk, t, res.corrected_values,
                                      res.corrected_vectors, truth));
    }
  });
  ExperimentResult result;
  result.rows = detail::flatten(blocks);
  std::vector<std::string> labels{"no_update"};
  for (const auto& var : variants) {
    labels.push_back(var.label + ":raw");
    labels.push_back(var.label + ":corrected");
  }
  std::vector<MetricRow> aggregates;
  const double kk = static_cast<double>(spec.k);
  for (const char* stat : {"median", "mean"}) {
    for (const auto& label : labels) {
      MetricRow g;
      g.experiment = "extension";
      g.variant = label;
      g.param = "k";
      g.param_value = kk;
      g.stat = stat;
      auto agg = [&](auto get) {
        auto xs = detail::collect(result.rows, label, kk, get);
        return std::string(stat) == "median" ? median(xs) : mean(xs);
      };
      g.eigenvalue_abs_err = agg([](auto& r) { return r.eigenvalue_abs_err; });
      g.eigenvector_angle_deg = agg([](auto& r) { return r.eigenvector_angle_deg; });
      g.eigenvector_err_norm = agg([](auto& r) { return r.eigenvector_err_norm; });
      aggregates.push_back(g);
    }
  }
  result.rows.insert(result.rows.end(), aggregates.begin(), aggregates.end());
  return result;
}

/// Wall time of rank_one_update on sparse random A with about nnz_per_row
/// nonzeros per row, a sparse v, and m orthonormal vectors that are not
/// eigenvectors of A (the cost does not depend on that). Two ladders: n at
/// fixed m, and m at fixed m_ladder_n. Each point is timed `repeats` times.
/// The deterministic rows list the configurations; `timings` holds one row
/// per repeat, the per-point median, and the fitted log2 exponent.
inline ExperimentResult run_scaling(const ExperimentSpec& spec) {
  spec.validate();
  const std::vector<detail::Variant> variants{{"first:zero", Order::First, MuPolicy::zero()},
                                              {"second:star", Order::Second, MuPolicy::star()}};
  ExperimentResult result;
  auto ladder = [&](const std::string& param, const std::vector<Index>& points, auto size_of) {
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> fits;
    for (std::size_t idx = 0; idx < points.size(); ++idx) {
      const auto [n, m] = size_of(points[idx]);
      Rng rng = trial_rng(spec.seed, param == "n" ? 4u : 5u, idx);
      const SymmetricMatrix a = random_sparse_symmetric(n, spec.nnz_per_row, rng);
      Vector values(m);
      std::uniform_real_distribution<double> u(1.0, 2.0);
      for (Index i = 0; i < m; ++i) values(i) = u(rng);
      std::sort(values.data(), values.data() + m, std::greater<double>());
      const PartialEigen eig = PartialEigen::trusted(values, haar_orthonormal(n, m, rng), a.trace());
      const RankOneUpdate upd(spec.rho, sparse_unit_vector(n, spec.vector_nnz, rng));
      for (const auto& var : variants) {
        MetricRow base;
        base.experiment = "scaling";
        base.variant = var.label;
        base.param = param;
        base.param_value = static_cast<double>(points[idx]);
        result.rows.push_back(base);
        std::vector<double> times;
        UpdateOptions opts;
        opts.compute_quality = false;
        for (Index rep = 0; rep < spec.repeats; ++rep) {
          const auto t0 = std::chrono::steady_clock::now();
          const UpdateResult res = rank_one_update(eig, upd, detail::truncation_for(var), &a, opts);
          const auto t1 = std::chrono::steady_clock::now();
          if (res.values.size() != m) throw Error(Errc::DimensionMismatch, "scaling: unexpected result size");
          MetricRow r = base;
          r.trial = rep;
          r.wall_time = std::chrono::duration<double>(t1 - t0).count();
          times.push_back(r.wall_time);
          result.timings.push_back(r);
        }
        MetricRow med = base;
        med.stat = "median";
        med.wall_time = median(times);
        result.timings.push_back(med);
        fits[var.label].first.push_back(base.param_value);
        fits[var.label].second.push_back(med.wall_time);
      }
    }
    for (const auto& var : variants) {
      MetricRow s;
      s.experiment = "scaling";
      s.variant = var.label;
      s.param = param;
      s.stat = "slope";
      s.slope_of = "wall_time";
      s.slope = log2_slope(fits[var.label].first, fits[var.label].second);
      result.timings.push_back(s);
    }
  };
  if (!spec.n_ladder.empty()) ladder("n", spec.n_ladder, [&](Index v) { return std::pair<Index, Index>{v, spec.m}; });
  if (!spec.m_ladder.empty())
    ladder("m", spec.m_ladder, [&](Index v) { return std::pair<Index, Index>{spec.m_ladder_n, v}; });
  return result;
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::SyntheticRankOne: return run_synthetic(spec);
    case ExperimentKind::GraphSigma: return run_graph_sigma(spec);
    case ExperimentKind::ExtensionCompare: return run_extension_compare(spec);
    case ExperimentKind::Scaling: return run_scaling(spec);
  }
  throw Error(Errc::InvalidArgument, "unknown experiment kind");
}

/// First aggregate row matching (variant, stat, slope_of), or nullptr.
inline const MetricRow* find_aggregate(const std::vector<MetricRow>& rows, const std::string& variant,
                                       const std::string& stat, const std::string& slope_of = {},
                                       std::optional<double> param_value = std::nullopt) {
  for (const auto& r : rows) {
    if (r.trial >= 0 || r.variant != variant || r.stat != stat || r.slope_of != slope_of) continue;
    if (param_value && r.param_value != *param_value) continue;
    return &r;
  }
  return nullptr;
}

}  // namespace rankone::lab
