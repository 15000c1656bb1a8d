#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "rankone/extend.hpp"
#include "rankone/graph.hpp"
#include "rankone/io.hpp"
#include "rankone/labbench/experiments.hpp"
#include "rankone/labbench/oracle.hpp"
#include "rankone/update.hpp"

namespace rankone::cli {

inline constexpr const char* kVersion = "0.1.0";

enum Exit : int { Ok = 0, InputError = 2, ConstructionError = 3, NumericError = 4, ConvergenceError = 5 };

inline int exit_code_for(Errc code) {
  switch (code) {
    case Errc::IsolatedVertexWithoutSelfLoop:
    case Errc::ZeroDegree:
      return ConstructionError;
    case Errc::NotDescending:
    case Errc::NotOrthonormal:
    case Errc::Asymmetric:
    case Errc::DegenerateResidual:
    case Errc::PoleEvaluation:
    case Errc::PoleCollision:
    case Errc::NoSignChange:
    case Errc::RankDeficient:
    case Errc::AllDeflated:
    case Errc::ZeroMatrix:
      return NumericError;
    case Errc::MaxIterations:
    case Errc::NonConvergence:
      return ConvergenceError;
    default:
      return InputError;
  }
}

/// Malformed flag values that CLI11 cannot reject on its own.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::Io, "sha256 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

inline std::string file_digest(const std::string& path) { return sha256_hex(io::read_text(path)); }

// ---------------------------------------------------------------------------
// flag value parsing

inline double parse_double(const std::string& s, const std::string& flag) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw UsageError(flag + ": expected a number, got '" + s + "'");
  }
  return v;
}

inline Index parse_index(const std::string& s, const std::string& flag) {
  Index v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError(flag + ": expected an integer, got '" + s + "'");
  return v;
}

/// knn:K or delta:D
inline std::variant<KnnRule, DeltaRule> parse_rule(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw UsageError("--rule: expected knn:K or delta:D, got '" + s + "'");
  const std::string kind = s.substr(0, colon), value = s.substr(colon + 1);
  if (kind == "knn") {
    const Index k = parse_index(value, "--rule");
    if (k < 1) throw UsageError("--rule: k must be positive");
    return KnnRule{k};
  }
  if (kind == "delta") {
    const double d = parse_double(value, "--rule");
    if (!(d > 0.0)) throw UsageError("--rule: delta must be positive");
    return DeltaRule{d};
  }
  throw UsageError("--rule: unknown rule '" + kind + "'");
}

/// zero, mean, star or a number
inline MuPolicy parse_mu(const std::string& s) {
  if (s == "zero") return MuPolicy::zero();
  if (s == "mean") return MuPolicy::mean();
  if (s == "star") return MuPolicy::star();
  return MuPolicy::explicit_value(parse_double(s, "--mu"));
}

inline Order parse_order(int order) {
  if (order == 1) return Order::First;
  if (order == 2) return Order::Second;
  throw UsageError("--order: expected 1 or 2");
}

template <class T>
std::vector<T> parse_list(const std::string& s, const std::string& flag) {
  std::vector<T> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if constexpr (std::is_same_v<T, double>)
      out.push_back(parse_double(item, flag));
    else
      out.push_back(parse_index(item, flag));
  }
  if (out.empty()) throw UsageError(flag + ": empty list");
  return out;
}

template <class T>
std::string join_list(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, double>)
      out += io::format_g17(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

inline std::string bool_text(bool b) { return b ? "true" : "false"; }

// ---------------------------------------------------------------------------
// manifest

/// Resolved flags in order, plus digests of the files they name. `replay`
/// turns the flags back into an argument list.
class Manifest {
 public:
  explicit Manifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

  void flag(const std::string& name, const std::string& value) { flags_.emplace_back(name, value); }

  void input(const std::string& name, const std::string& path) {
    flag(name, path);
    inputs_[name] = {{"path", path}, {"sha256", file_digest(path)}};
  }

  void output(const std::string& path) { outputs_.push_back(path); }

  void seed(std::uint64_t s) { seed_ = s; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "rankone";
    j["version"] = kVersion;
    j["subcommand"] = subcommand_;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : flags_) cfg[k] = v;
    j["config"] = cfg;
    j["inputs"] = inputs_;
    j["seed"] = seed_ ? nlohmann::ordered_json(*seed_) : nlohmann::ordered_json(nullptr);
    j["outputs"] = outputs_;
    return j;
  }

  void write(const std::string& out_path) {
    output(out_path);
    io::atomic_write(out_path + ".manifest.json", to_json().dump(2) + "\n");
  }

 private:
  std::string subcommand_;
  std::vector<std::pair<std::string, std::string>> flags_;
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::object();
  std::vector<std::string> outputs_;
  std::optional<std::uint64_t> seed_;
};

inline nlohmann::ordered_json update_diagnostics(const UpdateResult& r) {
  nlohmann::ordered_json d;
  d["mu_used"] = r.mu_used;
  d["mu_policy_used"] = to_string(r.mu_policy_used);
  d["mu_fallback"] = r.mu_fallback;
  d["s"] = r.s ? nlohmann::ordered_json(*r.s) : nlohmann::ordered_json(nullptr);
  d["residual_mass"] = r.residual_mass;
  d["gram_defect"] = r.gram_defect;
  d["output_gram_defect"] = r.output_gram_defect;
  d["orthogonalized"] = r.orthogonalized;
  d["e_bound"] = r.e_bound ? nlohmann::ordered_json(*r.e_bound) : nlohmann::ordered_json(nullptr);
  d["residual_quality_raw"] =
      r.residual_quality_raw ? nlohmann::ordered_json(*r.residual_quality_raw) : nlohmann::ordered_json(nullptr);
  d["residual_quality"] =
      r.residual_quality ? nlohmann::ordered_json(*r.residual_quality) : nlohmann::ordered_json(nullptr);
  d["deflation"] = {{"kept", r.deflation.kept.size()},
                    {"frozen", r.deflation.frozen.size()},
                    {"merged_groups", r.deflation.merged.size()},
                    {"tau_z", r.deflation.tau_z},
                    {"tau_lambda", r.deflation.tau_lambda}};
  d["root_iterations"] = r.root_iterations;
  d["unchanged"] = r.unchanged;
  d["notes"] = r.notes;
  return d;
}

// ---------------------------------------------------------------------------
// subcommands

struct GraphFlags {
  std::string rule = "knn:10";
  double epsilon = 1.0;
  std::string self_loops = "true";

  void add_to(CLI::App* app) {
    app->add_option("--rule", rule, "neighbor rule: knn:K or delta:D")->capture_default_str();
    app->add_option("--epsilon", epsilon, "Gaussian kernel width")->capture_default_str();
    app->add_option("--self-loops", self_loops, "give every vertex a self loop of weight 1")->capture_default_str();
  }

  GraphConfig resolve() const {
    GraphConfig cfg{parse_rule(rule), epsilon, parse_bool(self_loops, "--self-loops")};
    cfg.validate();
    return cfg;
  }

  void record(Manifest& m) const {
    m.flag("rule", rule);
    m.flag("epsilon", io::format_g17(epsilon));
    m.flag("self-loops", bool_text(parse_bool(self_loops, "--self-loops")));
  }

  static bool parse_bool(const std::string& s, const std::string& flag) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw UsageError(flag + ": expected true or false, got '" + s + "'");
  }
};

struct TruncationFlags {
  int order = 1;
  std::string mu = "zero";

  void add_to(CLI::App* app) {
    app->add_option("--order", order, "truncation order: 1 or 2")->capture_default_str();
    app->add_option("--mu", mu, "surrogate for the unknown eigenvalues: zero, mean, star or a number")
        ->capture_default_str();
  }

  TruncationConfig resolve() const {
    TruncationConfig cfg;
    cfg.order = parse_order(order);
    cfg.mu = parse_mu(mu);
    return cfg;
  }

  void record(Manifest& m) const {
    m.flag("order", std::to_string(order));
    m.flag("mu", mu);
  }
};

inline PointCloud read_single_point(const std::string& path) {
  PointCloud p = read_point_cloud(path);
  if (p.n() != 1) throw Error(Errc::Parse, path + ": expected exactly one point, found " + std::to_string(p.n()));
  return p;
}

class App {
 public:
  App(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(std::vector<std::string> args) {
    CLI::App app{"Rank-one eigenpair updates with partial spectral knowledge"};
    app.name("rankone");
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    // laplacian
    auto* lap = app.add_subcommand("laplacian", "build the symmetric normalized graph Laplacian of a point cloud");
    std::string lap_points, lap_out;
    GraphFlags lap_graph;
    lap->add_option("--points", lap_points, "CSV point cloud")->required();
    lap_graph.add_to(lap);
    lap->add_option("--out", lap_out, "output matrix (sym-coo)")->required();

    // eigs
    auto* eigs = app.add_subcommand("eigs", "leading eigenpairs of a matrix by dense decomposition");
    std::string eigs_matrix, eigs_out;
    Index eigs_m = 0;
    eigs->add_option("--matrix", eigs_matrix, "input matrix (sym-coo)")->required();
    eigs->add_option("--m", eigs_m, "number of leading pairs")->required();
    eigs->add_option("--out", eigs_out, "output eigenpair file")->required();

    // update
    auto* upd = app.add_subcommand("update", "rank-one update of known leading eigenpairs");
    std::string upd_matrix, upd_eigs, upd_v, upd_out, upd_orth = "false";
    double upd_rho = 0.0;
    TruncationFlags upd_trunc;
    upd->add_option("--matrix", upd_matrix, "the matrix A (needed by --mu mean/star and --order 2)");
    upd->add_option("--eigs", upd_eigs, "known eigenpairs of A")->required();
    upd->add_option("--rho", upd_rho, "update weight")->required();
    upd->add_option("--v", upd_v, "update vector file")->required();
    upd_trunc.add_to(upd);
    upd->add_option("--orthogonalize", upd_orth, "re-orthogonalize the estimated vectors")->capture_default_str();
    upd->add_option("--out", upd_out, "output eigenpair file")->required();

    // extend
    auto* ext = app.add_subcommand("extend", "out-of-sample extension of Laplacian eigenpairs to a new point");
    std::string ext_points, ext_new, ext_eigs, ext_out, ext_correct = "true";
    GraphFlags ext_graph;
    TruncationFlags ext_trunc;
    ext->add_option("--points", ext_points, "CSV point cloud")->required();
    ext->add_option("--new-point", ext_new, "CSV file holding the inserted point")->required();
    ext->add_option("--eigs", ext_eigs, "known leading eigenpairs of the cloud's Laplacian")->required();
    ext_graph.add_to(ext);
    ext_trunc.add_to(ext);
    ext->add_option("--correct", ext_correct, "apply the perturbation correction")->capture_default_str();
    ext->add_option("--out", ext_out, "output eigenpair file")->required();

    // experiment
    auto* exp = app.add_subcommand("experiment", "run an accuracy or timing experiment and write CSV");
    std::string exp_kind, exp_out;
    std::optional<std::uint64_t> exp_seed;
    std::optional<Index> exp_n, exp_m, exp_trials, exp_k, exp_dim, exp_clusters, exp_repeats, exp_mln;
    std::optional<double> exp_eps, exp_sep, exp_sigma, exp_rho;
    std::optional<std::string> exp_ks, exp_mu_hats, exp_n_ladder, exp_m_ladder;
    exp->add_option("--kind", exp_kind, "synthetic, graph-sigma, extension or scaling")
        ->required()
        ->check(CLI::IsMember({"synthetic", "graph-sigma", "extension", "scaling"}));
    exp->add_option("--seed", exp_seed, "random seed");
    exp->add_option("--n", exp_n, "matrix size or number of points");
    exp->add_option("--m", exp_m, "number of known eigenpairs");
    exp->add_option("--trials", exp_trials, "independent trials");
    exp->add_option("--rho", exp_rho, "update weight (synthetic, scaling)");
    exp->add_option("--sigma", exp_sigma, "tail standard deviation (synthetic)");
    exp->add_option("--mu-hats", exp_mu_hats, "comma-separated tail means (synthetic)");
    exp->add_option("--k", exp_k, "neighbors (extension)");
    exp->add_option("--ks", exp_ks, "comma-separated neighbor counts (graph-sigma)");
    exp->add_option("--epsilon", exp_eps, "kernel width (graph-sigma, extension)");
    exp->add_option("--dim", exp_dim, "point dimension (graph-sigma, extension)");
    exp->add_option("--clusters", exp_clusters, "mixture components (graph-sigma, extension)");
    exp->add_option("--separation", exp_sep, "spread of mixture centers (graph-sigma, extension)");
    exp->add_option("--n-ladder", exp_n_ladder, "comma-separated sizes (scaling)");
    exp->add_option("--m-ladder", exp_m_ladder, "comma-separated pair counts, or 'none' (scaling)");
    exp->add_option("--m-ladder-n", exp_mln, "size for the m ladder (scaling)");
    exp->add_option("--repeats", exp_repeats, "timed repetitions per point (scaling)");
    exp->add_option("--out", exp_out, "output CSV")->required();

    // replay
    auto* rep = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    std::string rep_manifest;
    rep->add_option("--manifest", rep_manifest, "manifest written by an earlier run")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::ParseError& e) {
      if (e.get_exit_code() == 0) {
        app.exit(e, out_, err_);
        return Ok;
      }
      err_ << "error: " << e.what() << "\n";
      return InputError;
    }

    try {
      if (*lap) return cmd_laplacian(lap_points, lap_graph, lap_out);
      if (*eigs) return cmd_eigs(eigs_matrix, eigs_m, eigs_out);
      if (*upd) return cmd_update(upd_matrix, upd_eigs, upd_rho, upd_v, upd_trunc, upd_orth, upd_out);
      if (*ext) return cmd_extend(ext_points, ext_new, ext_eigs, ext_graph, ext_trunc, ext_correct, ext_out);
      if (*exp) {
        auto spec = lab::ExperimentSpec::defaults(lab::parse_kind(exp_kind));
        if (exp_seed) spec.seed = *exp_seed;
        if (exp_n) spec.n = *exp_n;
        if (exp_m) spec.m = *exp_m;
        if (exp_trials) spec.trials = *exp_trials;
        if (exp_rho) spec.rho = *exp_rho;
        if (exp_sigma) spec.sigma = *exp_sigma;
        if (exp_mu_hats) spec.mu_hats = parse_list<double>(*exp_mu_hats, "--mu-hats");
        if (exp_k) spec.k = *exp_k;
        if (exp_ks) spec.ks = parse_list<Index>(*exp_ks, "--ks");
        if (exp_eps) spec.epsilon = *exp_eps;
        if (exp_dim) spec.dim = *exp_dim;
        if (exp_clusters) spec.clusters = *exp_clusters;
        if (exp_sep) spec.separation = *exp_sep;
        if (exp_n_ladder) spec.n_ladder = parse_list<Index>(*exp_n_ladder, "--n-ladder");
        if (exp_m_ladder)
          spec.m_ladder = *exp_m_ladder == "none" ? std::vector<Index>{} : parse_list<Index>(*exp_m_ladder, "--m-ladder");
        if (exp_mln) spec.m_ladder_n = *exp_mln;
        if (exp_repeats) spec.repeats = *exp_repeats;
        return cmd_experiment(spec, exp_out);
      }
      if (*rep) return cmd_replay(rep_manifest);
    } catch (const UsageError& e) {
      err_ << "error: " << e.what() << "\n";
      return InputError;
    } catch (const Error& e) {
      err_ << "error: " << e.what() << "\n";
      return exit_code_for(e.code());
    } catch (const nlohmann::ordered_json::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return InputError;
    }
    return InputError;
  }

 private:
  int cmd_laplacian(const std::string& points, const GraphFlags& graph, const std::string& out) {
    const GraphConfig cfg = graph.resolve();
    const PointCloud pc = read_point_cloud(points);
    const SymmetricMatrix l = laplacian_of(pc, cfg);
    io::atomic_write(out, io::format_sym_coo(l));
    Manifest m("laplacian");
    m.input("points", points);
    graph.record(m);
    m.flag("out", out);
    m.write(out);
    out_ << "laplacian: n=" << l.n() << " nnz(upper)=" << l.nnz() << " -> " << out << "\n";
    return Ok;
  }

  int cmd_eigs(const std::string& matrix, Index m_count, const std::string& out) {
    const SymmetricMatrix a = io::read_sym_coo(matrix);
    if (m_count < 1 || m_count > a.n()) throw UsageError("--m: must lie in [1, n]");
    const lab::FullEigen e = lab::oracle_eigh(a);
    io::atomic_write(out, io::format_eig(e.values.head(m_count), e.vectors.leftCols(m_count)));
    Manifest m("eigs");
    m.input("matrix", matrix);
    m.flag("m", std::to_string(m_count));
    m.flag("out", out);
    m.write(out);
    out_ << "eigs: " << m_count << " of " << a.n() << " pairs -> " << out << "\n";
    return Ok;
  }

  int cmd_update(const std::string& matrix, const std::string& eigs, double rho, const std::string& vpath,
                 const TruncationFlags& trunc, const std::string& orth, const std::string& out) {
    const TruncationConfig cfg = trunc.resolve();
    const bool orthogonalize = GraphFlags::parse_bool(orth, "--orthogonalize");
    std::optional<SymmetricMatrix> a;
    if (!matrix.empty()) a = io::read_sym_coo(matrix);
    io::EigenFile ef = io::read_eig(eigs);
    std::optional<double> trace;
    if (a) {
      if (a->n() != ef.vectors.rows()) throw Error(Errc::DimensionMismatch, "--matrix and --eigs disagree on n");
      trace = a->trace();
    }
    const PartialEigen eig(std::move(ef.values), std::move(ef.vectors), trace);
    const Vector v = io::read_vector(vpath);
    if (v.size() != eig.n()) throw Error(Errc::DimensionMismatch, "--v has length " + std::to_string(v.size()) +
                                                                      ", expected " + std::to_string(eig.n()));
    UpdateOptions opts;
    opts.orthogonalize = orthogonalize;
    const UpdateResult res = rank_one_update(eig, RankOneUpdate(rho, v), cfg, a ? &*a : nullptr, opts);

    io::atomic_write(out, io::format_eig(res.values, res.vectors));
    auto diag = update_diagnostics(res);
    if (res.unchanged) diag["warnings"] = res.notes;
    io::atomic_write(out + ".diag.json", diag.dump(2) + "\n");
    Manifest m("update");
    if (a) m.input("matrix", matrix);
    m.input("eigs", eigs);
    m.flag("rho", io::format_g17(rho));
    m.input("v", vpath);
    trunc.record(m);
    m.flag("orthogonalize", bool_text(orthogonalize));
    m.flag("out", out);
    m.output(out + ".diag.json");
    m.write(out);
    out_ << "update: " << res.values.size() << " pairs, mu=" << io::format_g17(res.mu_used) << " ("
         << to_string(res.mu_policy_used) << (res.mu_fallback ? ", fallback" : "") << ") -> " << out << "\n";
    for (const auto& note : res.notes) err_ << "note: " << note << "\n";
    return Ok;
  }

  int cmd_extend(const std::string& points, const std::string& new_point, const std::string& eigs,
                 const GraphFlags& graph, const TruncationFlags& trunc, const std::string& correct_flag,
                 const std::string& out) {
    const GraphConfig gcfg = graph.resolve();
    const bool correct = GraphFlags::parse_bool(correct_flag, "--correct");
    ExtendOptions opts;
    opts.truncation = trunc.resolve();
    opts.correct = correct;
    const PointCloud pc = read_point_cloud(points);
    const PointCloud x0 = read_single_point(new_point);
    if (x0.d() != pc.d()) throw Error(Errc::DimensionMismatch, "--new-point dimension differs from --points");
    io::EigenFile ef = io::read_eig(eigs);
    if (ef.vectors.rows() != pc.n()) {
      throw Error(Errc::DimensionMismatch, "--eigs has n=" + std::to_string(ef.vectors.rows()) + " but the cloud has " +
                                               std::to_string(pc.n()) + " points");
    }
    const PartialEigen eig(std::move(ef.values), std::move(ef.vectors));
    const ExtensionResult res = extend_point(pc, x0.point(0), eig, gcfg, opts);

    io::atomic_write(out, io::format_eig(res.corrected_values, res.corrected_vectors));
    io::atomic_write(out + ".uncorrected", io::format_eig(res.uncorrected_values, res.uncorrected_vectors));
    nlohmann::ordered_json diag;
    diag["unchanged"] = res.unchanged;
    diag["rho"] = res.rho;
    diag["power_iterations"] = res.power_iterations;
    diag["power_residual"] = res.power_residual;
    diag["correction_matrix_norm"] = res.correction_matrix_norm;
    diag["corrected"] = res.corrected;
    diag["skipped_terms"] = res.skipped_terms;
    diag["gram_defect"] = res.gram_defect;
    if (!res.unchanged) diag["update"] = update_diagnostics(res.update);
    diag["notes"] = res.notes;
    io::atomic_write(out + ".diag.json", diag.dump(2) + "\n");
    Manifest m("extend");
    m.input("points", points);
    m.input("new-point", new_point);
    m.input("eigs", eigs);
    graph.record(m);
    trunc.record(m);
    m.flag("correct", bool_text(correct));
    m.flag("out", out);
    m.output(out + ".uncorrected");
    m.output(out + ".diag.json");
    m.write(out);
    out_ << "extend: " << res.corrected_values.size() << " pairs"
         << (res.unchanged ? " (new point disconnected, input returned)" : "") << ", rho=" << io::format_g17(res.rho)
         << " -> " << out << "\n";
    return Ok;
  }

  int cmd_experiment(const lab::ExperimentSpec& spec, const std::string& out) {
    spec.validate();
    const lab::ExperimentResult res = lab::run_experiment(spec);
    io::atomic_write(out, lab::to_csv(res.rows));
    Manifest m("experiment");
    m.seed(spec.seed);
    m.flag("kind", lab::to_string(spec.kind));
    m.flag("seed", std::to_string(spec.seed));
    m.flag("n", std::to_string(spec.n));
    m.flag("m", std::to_string(spec.m));
    m.flag("trials", std::to_string(spec.trials));
    m.flag("rho", io::format_g17(spec.rho));
    m.flag("sigma", io::format_g17(spec.sigma));
    m.flag("mu-hats", join_list(spec.mu_hats));
    m.flag("k", std::to_string(spec.k));
    m.flag("ks", join_list(spec.ks));
    m.flag("epsilon", io::format_g17(spec.epsilon));
    m.flag("dim", std::to_string(spec.dim));
    m.flag("clusters", std::to_string(spec.clusters));
    m.flag("separation", io::format_g17(spec.separation));
    m.flag("n-ladder", join_list(spec.n_ladder));
    m.flag("m-ladder", spec.m_ladder.empty() ? std::string("none") : join_list(spec.m_ladder));
    m.flag("m-ladder-n", std::to_string(spec.m_ladder_n));
    m.flag("repeats", std::to_string(spec.repeats));
    m.flag("out", out);
    if (!res.timings.empty()) {
      io::atomic_write(out + ".timing.csv", lab::to_csv(res.timings));
      m.output(out + ".timing.csv");
    }
    m.write(out);
    out_ << "experiment " << lab::to_string(spec.kind) << ": " << res.rows.size() << " rows -> " << out << "\n";
    return Ok;
  }

  int cmd_replay(const std::string& manifest_path) {
    const auto j = nlohmann::ordered_json::parse(io::read_text(manifest_path));
    if (j.at("tool") != "rankone") throw UsageError(manifest_path + ": not a rankone manifest");
    for (const auto& [name, info] : j.at("inputs").items()) {
      const std::string path = info.at("path");
      if (file_digest(path) != info.at("sha256")) {
        throw Error(Errc::Io, "input '" + path + "' changed since the manifest was written");
      }
    }
    std::vector<std::string> args{j.at("subcommand").get<std::string>()};
    for (const auto& [name, value] : j.at("config").items()) {
      args.push_back("--" + name);
      args.push_back(value.get<std::string>());
    }
    return run(args);
  }

  std::ostream& out_;
  std::ostream& err_;
};

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  App app(out, err);
  return app.run(args);
}

}  // namespace rankone::cli
