#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rankone/core.hpp"

namespace rankone {

enum class Order { First, Second };

inline const char* to_string(Order o) { return o == Order::First ? "first" : "second"; }

enum class MuPolicyKind { Zero, Mean, Star, Explicit };

inline const char* to_string(MuPolicyKind k) {
  switch (k) {
    case MuPolicyKind::Zero: return "zero";
    case MuPolicyKind::Mean: return "mean";
    case MuPolicyKind::Star: return "star";
    case MuPolicyKind::Explicit: return "explicit";
  }
  return "unknown";
}

/// How the surrogate for the unknown eigenvalues is chosen.
struct MuPolicy {
  MuPolicyKind kind = MuPolicyKind::Zero;
  double value = 0.0;  // used by Explicit only

  static MuPolicy zero() { return {MuPolicyKind::Zero, 0.0}; }
  static MuPolicy mean() { return {MuPolicyKind::Mean, 0.0}; }
  static MuPolicy star() { return {MuPolicyKind::Star, 0.0}; }
  static MuPolicy explicit_value(double v) { return {MuPolicyKind::Explicit, v}; }
};

struct TruncationConfig {
  Order order = Order::First;
  MuPolicy mu = MuPolicy::zero();
  double root_tol = 1e-12;
  int max_iters = 200;
  double pole_offset = 1e-9;

  void validate() const {
    if (!(root_tol > 0.0)) throw Error(Errc::InvalidArgument, "root_tol must be positive");
    if (!(pole_offset > 0.0)) throw Error(Errc::InvalidArgument, "pole_offset must be positive");
    if (max_iters < 1) throw Error(Errc::InvalidArgument, "max_iters must be at least 1");
  }
};

/// Data of a truncated secular equation: the known poles, their couplings, and
/// the unknown tail collapsed onto the single pole mu with weight residual_mass.
struct SecularProblem {
  Vector lambdas;
  Vector z;
  double rho = 0.0;
  double mu = 0.0;
  std::optional<double> s;
  double residual_mass = 0.0;

  /// Builds and validates a problem. Without an explicit residual mass the
  /// value 1 - sum z_i^2 (clamped to [0, 1]) is used.
  static SecularProblem make(Vector lambdas, Vector z, double rho, double mu,
                             std::optional<double> s = std::nullopt,
                             std::optional<double> residual_mass = std::nullopt) {
    detail::require_dims(lambdas.size() == z.size(), "SecularProblem: lambdas and z differ in length");
    if (lambdas.size() < 1) throw Error(Errc::InvalidArgument, "SecularProblem: empty");
    for (Index i = 1; i < lambdas.size(); ++i) {
      if (!(lambdas(i) < lambdas(i - 1))) {
        throw Error(Errc::NotDescending, "SecularProblem: poles must be strictly descending",
                    static_cast<std::size_t>(i));
      }
    }
    SecularProblem p;
    p.lambdas = std::move(lambdas);
    p.z = std::move(z);
    p.rho = rho;
    p.mu = mu;
    p.s = s;
    const double mass = residual_mass ? *residual_mass : 1.0 - p.z.squaredNorm();
    p.residual_mass = std::clamp(mass, 0.0, 1.0);
    if (p.residual_mass > 0.0 && !(mu < p.lambdas(p.m() - 1))) {
      throw Error(Errc::InvalidArgument, "mu must lie below the smallest known eigenvalue");
    }
    return p;
  }

  Index m() const { return lambdas.size(); }

  double span() const { return lambdas(0) - lambdas(m() - 1); }

  /// Magnitude used for relative tolerances.
  double scale() const {
    double sc = std::max({std::abs(lambdas(0)), std::abs(lambdas(m() - 1)), std::abs(rho), span()});
    if (residual_mass > 0.0) sc = std::max(sc, std::abs(mu));
    return sc > 0.0 ? sc : 1.0;
  }

  /// Coefficient of the double pole of the second order equation.
  double second_order_weight() const {
    if (!s) throw Error(Errc::MissingS, "second order equation needs s = v^T A (I - QQ^T) v");
    return *s - mu * residual_mass;
  }
};

/// s = v^T A (I - Q Q^T) v, the tail moment sum_{i>m} z_i^2 lambda_i.
/// Evaluated as r^T A r with r the projected residual, which is the same
/// quantity when Q spans eigenvectors and stays symmetric otherwise.
inline double compute_s(const SymmetricMatrix& a, const Matrix& q, const Vector& v) {
  detail::require_dims(a.n() == q.rows() && q.rows() == v.size(), "compute_s: inconsistent dimensions");
  const Vector r = project_residual(q, v);
  return r.dot(a.matvec(r));
}

namespace detail {

inline double mean_of_tail(const PartialEigen& eig, std::optional<double> trace) {
  if (!trace) throw Error(Errc::MissingTrace, "mean policy needs tr(A) (trace hint or matrix)");
  const Index unknown = eig.n() - eig.m();
  if (unknown <= 0) throw Error(Errc::DegenerateResidual, "no unknown eigenvalues: m == n");
  return (*trace - eig.values().sum()) / static_cast<double>(unknown);
}

inline double weighted_tail_mean(double s, double residual_mass) {
  if (residual_mass < 1e-12) {
    throw Error(Errc::DegenerateResidual, "residual mass below 1e-12; weighted tail mean undefined");
  }
  return s / residual_mass;
}

}  // namespace detail

/// Surrogate value for the unknown eigenvalues.
///   Zero     -> 0
///   Mean     -> (tr(A) - sum lambda_i) / (n - m)
///   Star     -> s / ||r||^2, the z-weighted mean of the unknown eigenvalues
///   Explicit -> passes the value through
inline double choose_mu(const MuPolicy& policy, const PartialEigen& eig, const SymmetricMatrix* a = nullptr,
                        const Vector* v = nullptr) {
  switch (policy.kind) {
    case MuPolicyKind::Zero:
      return 0.0;
    case MuPolicyKind::Explicit:
      return policy.value;
    case MuPolicyKind::Mean: {
      std::optional<double> trace = eig.trace_hint();
      if (!trace && a) trace = a->trace();
      return detail::mean_of_tail(eig, trace);
    }
    case MuPolicyKind::Star: {
      if (!a || !v) throw Error(Errc::MissingMatrix, "star policy needs the matrix and the update vector");
      detail::require_dims(v->size() == eig.n() && a->n() == eig.n(), "choose_mu: inconsistent dimensions");
      const Vector r = project_residual(eig.vectors(), *v);
      return detail::weighted_tail_mean(r.dot(a->matvec(r)), r.squaredNorm());
    }
  }
  throw Error(Errc::InvalidArgument, "unknown mu policy");
}

namespace detail {

/// The truncated secular function written in a shifted variable t = origin + tau,
/// so that differences to the pole at `origin` are exact.
class ShiftedSecular {
 public:
  ShiftedSecular(const SecularProblem& p, Order order, double origin)
      : p_(p), delta_(p.lambdas.array() - origin), zsq_(p.z.array().square()), delta_mu_(p.mu - origin) {
    c2_ = order == Order::Second ? p.second_order_weight() : 0.0;
    tail_active_ = p.residual_mass > 0.0 || c2_ != 0.0;
  }

  double value(double tau) const {
    double sum = 0.0;
    for (Index i = 0; i < delta_.size(); ++i) sum += zsq_(i) / (delta_(i) - tau);
    if (tail_active_) {
      const double d = delta_mu_ - tau;
      sum += p_.residual_mass / d - c2_ / (d * d);
    }
    return 1.0 + p_.rho * sum;
  }

  double derivative(double tau) const {
    double sum = 0.0;
    for (Index i = 0; i < delta_.size(); ++i) {
      const double d = delta_(i) - tau;
      sum += zsq_(i) / (d * d);
    }
    if (tail_active_) {
      const double d = delta_mu_ - tau;
      sum += p_.residual_mass / (d * d) - 2.0 * c2_ / (d * d * d);
    }
    return p_.rho * sum;
  }

  bool tail_active() const { return tail_active_; }

 private:
  const SecularProblem& p_;
  Vector delta_;
  Vector zsq_;
  double delta_mu_;
  double c2_ = 0.0;
  bool tail_active_ = false;
};

inline void check_not_pole(double t, const SecularProblem& p, double pole_offset, bool tail_active) {
  const double tol = pole_offset * p.scale();
  for (Index i = 0; i < p.m(); ++i) {
    if (std::abs(t - p.lambdas(i)) <= tol) {
      throw Error(Errc::PoleEvaluation, "evaluation at a known eigenvalue", static_cast<std::size_t>(i));
    }
  }
  if (tail_active && std::abs(t - p.mu) <= tol) throw Error(Errc::PoleEvaluation, "evaluation at mu");
}

inline int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace detail

/// First order truncated secular function
///   w1(t) = 1 + rho (sum_i z_i^2 / (lambda_i - t) + residual_mass / (mu - t)).
inline double eval_w1(double t, const SecularProblem& p, double pole_offset = 1e-9) {
  detail::ShiftedSecular f(p, Order::First, 0.0);
  detail::check_not_pole(t, p, pole_offset, f.tail_active());
  return f.value(t);
}

/// Second order truncated secular function: w1 minus
/// rho (s - mu residual_mass) / (mu - t)^2.
inline double eval_w2(double t, const SecularProblem& p, double pole_offset = 1e-9) {
  detail::ShiftedSecular f(p, Order::Second, 0.0);
  detail::check_not_pole(t, p, pole_offset, f.tail_active());
  return f.value(t);
}

/// Roots with their position relative to a nearby pole, so that
/// lambda_j - t_i can be formed without cancellation.
struct SecularRoots {
  Vector values;
  Vector origin;
  Vector offset;
  std::vector<Index> origin_pole;  // index of the pole used as origin, -1 if none
  std::vector<int> iterations;

  Index size() const { return values.size(); }

  /// lambda_j - t_i for every known pole j (rows) and root i (columns).
  Matrix pole_gaps(const Vector& lambdas) const {
    Matrix g(lambdas.size(), values.size());
    for (Index i = 0; i < values.size(); ++i) {
      for (Index j = 0; j < lambdas.size(); ++j) {
        g(j, i) = origin_pole[static_cast<std::size_t>(i)] == j ? -offset(i)
                                                                : (lambdas(j) - origin(i)) - offset(i);
      }
    }
    return g;
  }

  /// mu - t_i.
  Vector mu_gaps(double mu) const {
    Vector g(values.size());
    for (Index i = 0; i < values.size(); ++i) g(i) = (mu - origin(i)) - offset(i);
    return g;
  }
};

namespace detail {

struct BracketEnd {
  double t;
  bool is_pole;  // the function diverges here; never evaluated exactly
  int sign;      // sign of the function next to / at this end
};

class RootSolver {
 public:
  RootSolver(const SecularProblem& p, const TruncationConfig& cfg) : p_(p), cfg_(cfg) {}

  /// Finds the root strictly between `lo` and `hi`. At least one end is a pole,
  /// and `pole_index` gives the pole to use as origin when it is unique.
  void solve(const BracketEnd& lo, const BracketEnd& hi, Index lo_pole, Index hi_pole, std::size_t bracket,
             SecularRoots& out, Index slot) const {
    // Origin: the pole closer to the root.
    double origin = 0.0;
    Index origin_pole = -1;
    if (lo.is_pole && hi.is_pole) {
      ShiftedSecular f(p_, cfg_.order, lo.t);
      const double mid = 0.5 * (hi.t - lo.t);
      const double fm = f.value(mid);
      if (fm == 0.0) {
        store(out, slot, lo.t, lo_pole, mid, 0);
        return;
      }
      const bool lower_half = sign_of(fm) == hi.sign;
      origin = lower_half ? lo.t : hi.t;
      origin_pole = lower_half ? lo_pole : hi_pole;
    } else if (lo.is_pole) {
      origin = lo.t;
      origin_pole = lo_pole;
    } else {
      origin = hi.t;
      origin_pole = hi_pole;
    }
    ShiftedSecular f(p_, cfg_.order, origin);

    const double width = hi.t - lo.t;
    double a = lo.t - origin;
    double b = hi.t - origin;
    if (lo.is_pole) a = pull_in(f, a, +1, width, lo.sign, bracket);
    if (hi.is_pole) b = pull_in(f, b, -1, width, hi.sign, bracket);
    if (a == b) {
      store(out, slot, origin, origin_pole, a, 0);
      return;
    }
    const int sa = lo.sign;

    double tau = 0.5 * (a + b);
    if (lo.is_pole && hi.is_pole) tau = origin == lo.t ? 0.25 * (a + b) + 0.5 * a : 0.25 * (a + b) + 0.5 * b;
    tau = std::clamp(tau, std::min(a, b), std::max(a, b));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    for (int it = 1; it <= cfg_.max_iters; ++it) {
      const double fv = f.value(tau);
      if (fv == 0.0 || !std::isfinite(fv)) {
        store(out, slot, origin, origin_pole, tau, it);
        return;
      }
      if (sign_of(fv) == sa) a = tau; else b = tau;
      const double d = f.derivative(tau);
      double next = tau - fv / d;
      if (!std::isfinite(next) || !(next > std::min(a, b) && next < std::max(a, b))) next = 0.5 * (a + b);
      const double step = std::abs(next - tau);
      if (step <= cfg_.root_tol * std::max(std::abs(next), std::abs(tau)) ||
          std::abs(b - a) <= 2.0 * eps * std::max(std::abs(a), std::abs(b))) {
        store(out, slot, origin, origin_pole, next, it);
        return;
      }
      tau = next;
    }
    throw Error(Errc::MaxIterations, "secular root did not converge", bracket);
  }

 private:
  /// Moves a pole endpoint into the bracket by pole_offset * width, shrinking
  /// the offset while the sign there disagrees with the pole's limit.
  double pull_in(const ShiftedSecular& f, double end, int direction, double width, int expected_sign,
                 std::size_t bracket) const {
    double off = cfg_.pole_offset * width;
    for (int attempt = 0; attempt < 8; ++attempt) {
      const double t = end + direction * off;
      const double fv = f.value(t);
      if (sign_of(fv) == expected_sign) return t;
      off *= 1e-4;
      if (off == 0.0) break;
    }
    throw Error(Errc::NoSignChange, "no sign change inside the bracket after pulling in from the pole",
                bracket);
  }

  static void store(SecularRoots& out, Index slot, double origin, Index pole, double tau, int iters) {
    out.values(slot) = origin + tau;
    out.origin(slot) = origin;
    out.offset(slot) = tau;
    out.origin_pole[static_cast<std::size_t>(slot)] = pole;
    out.iterations[static_cast<std::size_t>(slot)] = iters;
  }

  const SecularProblem& p_;
  const TruncationConfig& cfg_;
};

}  // namespace detail

/// The m largest roots of the truncated secular equation (first or second
/// order per cfg.order), descending, with their shifted representation.
///
/// rho > 0: one root in each (lambda_k, lambda_{k-1}), k >= 2, and one above
/// lambda_1 (in (lambda_1, lambda_1 + rho] for w1; w2 may sit slightly higher).
/// rho < 0: one root in each (lambda_{k+1}, lambda_k), k < m, and the last one
/// below lambda_m, located by sweeping downward: geometrically shrinking
/// distances to lambda_m first, then uniform steps of the mean gap.
inline SecularRoots solve_roots_detailed(const SecularProblem& p, const TruncationConfig& cfg) {
  cfg.validate();
  if (p.rho == 0.0) throw Error(Errc::InvalidArgument, "solve_roots: rho must be nonzero");
  if (cfg.order == Order::Second && !p.s) throw Error(Errc::MissingS, "second order equation needs s");
  const Index m = p.m();
  SecularRoots out;
  out.values.resize(m);
  out.origin.resize(m);
  out.offset.resize(m);
  out.origin_pole.assign(static_cast<std::size_t>(m), -1);
  out.iterations.assign(static_cast<std::size_t>(m), 0);
  detail::RootSolver solver(p, cfg);
  const auto& lam = p.lambdas;
  using detail::BracketEnd;

  if (p.rho > 0.0) {
    // increasing between poles: -inf just above a pole, +inf just below
    for (Index k = 1; k < m; ++k) {
      solver.solve(BracketEnd{lam(k), true, -1}, BracketEnd{lam(k - 1), true, +1}, k, k - 1,
                   static_cast<std::size_t>(k), out, k);
    }
    detail::ShiftedSecular f(p, cfg.order, lam(0));
    double reach = p.rho;
    double fv = f.value(reach);
    for (int grow = 0; fv < 0.0 && grow < 64; ++grow) {
      reach *= 2.0;
      fv = f.value(reach);
    }
    if (fv < 0.0 || !std::isfinite(fv)) {
      throw Error(Errc::NoSignChange, "no sign change above the largest known eigenvalue", 0);
    }
    if (fv == 0.0) {
      out.values(0) = lam(0) + reach;
      out.origin(0) = lam(0);
      out.offset(0) = reach;
      out.origin_pole[0] = 0;
    } else {
      solver.solve(BracketEnd{lam(0), true, -1}, BracketEnd{lam(0) + reach, false, +1}, 0, -1, 0, out, 0);
    }
    return out;
  }

  // rho < 0: decreasing between poles, +inf just above a pole, -inf just below.
  for (Index k = 0; k + 1 < m; ++k) {
    solver.solve(BracketEnd{lam(k + 1), true, +1}, BracketEnd{lam(k), true, -1}, k + 1, k,
                 static_cast<std::size_t>(k), out, k);
  }
  const Index last = m - 1;
  detail::ShiftedSecular f(p, cfg.order, lam(last));
  const double span = p.span();
  const double step = (m >= 2 && span > 0.0) ? span / static_cast<double>(m - 1) : std::abs(p.rho);
  const bool tail = f.tail_active();
  const double mu_shift = p.mu - lam(last);
  const double floor_t = std::min(tail ? p.mu : lam(last), lam(last) - std::abs(p.rho)) - span - step;
  const double floor_tau = floor_t - lam(last);
  const double mu_gap_off = cfg.pole_offset * std::max(step, std::abs(mu_shift));

  BracketEnd upper{lam(last), true, -1};
  double prev_tau = 0.0;
  bool prev_is_pole = true;
  bool crossed_mu = !tail || mu_shift >= 0.0;
  // geometric approach to the pole first, then uniform steps of the mean gap
  constexpr int kGeometric = 20;
  for (int j = 1; j < 100000; ++j) {
    double tau = j <= kGeometric ? -step * std::ldexp(1.0, j - kGeometric - 1) : prev_tau - step;
    if (tau >= prev_tau) tau = prev_tau - step;
    if (!crossed_mu && tau <= mu_shift + mu_gap_off) {
      tau = mu_shift + mu_gap_off;
      if (tau >= prev_tau) tau = 0.5 * (prev_tau + mu_shift);
    }
    const double fv = f.value(tau);
    if (fv == 0.0) {
      out.values(last) = lam(last) + tau;
      out.origin(last) = lam(last);
      out.offset(last) = tau;
      out.origin_pole[static_cast<std::size_t>(last)] = last;
      return out;
    }
    if (fv > 0.0) {
      solver.solve(BracketEnd{lam(last) + tau, false, +1}, upper, -1, prev_is_pole ? last : -1,
                   static_cast<std::size_t>(last), out, last);
      if (!prev_is_pole) {
        // re-express relative to the pole at lambda_m for consistent gaps
        const double t = out.values(last);
        out.origin(last) = lam(last);
        out.offset(last) = t - lam(last);
        out.origin_pole[static_cast<std::size_t>(last)] = last;
      }
      return out;
    }
    if (!crossed_mu && tau <= mu_shift + mu_gap_off) {
      // no root between mu and lambda_m; continue below the pole at mu
      crossed_mu = true;
      tau = mu_shift - mu_gap_off;
      const double fb = f.value(tau);
      upper = BracketEnd{lam(last) + tau, false, detail::sign_of(fb)};
      if (fb > 0.0) {
        throw Error(Errc::NoSignChange, "sign structure around mu does not isolate a root",
                    static_cast<std::size_t>(last));
      }
      prev_tau = tau;
      prev_is_pole = false;
      continue;
    }
    upper = BracketEnd{lam(last) + tau, false, -1};
    prev_tau = tau;
    prev_is_pole = false;
    if (tau < floor_tau) break;
  }
  throw Error(Errc::NoSignChange, "downward sweep found no root below the smallest known eigenvalue",
              static_cast<std::size_t>(last));
}

inline Vector solve_roots(const SecularProblem& p, const TruncationConfig& cfg) {
  return solve_roots_detailed(p, cfg).values;
}

}  // namespace rankone
