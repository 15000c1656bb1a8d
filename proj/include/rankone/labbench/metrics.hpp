#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rankone/core.hpp"
#include "rankone/error.hpp"

namespace rankone::lab {

/// Angle in degrees between the lines spanned by p and q, in [0, 90].
/// Evaluated through atan2 so that tiny angles keep full relative accuracy.
inline double eigvec_angle(const Vector& p, const Vector& q) {
  detail::require_dims(p.size() == q.size(), "eigvec_angle: length mismatch");
  const double np = p.norm();
  const double nq = q.norm();
  if (!(np > 0.0) || !(nq > 0.0)) throw Error(Errc::InvalidArgument, "eigvec_angle: zero vector");
  const Vector u = p / np;
  const Vector w = q / nq;
  const double c = u.dot(w);
  const double s = (w - c * u).norm();
  return std::atan2(s, std::abs(c)) * 180.0 / std::numbers::pi;
}

/// ||p - sign * q|| for unit vectors, with the sign that minimizes it.
inline double eigvec_error_norm(const Vector& p, const Vector& q) {
  detail::require_dims(p.size() == q.size(), "eigvec_error_norm: length mismatch");
  return std::min((p - q).norm(), (p + q).norm());
}

inline double max_value_error(const Vector& estimate, const Vector& truth) {
  detail::require_dims(truth.size() >= estimate.size(), "max_value_error: truth too short");
  if (estimate.size() == 0) return 0.0;
  return (estimate - truth.head(estimate.size())).cwiseAbs().maxCoeff();
}

/// Column-wise maximum angle; truth may hold extra columns.
inline double max_angle(const Matrix& estimate, const Matrix& truth) {
  detail::require_dims(truth.rows() == estimate.rows() && truth.cols() >= estimate.cols(),
                       "max_angle: shape mismatch");
  double worst = 0.0;
  for (Index i = 0; i < estimate.cols(); ++i) worst = std::max(worst, eigvec_angle(estimate.col(i), truth.col(i)));
  return worst;
}

inline double max_error_norm(const Matrix& estimate, const Matrix& truth) {
  detail::require_dims(truth.rows() == estimate.rows() && truth.cols() >= estimate.cols(),
                       "max_error_norm: shape mismatch");
  double worst = 0.0;
  for (Index i = 0; i < estimate.cols(); ++i)
    worst = std::max(worst, eigvec_error_norm(estimate.col(i), truth.col(i)));
  return worst;
}

/// Least-squares slope of log2(y) against log2(x). Points with y <= floor
/// (or non-finite) are dropped; NaN if fewer than two remain.
inline double log2_slope(const std::vector<double>& x, const std::vector<double>& y, double floor = 0.0) {
  detail::require_dims(x.size() == y.size(), "log2_slope: length mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > floor) || !std::isfinite(y[i])) continue;
    lx.push_back(std::log2(x[i]));
    ly.push_back(std::log2(y[i]));
  }
  if (lx.size() < 2) return std::nan("");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(ly.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : std::nan("");
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) return std::nan("");
  std::sort(xs.begin(), xs.end());
  const std::size_t h = xs.size() / 2;
  return xs.size() % 2 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
}

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) return std::nan("");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

/// 2^(mean of log2): the aggregate used for error-versus-parameter fits.
inline double geometric_mean(const std::vector<double>& xs) {
  if (xs.empty()) return std::nan("");
  double s = 0.0;
  for (double x : xs) s += std::log2(x);
  return std::exp2(s / static_cast<double>(xs.size()));
}

}  // namespace rankone::lab
