#pragma once

// Per-axis building blocks of the voxel-filling function. The 3D Gaussian
// integrated over a voxel factors into one erf difference per axis, so every
// grid operation reduces to 1D tables of length N_axis.

#include "gaussgrid/core.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <numbers>
#include <optional>

namespace gaussgrid {

/// Coefficients of the three-term Bürmann series for erf.
struct ErfConstants {
  static constexpr double c1 = 31.0 / 200.0;
  static constexpr double c2 = 341.0 / 8000.0;
};

namespace detail {

inline constexpr double kTwoOverSqrtPi = 2.0 / 1.7724538509055160273;  // 2/sqrt(pi)
// erf(t) ~ sgn(t) sqrt(1-e) (1 + kA e - kB e^2), e = exp(-t^2)
inline constexpr double kA = kTwoOverSqrtPi * ErfConstants::c1;
inline constexpr double kB = kTwoOverSqrtPi * ErfConstants::c2;

inline void check_axis(double mu, double delta, Eigen::Index n, double sigma) {
  if (!std::isfinite(mu)) throw Error("particle coordinate is not finite");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw Error("voxel width must be positive");
  if (n < 1) throw Error("axis must have at least one voxel");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error("sigma must be positive");
}

/// erf arguments at the n + 1 voxel edges. The particle offset is formed in
/// double before rounding to Scalar, so translating particle and origin by the
/// same exactly-representable vector reproduces the same arguments.
template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> edge_arguments(double mu, double origin, double delta,
                                                       Eigen::Index n, double sigma) {
  const double rel = mu - origin;
  const double inv = 1.0 / (sigma * std::numbers::sqrt2);
  Eigen::Array<Scalar, Eigen::Dynamic, 1> t(n + 1);
  for (Eigen::Index i = 0; i <= n; ++i) t(i) = static_cast<Scalar>((static_cast<double>(i) * delta - rel) * inv);
  return t;
}

inline double wrap_into_cell(double x, double edge) {
  double w = x - std::floor(x / edge) * edge;
  if (w >= edge) w -= edge;
  return w < 0.0 ? 0.0 : w;
}

}  // namespace detail

namespace detail {

// erf_approx is evaluated one precision up and rounded once: the product of a
// rising and a falling factor otherwise wobbles by an ulp near +-1.
template <typename Scalar>
using ErfWide = std::conditional_t<std::is_same_v<Scalar, float>, double, long double>;

// Past t^2 = 50 the result is exactly 1 even in long double; clamping keeps exp
// out of its slow subnormal range.
inline constexpr double kSaturatedSquare = 50.0;

template <typename W>
W erf_approx_wide(W t) {
  using std::exp;
  using std::sqrt;
  const W e = exp(-std::min(t * t, W(kSaturatedSquare)));
  W v = sqrt(W(1) - e) * (W(1) + e * (W(kA) - W(kB) * e));
  v = std::min(v, W(1));
  return t < W(0) ? -v : v;
}

}  // namespace detail

/// Three-term Bürmann approximation of erf. Odd, bounded by 1 and saturating
/// to exactly +-1 in the tails.
template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
Scalar erf_approx(Scalar t) {
  using W = detail::ErfWide<Scalar>;
  return static_cast<Scalar>(detail::erf_approx_wide(static_cast<W>(t)));
}

/// Coefficient-wise erf_approx. The float case vectorizes through Eigen's
/// packet exp/sqrt in double.
template <typename Derived>
Eigen::Array<typename Derived::Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime> erf_approx(
    const Eigen::ArrayBase<Derived>& t) {
  using Scalar = typename Derived::Scalar;
  if constexpr (std::is_same_v<Scalar, float>) {
    using Wide = Eigen::Array<double, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
    const Wide x = t.template cast<double>();
    const Wide e = (-x.square().min(detail::kSaturatedSquare)).exp();
    const Wide v = ((1.0 - e).sqrt() * (1.0 + e * (detail::kA - detail::kB * e))).min(1.0);
    return (x < 0.0).select(-v, v).template cast<float>();
  } else {
    return t.unaryExpr([](Scalar x) { return erf_approx(x); }).eval();
  }
}

/// d/dt of erf_approx. Even in t; equals 1 + kA - kB at t = 0.
template <typename Scalar>
  requires std::is_floating_point_v<Scalar>
Scalar erf_approx_derivative(Scalar t) {
  using std::abs;
  using std::exp;
  using std::expm1;
  using std::sqrt;
  const Scalar u = abs(t);
  const Scalar u2 = u * u;
  const Scalar e = exp(-u2);
  const Scalar one_minus_e = -expm1(-u2);
  const Scalar root = sqrt(one_minus_e);
  const Scalar ratio = one_minus_e > Scalar(0) ? u / root : Scalar(1);  // u / sqrt(1 - e^{-u^2}) -> 1
  const Scalar a = Scalar(detail::kA);
  const Scalar b = Scalar(detail::kB);
  const Scalar bracket = Scalar(1) + e * (a - b * e);
  return e * (ratio * bracket - Scalar(2) * u * root * (a - Scalar(2) * b * e));
}

/// 1D Gaussian masses of one particle over the voxels of one axis, plus the
/// half-open support [lo, hi) outside which every value is zero (or below the
/// truncation threshold).
template <typename Scalar>
struct AxisTable {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Array values;
  Eigen::Index lo = 0;
  Eigen::Index hi = 0;

  Eigen::Index size() const { return values.size(); }
  Eigen::Index support_size() const { return hi - lo; }
  bool empty() const { return hi <= lo; }
};

/// Values below `threshold` are treated as outside the support. Without a
/// threshold only exact zeros (saturated erf differences) are skipped.
template <typename Scalar>
void find_support(AxisTable<Scalar>& table, std::optional<double> threshold = std::nullopt) {
  const Scalar cut = threshold ? static_cast<Scalar>(*threshold) : Scalar(0);
  auto keep = [&](Scalar v) { return v > Scalar(0) && v >= cut; };
  const Eigen::Index n = table.values.size();
  Eigen::Index lo = 0;
  while (lo < n && !keep(table.values(lo))) ++lo;
  Eigen::Index hi = n;
  while (hi > lo && !keep(table.values(hi - 1))) --hi;
  if (lo == hi) lo = hi = 0;
  table.lo = lo;
  table.hi = hi;
}

/// values[i] = |erf_approx((x_i + delta - mu) / (sigma sqrt 2)) - erf_approx((x_i - mu) / (sigma sqrt 2))| / 2
/// with x_i = origin + i * delta. erf is evaluated once per edge (n + 1 times).
template <typename Scalar>
AxisTable<Scalar> axis_table(double mu, double origin, double delta, Eigen::Index n, double sigma,
                             std::optional<double> threshold = std::nullopt) {
  detail::check_axis(mu, delta, n, sigma);
  const auto edges = erf_approx(detail::edge_arguments<Scalar>(mu, origin, delta, n, sigma));
  AxisTable<Scalar> table;
  table.values = (Scalar(0.5) * (edges.tail(n) - edges.head(n))).abs();
  find_support(table, threshold);
  return table;
}

/// Axis table on a periodic axis [0, edge): sum of the tables of the images
/// mu - edge, mu, mu + edge. Requires sigma < edge / 6 and n * delta == edge.
template <typename Scalar>
AxisTable<Scalar> axis_table_periodic(double mu, double edge, double delta, Eigen::Index n, double sigma,
                                      std::optional<double> threshold = std::nullopt) {
  detail::check_axis(mu, delta, n, sigma);
  if (!(edge > 0.0) || std::abs(static_cast<double>(n) * delta - edge) > 1e-9 * edge)
    throw Error("periodic axis must span exactly one cell edge");
  if (!(6.0 * sigma < edge)) throw Error("sigma too large for periodic cell (need sigma < edge / 6)");

  const double wrapped = detail::wrap_into_cell(mu, edge);
  AxisTable<Scalar> table;
  table.values = AxisTable<Scalar>::Array::Zero(n);
  for (int m = -1; m <= 1; ++m) {
    const auto edges = erf_approx(detail::edge_arguments<Scalar>(wrapped + m * edge, 0.0, delta, n, sigma));
    table.values += (Scalar(0.5) * (edges.tail(n) - edges.head(n))).abs();
  }
  find_support(table, threshold);
  return table;
}

/// d(values[i]) / d(mu) of axis_table, analytically.
template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> axis_gradient(double mu, double origin, double delta, Eigen::Index n,
                                                      double sigma) {
  detail::check_axis(mu, delta, n, sigma);
  const auto t = detail::edge_arguments<Scalar>(mu, origin, delta, n, sigma);
  const auto d = t.unaryExpr([](Scalar x) { return erf_approx_derivative(x); }).eval();
  const Scalar scale = static_cast<Scalar>(0.5 / (sigma * std::numbers::sqrt2));
  return scale * (d.head(n) - d.tail(n));
}

/// d(values[i]) / d(mu) of axis_table_periodic.
template <typename Scalar>
Eigen::Array<Scalar, Eigen::Dynamic, 1> axis_gradient_periodic(double mu, double edge, double delta,
                                                               Eigen::Index n, double sigma) {
  detail::check_axis(mu, delta, n, sigma);
  if (!(6.0 * sigma < edge)) throw Error("sigma too large for periodic cell (need sigma < edge / 6)");
  const double wrapped = detail::wrap_into_cell(mu, edge);
  Eigen::Array<Scalar, Eigen::Dynamic, 1> g = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(n);
  for (int m = -1; m <= 1; ++m) g += axis_gradient<Scalar>(wrapped + m * edge, 0.0, delta, n, sigma);
  return g;
}

}  // namespace gaussgrid
