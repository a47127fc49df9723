#include <doctest.h>

#include "gaussgrid/kernels.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace gaussgrid;

namespace {

// |a - b|_inf / |b|_inf, with the denominator floored so all-tiny vectors don't blow up
double rel_inf(const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
  const double den = std::max(b.abs().maxCoeff(), 1e-12);
  return (a - b).abs().maxCoeff() / den;
}

}  // namespace

TEST_CASE("Burmann constants") {
  CHECK(ErfConstants::c1 == 31.0 / 200.0);
  CHECK(ErfConstants::c2 == 341.0 / 8000.0);
}

TEST_CASE("erf_approx point values against a high-precision erf") {
  CHECK(erf_approx(0.0) == 0.0);
  CHECK(erf_approx(0.0f) == 0.0f);
  CHECK(std::abs(erf_approx(1.0) - static_cast<double>(oracle::reference_erf(1.0L))) < 5e-3);
  CHECK(erf_approx(1.0) == doctest::Approx(0.8427).epsilon(6e-3));
  CHECK(std::abs(erf_approx(6.0) - 1.0) < 1e-6);
  CHECK(std::abs(erf_approx(-6.0) + 1.0) < 1e-6);
  // the oracle itself against libm
  for (double t = -5.0; t <= 5.0; t += 0.125)
    CHECK(std::abs(static_cast<double>(oracle::reference_erf(t)) - std::erf(t)) < 1e-14);
}

TEST_CASE("erf_approx is odd, bounded and monotone on a dense sample") {
  double prev = -2.0;
  float prevf = -2.0f;
  double worst = 0.0;
  for (int i = -120000; i <= 120000; ++i) {
    const double t = i * 1e-4;
    const double v = erf_approx(t);
    CHECK_MESSAGE(v == -erf_approx(-t), t);
    CHECK(std::abs(v) <= 1.0);
    CHECK(v >= prev);
    prev = v;
    const float tf = static_cast<float>(t);
    const float vf = erf_approx(tf);
    CHECK(vf == -erf_approx(-tf));
    CHECK(std::abs(vf) <= 1.0f);
    CHECK(vf >= prevf);
    prevf = vf;
    worst = std::max(worst, std::abs(v - static_cast<double>(oracle::reference_erf(t))));
  }
  CHECK(worst <= 5e-3);
  CHECK(erf_approx(1e300) == 1.0);
  CHECK(erf_approx(7.0) == 1.0);
  CHECK(erf_approx(-7.1f) == -1.0f);
  CHECK(erf_approx(-1e30f) == -1.0f);
}

TEST_CASE("array erf_approx agrees with the scalar one") {
  Eigen::ArrayXf t = Eigen::ArrayXf::LinSpaced(240001, -12.0f, 12.0f);
  const Eigen::ArrayXf v = erf_approx(t);
  for (Eigen::Index i = 0; i < t.size(); ++i) CHECK(std::abs(v(i) - erf_approx(t(i))) <= 2e-7f);
  CHECK(((v.tail(t.size() - 1) - v.head(t.size() - 1)) >= 0.0f).all());
  CHECK((v == -erf_approx(Eigen::ArrayXf(-t))).all());
}

TEST_CASE("erf_approx_derivative matches finite differences") {
  for (double t = -4.0; t <= 4.0; t += 0.0625) {
    const double h = 1e-6;
    const double fd = (erf_approx(t + h) - erf_approx(t - h)) / (2 * h);
    CHECK(erf_approx_derivative(t) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
  }
  CHECK(erf_approx_derivative(0.0) == doctest::Approx(1.0 + detail::kA - detail::kB));
}

TEST_CASE("one voxel spanning +-6 sigma holds the full mass") {
  const double s = 0.3;
  const auto t = axis_table<double>(0.0, -6 * s, 12 * s, 1, s);
  CHECK(std::abs(t.values(0) - 1.0) < 1e-4);
  CHECK(t.lo == 0);
  CHECK(t.hi == 1);
}

TEST_CASE("particle on a shared edge splits evenly") {
  const double s = 0.3;
  const auto t = axis_table<double>(0.0, -6 * s, 6 * s, 2, s);
  CHECK(std::abs(t.values(0) - 0.5) < 1e-4);
  CHECK(std::abs(t.values(1) - 0.5) < 1e-4);
}

TEST_CASE("axis values match 1D quadrature") {
  const double sigma = 0.5, origin = 0.0, extent = 12.0;
  const Eigen::Index n = 64;
  const double delta = extent / n;
  for (double mu : {6.0, 5.93, 3.1, 8.77}) {
    const auto t = axis_table<float>(mu, origin, delta, n, sigma);
    CHECK(t.support_size() < n);
    CHECK(t.support_size() > 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double q = oracle::gaussian_mass(mu, origin + i * delta, origin + (i + 1) * delta, sigma);
      CHECK(std::abs(t.values(i) - q) < 5e-3);
      if (i < t.lo || i >= t.hi) CHECK(t.values(i) == 0.0f);
    }
    CHECK(t.values.sum() <= 1.0f + 1e-6f);
    CHECK(std::abs(t.values.template cast<double>().sum() - 1.0) < 1e-3);
  }
}

TEST_CASE("support excludes exactly the saturated zeros") {
  const auto t = axis_table<float>(2.0, 0.0, 0.05, 80, 0.1);
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    if (i >= t.lo && i < t.hi) continue;
    CHECK(t.values(i) == 0.0f);
  }
  CHECK(t.values(t.lo) > 0.0f);
  CHECK(t.values(t.hi - 1) > 0.0f);

  const auto thr = axis_table<float>(2.0, 0.0, 0.05, 80, 0.1, 1e-8);
  CHECK(thr.lo >= t.lo);
  CHECK(thr.hi <= t.hi);
  for (Eigen::Index i = thr.lo; i < thr.hi; ++i) CHECK(thr.values(i) >= 1e-8f);
}

TEST_CASE("adjacent voxels share endpoints") {
  // with shared edges the sum telescopes to the two outermost erf values
  const double mu = 1.37, origin = 0.0, delta = 0.1, sigma = 0.2;
  const Eigen::Index n = 30;
  const auto t = axis_table<double>(mu, origin, delta, n, sigma);
  const double s = sigma * std::sqrt(2.0);
  const double ends = 0.5 * (erf_approx((origin + n * delta - mu) / s) - erf_approx((origin - mu) / s));
  CHECK(t.values.sum() == doctest::Approx(ends).epsilon(1e-12));
  CHECK(detail::edge_arguments<double>(mu, origin, delta, n, sigma).size() == n + 1);
}

TEST_CASE("axis_table rejects invalid parameters") {
  CHECK_THROWS_AS(axis_table<float>(0.0, 0.0, 0.0, 4, 0.1), Error);
  CHECK_THROWS_AS(axis_table<float>(0.0, 0.0, 0.1, 0, 0.1), Error);
  CHECK_THROWS_AS(axis_table<float>(0.0, 0.0, 0.1, 4, -0.1), Error);
  CHECK_THROWS_AS(axis_table<float>(NAN, 0.0, 0.1, 4, 0.1), Error);
}

TEST_CASE("periodic axis: wrap symmetry about the origin") {
  const double L = 4.0;
  const Eigen::Index n = 40;
  const auto t = axis_table_periodic<double>(0.0, L, L / n, n, 0.2);
  for (Eigen::Index i = 0; i < n; ++i) CHECK(t.values(i) == doctest::Approx(t.values(n - 1 - i)).epsilon(1e-9));
  CHECK(std::abs(t.values.sum() - 1.0) < 1e-3);
}

TEST_CASE("periodic axis: centred particle equals the open axis") {
  const double L = 4.0;
  const Eigen::Index n = 40;
  const auto p = axis_table_periodic<double>(L / 2, L, L / n, n, 0.2);
  const auto o = axis_table<double>(L / 2, 0.0, L / n, n, 0.2);
  CHECK((p.values - o.values).abs().maxCoeff() < 1e-6);
}

TEST_CASE("periodic axis: matches a wide image sum") {
  const double L = 3.0;
  const Eigen::Index n = 60;
  const double delta = L / n, mu = 0.05 * L, sigma = 0.02 * L;
  const auto t = axis_table_periodic<double>(mu, L, delta, n, sigma);
  const double s = sigma * std::sqrt(2.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    double v = 0.0;
    for (int m = -5; m <= 5; ++m) {
      const double c = mu + m * L;
      v += 0.5 * std::abs(erf_approx(((i + 1) * delta - c) / s) - erf_approx((i * delta - c) / s));
    }
    CHECK(std::abs(t.values(i) - v) < 1e-6);
  }
}

TEST_CASE("periodic axis preconditions") {
  CHECK_THROWS_AS(axis_table_periodic<float>(0.5, 1.0, 0.1, 8, 0.05), Error);  // 8 * 0.1 != 1
  CHECK_THROWS_AS(axis_table_periodic<float>(0.5, 1.0, 0.1, 10, 0.2), Error);  // sigma >= edge / 6
  CHECK_NOTHROW(axis_table_periodic<float>(0.5, 1.0, 0.1, 10, 0.1));
}

TEST_CASE("axis gradient: symmetry and conservation") {
  const double sigma = 0.25;
  // particle at the centre of voxel 10
  const auto g = axis_gradient<double>(1.05, 0.0, 0.1, 21, sigma);
  CHECK(std::abs(g(10)) < 1e-12);
  CHECK(std::abs(g.sum()) < 1e-4);
  const auto g2 = axis_gradient<double>(0.913, -2.0, 0.07, 90, sigma);
  CHECK(std::abs(g2.sum()) < 1e-4);
}

TEST_CASE("axis gradient matches central differences") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    const double sigma = 0.05 + 0.5 * u(rng);
    const Eigen::Index n = 16 + static_cast<Eigen::Index>(48 * u(rng));
    const double delta = (0.5 + u(rng)) * sigma;
    const double origin = -0.5 * n * delta;
    const double mu = origin + n * delta * (0.2 + 0.6 * u(rng));
    const double h = 1e-4 * sigma;
    const Eigen::ArrayXd fd = (axis_table<double>(mu + h, origin, delta, n, sigma).values -
                               axis_table<double>(mu - h, origin, delta, n, sigma).values) /
                              (2 * h);
    const Eigen::ArrayXd g = axis_gradient<double>(mu, origin, delta, n, sigma);
    CHECK(rel_inf(g, fd) < 1e-4);

    const double L = n * delta;
    if (6 * sigma < L) {
      const double mp = u(rng) * L;
      const Eigen::ArrayXd fdp = (axis_table_periodic<double>(mp + h, L, delta, n, sigma).values -
                                  axis_table_periodic<double>(mp - h, L, delta, n, sigma).values) /
                                 (2 * h);
      CHECK(rel_inf(axis_gradient_periodic<double>(mp, L, delta, n, sigma), fdp) < 1e-4);
    }
  }
}
