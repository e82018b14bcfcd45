#include <doctest.h>

#include <cmath>
#include <random>

#include "dance/error.hpp"
#include "dance/estimation.hpp"
#include "dance/sem.hpp"
#include "support.hpp"

using namespace dance;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::Io;
}

Dataset table_dataset() {
  Eigen::MatrixXd m(6, 4);
  m << 1, 2, 3, 4, 2, 1, 0, 5, 3, 5, 2, 2, 4, 3, 7, 1, 5, 8, 1, 0, 6, 4, 4, 3;
  return Dataset({"T", "O", "Z", "W"}, m);
}

/// Gauss-Jordan inverse with partial pivoting on plain vectors.
std::vector<std::vector<double>> gj_inverse(std::vector<std::vector<double>> a) {
  const std::size_t k = a.size();
  std::vector<std::vector<double>> inv(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    std::swap(inv[c], inv[piv]);
    const double d = a[c][c];
    for (std::size_t j = 0; j < k; ++j) {
      a[c][j] /= d;
      inv[c][j] /= d;
    }
    for (std::size_t r = 0; r < k; ++r) {
      if (r == c) continue;
      const double f = a[r][c];
      for (std::size_t j = 0; j < k; ++j) {
        a[r][j] -= f * a[c][j];
        inv[r][j] -= f * inv[c][j];
      }
    }
  }
  return inv;
}

}  // namespace

TEST_CASE("closed forms on a fixed covariance") {
  const CovMatrix c = covariance(table_dataset());
  CHECK(closed_form_ate(c, {"Z", "W"}, "T", "O").delta_hat == doctest::Approx(2.4206349206349205).epsilon(1e-12));
  CHECK(closed_form_ate_alt(c, {"Z", "W"}, "T", "O").delta_hat ==
        doctest::Approx(-0.2857142857142857).epsilon(1e-12));
}

TEST_CASE("closed forms recover delta from the population covariance") {
  for (double delta : {-1.0, 0.0, 0.5, 2.0}) {
    const SemModel m = testing::two_nc_model(delta);
    const CovMatrix pop = population_covariance(m);
    CHECK(closed_form_ate(pop, {"Z", "W"}, "T", "O").delta_hat == doctest::Approx(delta).epsilon(1e-12));
    CHECK(closed_form_ate(pop, {"W", "Z"}, "T", "O").delta_hat == doctest::Approx(delta).epsilon(1e-12));
    CHECK(closed_form_ate_alt(pop, {"Z", "W"}, "T", "O").delta_hat == doctest::Approx(delta).epsilon(1e-12));
  }
}

TEST_CASE("closed form singular denominator") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(4, 4);
  m(0, 1) = m(1, 0) = 0.4;
  const CovMatrix c({"T", "O", "Z", "W"}, m);
  CHECK(kind_of([&] { closed_form_ate(c, {"Z", "W"}, "T", "O"); }) == ErrorKind::SingularDenominator);
  CHECK(kind_of([&] { closed_form_ate(c, {"Z", "Z"}, "T", "O"); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { closed_form_ate(c, {"Z", "T"}, "T", "O"); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("linear bridge without covariates equals the closed form") {
  const SemModel m = testing::two_nc_model();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Dataset d = generate(m, 300 + 100 * s, 40 + s);
    const double cf = closed_form_ate(covariance(d), {"Z", "W"}, "T", "O").delta_hat;
    const AteEstimate g = gmm_linear_ate(d, {"Z", "W"}, "T", "O");
    CHECK(g.delta_hat == doctest::Approx(cf).epsilon(1e-10));
    CHECK(g.method == EstimateMethod::GmmLinear);
    CHECK(g.bridge->delta == g.delta_hat);
  }
  const Dataset t = table_dataset();
  CHECK(gmm_linear_ate(t, {"Z", "W"}, "T", "O").delta_hat == doctest::Approx(2.4206349206349205).epsilon(1e-10));
}

TEST_CASE("moment system: zero at the solution, jacobian by finite differences") {
  const SemModel m = testing::two_nc_model();
  Dataset d = generate(m, 500, 77);
  Eigen::MatrixXd v(d.n(), 5);
  v.leftCols(4) = d.values();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, 4) = nd(rng);
  auto names = d.names();
  names.push_back("X");
  const Dataset dx(names, v);
  const std::vector<std::string> cov{"X"};
  const PairMoments pm = fit_linear_bridge(dx, {"Z", "W"}, "T", "O", cov);
  REQUIRE(pm.theta.size() == 4);
  const Eigen::VectorXd g0 = linear_bridge_gbar(dx, {"Z", "W"}, "T", "O", cov, pm.theta);
  CHECK(g0.cwiseAbs().maxCoeff() < 1e-10);
  CHECK((pm.moments.colwise().mean().transpose() - g0).cwiseAbs().maxCoeff() < 1e-12);
  const double h = 1e-6;
  for (Eigen::Index j = 0; j < 4; ++j) {
    Eigen::VectorXd tp = pm.theta, tm = pm.theta;
    tp(j) += h;
    tm(j) -= h;
    const Eigen::VectorXd fd = (linear_bridge_gbar(dx, {"Z", "W"}, "T", "O", cov, tp) -
                                linear_bridge_gbar(dx, {"Z", "W"}, "T", "O", cov, tm)) / (2 * h);
    CHECK((fd - pm.jacobian.col(j)).cwiseAbs().maxCoeff() < 1e-6 * (1.0 + pm.jacobian.col(j).cwiseAbs().maxCoeff()));
  }
  const AteEstimate est = gmm_linear_ate(dx, {"Z", "W"}, "T", "O", cov);
  CHECK(est.method == EstimateMethod::GmmLinearX);
  CHECK(est.bridge->beta_x.size() == 1);
}

TEST_CASE("sandwich covariance matches a loop oracle") {
  const Dataset d = generate(testing::two_nc_model(), 200, 5);
  const PairMoments pm = fit_linear_bridge(d, {"Z", "W"}, "T", "O");
  const std::size_t k = 3, n = d.n();
  const auto t = d.column("T"), o = d.column("O"), z = d.column("Z"), w = d.column("W");
  std::vector<std::vector<double>> a(k, std::vector<double>(k, 0.0)), s = a;
  for (std::size_t i = 0; i < n; ++i) {
    const double q[3] = {1.0, z(i), t(i)};
    const double r[3] = {1.0, w(i), t(i)};
    const double e = o(i) - (pm.theta(0) + pm.theta(1) * w(i) + pm.theta(2) * t(i));
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t c = 0; c < k; ++c) {
        a[p][c] -= q[p] * r[c] / n;
        s[p][c] += q[p] * q[c] * e * e / n;
      }
  }
  const auto ai = gj_inverse(a);
  double v22 = 0.0;
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t c = 0; c < k; ++c) v22 += ai[2][p] * s[p][c] * ai[2][c];
  v22 /= n;
  const Eigen::MatrixXd v = sandwich_covariance(pm.jacobian, pm.moments);
  CHECK(v(2, 2) == doctest::Approx(v22).epsilon(1e-9));
  CHECK(*gmm_linear_ate(d, {"Z", "W"}, "T", "O").se == doctest::Approx(std::sqrt(v22)).epsilon(1e-9));
  CHECK((v - v.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear bridge refuses a rank-deficient system") {
  const Dataset d = generate(testing::two_nc_model(), 200, 6);
  Eigen::MatrixXd v = d.values();
  v.col(static_cast<Eigen::Index>(d.index_of("Z"))) = d.column("T");
  const Dataset copy(d.names(), v);
  CHECK(kind_of([&] { fit_linear_bridge(copy, {"Z", "W"}, "T", "O"); }) == ErrorKind::SingularMomentMatrix);
  v.col(static_cast<Eigen::Index>(d.index_of("W"))).setConstant(2.0);
  const Dataset constant(d.names(), v);
  CHECK(kind_of([&] { fit_linear_bridge(constant, {"Z", "W"}, "T", "O"); }) == ErrorKind::SingularMomentMatrix);
  CHECK(kind_of([&] { fit_linear_bridge(d, {"Z", "W"}, "T", "O", {"Z"}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("naive OLS with HC0 against the simple-regression formulas") {
  const Dataset d = generate(testing::two_nc_model(), 400, 8);
  const auto t = d.column("T");
  const auto o = d.column("O");
  const double tm = t.mean(), om = o.mean();
  double sxx = 0.0, sxy = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    sxx += (t(i) - tm) * (t(i) - tm);
    sxy += (t(i) - tm) * (o(i) - om);
  }
  const double b = sxy / sxx;
  const double a = om - b * tm;
  double meat = 0.0;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const double e = o(i) - a - b * t(i);
    meat += (t(i) - tm) * (t(i) - tm) * e * e;
  }
  const AteEstimate est = naive_ols_ate(d, "T", "O");
  CHECK(est.delta_hat == doctest::Approx(b).epsilon(1e-12));
  CHECK(*est.se == doctest::Approx(std::sqrt(meat) / sxx).epsilon(1e-9));
  CHECK(*est.ci_low == doctest::Approx(b - kZ95 * *est.se));
  CHECK(*est.ci_high == doctest::Approx(b + kZ95 * *est.se));
}

TEST_CASE("Monte Carlo: the bridge is unbiased where OLS is not, and its se is calibrated") {
  const SemModel m = testing::two_nc_model(0.5);
  const int reps = 300;
  std::vector<double> est, se, ols;
  for (int r = 0; r < reps; ++r) {
    const Dataset d = generate(m, 2000, 9000 + r);
    const AteEstimate g = gmm_linear_ate(d, {"Z", "W"}, "T", "O");
    est.push_back(g.delta_hat);
    se.push_back(*g.se);
    ols.push_back(naive_ols_ate(d, "T", "O").delta_hat);
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double mu = mean(est);
  double ss = 0.0;
  for (double x : est) ss += (x - mu) * (x - mu);
  const double sd = std::sqrt(ss / (reps - 1));
  CHECK(std::fabs(mu - 0.5) < 3.0 * sd / std::sqrt(reps));
  CHECK(mean(se) == doctest::Approx(sd).epsilon(0.15));
  // population OLS slope: cov(T,O)/var(T) = 1.7/1.72
  CHECK(mean(ols) == doctest::Approx(1.7 / 1.72).epsilon(0.02));
}
