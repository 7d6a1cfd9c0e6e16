#include <catch_amalgamated.hpp>

#include <cmath>

#include "hetcop/truncnorm.hpp"
#include "oracles.hpp"

using namespace hetcop;
using Catch::Matchers::WithinAbs;

TEST_CASE("closed-form moments agree with quadrature on the reference grid") {
  const auto grid = oracle::tn_grid();
  REQUIRE(grid.size() == 200);
  for (const auto& c : grid) {
    const TNMoments got = tn_moments({c.mu0, c.sigma0, c.a, c.b});
    const oracle::Moments want = oracle::truncated_normal(c.mu0, c.sigma0, c.a, c.b);
    INFO("mu0=" << c.mu0 << " sigma0=" << c.sigma0 << " a=" << c.a << " b=" << c.b);
    CHECK(std::abs(got.m1 - want.m1) <= 1e-8 * std::max(std::abs(want.m1), c.sigma0));
    CHECK(std::abs(got.m2 - want.m2) <= 1e-8 * std::max(std::abs(want.m2), c.sigma0 * c.sigma0));
  }
}

TEST_CASE("half-normal mean") {
  CHECK_THAT(tn_moments({0.0, 1.0, 0.0, kInf}).m1, WithinAbs(std::sqrt(2.0 / M_PI), 1e-12));
  CHECK_THAT(tn_moments({0.0, 1.0, 0.0, kInf}).m1, WithinAbs(0.797885, 1e-6));
  CHECK_THAT(tn_moments({0.0, 1.0, 0.0, kInf}).m2, WithinAbs(1.0, 1e-12));
}

TEST_CASE("reflecting the interval negates the mean and keeps the second moment") {
  for (const auto& c : oracle::tn_grid()) {
    const TNMoments a = tn_moments({c.mu0, c.sigma0, c.a, c.b});
    const TNMoments b = tn_moments({-c.mu0, c.sigma0, -c.b, -c.a});
    CHECK_THAT(a.m1, WithinAbs(-b.m1, 1e-10 * std::max(1.0, std::abs(a.m1))));
    CHECK_THAT(a.m2, WithinAbs(b.m2, 1e-10 * std::max(1.0, a.m2)));
  }
}

TEST_CASE("moments stay inside the interval with positive variance") {
  for (const auto& c : oracle::tn_grid()) {
    const TNMoments m = tn_moments({c.mu0, c.sigma0, c.a, c.b});
    CHECK(m.m1 >= c.a);
    CHECK(m.m1 <= c.b);
    CHECK(m.variance() >= 0.0);
    CHECK(m.variance() <= c.sigma0 * c.sigma0 * (1.0 + 1e-12));
  }
}

TEST_CASE("invalid truncated normal parameters are rejected") {
  CHECK_THROWS_AS(tn_moments({0.0, 0.0, -1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(tn_moments({0.0, 1.0, 1.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(tn_moments({0.0, 1.0, 2.0, 1.0}), ValidationError);
}

TEST_CASE("univariate draws respect the box and match the mean") {
  Rng rng(7);
  const TNParams p{1.0, 2.0, 1.5, 4.0};
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = sample_truncated_normal(p, rng);
    REQUIRE(x >= p.a);
    REQUIRE(x <= p.b);
    sum += x;
  }
  const TNMoments m = tn_moments(p);
  CHECK_THAT(sum / n, WithinAbs(m.m1, 5.0 * std::sqrt(m.variance() / n)));
}

TEST_CASE("far-tail draws stay finite and inside the box") {
  Rng rng(3);
  for (const TNParams p : {TNParams{0.0, 1.0, 30.0, kInf}, TNParams{0.0, 1.0, -kInf, -40.0},
                           TNParams{0.0, 1.0, 8.0, 8.001}}) {
    for (int i = 0; i < 1000; ++i) {
      const double x = sample_truncated_normal(p, rng);
      REQUIRE(std::isfinite(x));
      REQUIRE(x >= p.a);
      REQUIRE(x <= p.b);
    }
  }
}

TEST_CASE("unrestricted Gibbs chain reproduces the identity moments") {
  const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::VectorXd lo = Eigen::VectorXd::Constant(3, -kInf);
  const Eigen::VectorXd hi = Eigen::VectorXd::Constant(3, kInf);
  const Eigen::MatrixXd draws = tmvn_gibbs(sigma, lo, hi, 50000, 100, 11);
  const Eigen::VectorXd mean = draws.colwise().mean().transpose();
  const Eigen::MatrixXd cov = draws.transpose() * draws / draws.rows();
  CHECK(mean.cwiseAbs().maxCoeff() < 0.03);
  CHECK((cov - sigma).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("one-dimensional Gibbs chain on the half line gives the half-normal mean") {
  const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(1, 1);
  const Eigen::MatrixXd draws =
      tmvn_gibbs(sigma, Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, kInf), 100000, 10, 5);
  CHECK_THAT(draws.col(0).mean(), WithinAbs(0.7979, 0.01));
}

TEST_CASE("pinned coordinates never move") {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 1.0, 0.5, 0.5, 1.0;
  Eigen::VectorXd lo(2), hi(2);
  lo << 0.3, 0.0;
  hi << 0.3, kInf;
  const Eigen::MatrixXd draws = tmvn_gibbs(sigma, lo, hi, 500, 5, 2);
  CHECK((draws.col(0).array() == 0.3).all());
  CHECK((draws.col(1).array() >= 0.0).all());
}

TEST_CASE("same seed gives identical draws") {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 1.0, -0.4, -0.4, 1.0;
  Eigen::VectorXd lo(2), hi(2);
  lo << -1.0, -kInf;
  hi << 2.0, 0.5;
  CHECK(tmvn_gibbs(sigma, lo, hi, 300, 20, 99) == tmvn_gibbs(sigma, lo, hi, 300, 20, 99));
  CHECK(tmvn_gibbs(sigma, lo, hi, 300, 20, 99) != tmvn_gibbs(sigma, lo, hi, 300, 20, 100));
}

TEST_CASE("bivariate Gibbs moments on a box match quadrature") {
  const double rho = 0.5;
  Eigen::MatrixXd sigma(2, 2);
  sigma << 1.0, rho, rho, 1.0;
  const Eigen::VectorXd lo = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd hi = Eigen::VectorXd::Ones(2);
  const Eigen::MatrixXd draws = tmvn_gibbs(sigma, lo, hi, 200000, 200, 21);
  const oracle::BoxMoments want = oracle::box_moments(rho, 0.0, 1.0, 0.0, 1.0);
  const Eigen::MatrixXd s = draws.transpose() * draws / draws.rows();
  CHECK_THAT(s(0, 0), WithinAbs(want.e11, 0.005));
  CHECK_THAT(s(1, 1), WithinAbs(want.e22, 0.005));
  CHECK_THAT(s(0, 1), WithinAbs(want.e12, 0.005));
}

TEST_CASE("inconsistent bounds and bad correlation matrices are rejected") {
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd lo(2), hi(2);
  lo << 1.0, 0.0;
  hi << 0.0, 1.0;
  CHECK_THROWS_AS(tmvn_gibbs(id, lo, hi, 10, 0, 1), ValidationError);
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 1.2, 1.2, 1.0;
  CHECK_THROWS_AS(tmvn_gibbs(bad, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), 10, 0, 1), NumericalError);
  Eigen::MatrixXd diag2 = Eigen::MatrixXd::Identity(2, 2) * 2.0;
  CHECK_THROWS_AS(tmvn_gibbs(diag2, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2), 10, 0, 1), ValidationError);
}
