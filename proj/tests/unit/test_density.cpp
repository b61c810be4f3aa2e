#include <doctest.h>

#include <cmath>
#include <numbers>

#include "collapse_lab/criteria.hpp"
#include "collapse_lab/density.hpp"

using namespace collapse;

TEST_CASE("standard normal quantile") {
  CHECK(std::abs(std_normal_quantile(0.5)) < 1e-15);
  // Phi(1) from erf.
  const double q1 = 0.5 * (1.0 + std::erf(1.0 / std::numbers::sqrt2));
  CHECK(std::abs(std_normal_quantile(q1) - 1.0) < 1e-9);
  CHECK(std::abs(std_normal_quantile(0.8413447461) - 1.0) < 1e-9);
  // Dyadic levels so 1 - q is exact.
  for (double q : {0x1p-40, 0x1p-17, 0x1p-7, 0.125, 0.375, 0.4375}) {
    CHECK(std_normal_quantile(q) == -std_normal_quantile(1.0 - q));
  }
  for (double q : {1e-12, 1e-5, 0.01, 0.2, 0.37, 0.49}) {
    CHECK(std_normal_cdf(std_normal_quantile(q)) == doctest::Approx(q).epsilon(1e-12));
  }
  CHECK_THROWS_AS(std_normal_quantile(0.0), DomainError);
  CHECK_THROWS_AS(std_normal_quantile(1.0), DomainError);
}

TEST_CASE("quantile initialization") {
  {
    auto [s, p] = quantile_init({UniformDensity{0.0, 1.0}, 1.0}, 3, 0.5);
    CHECK(s.x[0] == doctest::Approx(0.25));
    CHECK(s.x[1] == doctest::Approx(0.5));
    CHECK(s.x[2] == doctest::Approx(0.75));
    CHECK(p.h() == doctest::Approx(0.25));
  }
  {
    auto [s, p] = quantile_init({GaussianDensity{0.0, 1.0}, 1.0}, 3, 0.5);
    CHECK(s.x[0] == doctest::Approx(-0.6744898).epsilon(1e-7));
    CHECK(std::abs(s.x[1]) < 1e-15);
    CHECK(s.x[2] == doctest::Approx(0.6744898).epsilon(1e-7));
  }
  {
    // h |X|^2 for the unit Gaussian; reference values from scipy.stats.norm.ppf.
    auto [s1, p1] = quantile_init({GaussianDensity{0.0, 1.0}, 1.0}, 1000, 0.5);
    CHECK(p1.h() * second_moment(s1) == doctest::Approx(0.987047872166816).epsilon(1e-9));
    auto [s3, p3] = quantile_init({GaussianDensity{0.0, 1.0}, 1.0}, 3000, 0.5);
    CHECK(p3.h() * second_moment(s3) == doctest::Approx(0.9949921590151308).epsilon(1e-9));
    CHECK(std::abs(p3.h() * second_moment(s3) - 1.0) < 0.01);
  }
  CHECK_THROWS_AS(quantile_init({GaussianDensity{0.0, -1.0}, 1.0}, 3, 0.5), DomainError);
  CHECK_THROWS_AS(quantile_init({UniformDensity{1.0, 1.0}, 1.0}, 3, 0.5), DomainError);
}

TEST_CASE("gaussian closed forms") {
  for (double sigma : {0.1, 0.5, 1.0, 3.0}) {
    for (double gamma : {0.1, 0.5, 0.9}) {
      const double mass = 1.7;
      const ContinuousReport r = continuous_report({GaussianDensity{0.3, sigma}, mass}, gamma);
      CHECK(r.centered_second_moment == doctest::Approx(mass * sigma * sigma));
      CHECK(r.second_moment == doctest::Approx(mass * (0.09 + sigma * sigma)));
      CHECK(r.entropy == doctest::Approx(
                             mass * std::log(mass / (sigma * std::sqrt(2.0 * std::numbers::pi *
                                                                       std::numbers::e)))));
      const double exact = gaussian_pair_moment_exact({0.3, sigma}, mass, gamma) / gamma;
      CHECK(r.interaction == doctest::Approx(exact).epsilon(1e-9));
      CHECK(r.energy == doctest::Approx(r.entropy - 0.5 * r.interaction));
    }
  }
  // Unit Gaussian, M = 1: entropy = -log(sqrt(2 pi e)).
  const ContinuousReport unit = continuous_report({GaussianDensity{0.0, 1.0}, 1.0}, 0.5);
  CHECK(unit.entropy == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e)));
  CHECK(unit.threshold_w == doctest::Approx(0.03125));
}

TEST_CASE("uniform interaction against a midpoint rule") {
  const double a = -0.4, b = 1.1, mass = 0.8, gamma = 0.35;
  const ContinuousReport r = continuous_report({UniformDensity{a, b}, mass}, gamma);
  // pair moment = M^2 int_0^L 2 (L - z) / L^2 z^-gamma dz, with z = s^(1/(1-gamma)).
  const double len = b - a;
  const double p = 1.0 / (1.0 - gamma);
  const int steps = 200000;
  double acc = 0.0;
  const double top = std::pow(len, 1.0 - gamma);
  for (int k = 0; k < steps; ++k) {
    const double s = (k + 0.5) * top / steps;
    const double z = std::pow(s, p);
    acc += 2.0 * (len - z) / (len * len) * p;
  }
  acc *= top / steps;
  CHECK(r.interaction == doctest::Approx(mass * mass * acc / gamma).epsilon(1e-8));
  CHECK(r.centered_second_moment == doctest::Approx(mass * len * len / 12.0));
  CHECK(r.entropy == doctest::Approx(mass * std::log(mass / len)));
}

TEST_CASE("lower bounds on the gaussian family") {
  for (double sigma : {0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0}) {
    for (double mass : {0.5, 1.0, 3.0}) {
      const double gamma = 0.5;
      const ContinuousReport r = continuous_report({GaussianDensity{0.0, sigma}, mass}, gamma);
      const double i = r.centered_second_moment;
      const double w_bound = std::pow(2.0, -gamma / 2.0) * std::pow(mass, 2.0 + gamma / 2.0) *
                             std::pow(i, -gamma / 2.0);
      CHECK(gamma * r.interaction >= w_bound * (1.0 - 1e-12));
      const double u_bound = -0.5 * mass * std::log(i) +
                             0.5 * mass *
                                 std::log(mass * mass * mass /
                                          (2.0 * std::numbers::pi * std::numbers::e));
      // Equality for Gaussians.
      CHECK(r.entropy == doctest::Approx(u_bound).epsilon(1e-12));
    }
  }
}

TEST_CASE("continuous criteria") {
  const ContinuousReport narrow = continuous_report({GaussianDensity{0.0, 0.01}, 1.0}, 0.5);
  CHECK(narrow.criterion_w);
  const ContinuousReport wide = continuous_report({GaussianDensity{0.0, 10.0}, 1.0}, 0.5);
  CHECK_FALSE(wide.criterion_w);
  CHECK_FALSE(wide.criterion_e);
  CHECK_THROWS_AS(continuous_report({GaussianDensity{0.0, 1.0}, 1.0}, 0.0), DomainError);
}

TEST_CASE("convergence table") {
  const auto rows =
      convergence_report({GaussianDensity{0.0, 1.0}, 1.0}, 0.5, {10, 100, 1000});
  REQUIRE(rows.size() == 3);
  double prev = 0.0;
  for (const auto& row : rows) {
    CHECK(row.moment_ratio > prev);
    CHECK(row.moment_ratio < 1.0);
    prev = row.moment_ratio;
    // h * threshold over (M/2)^(2/gamma+1) equals N^(2/g)(N-1)/(N+1)^(2/g+1).
    const double n = row.n;
    CHECK(row.threshold_w_ratio ==
          doctest::Approx(std::pow(n / (n + 1), 4.0) * (n - 1) / (n + 1)).epsilon(1e-12));
  }
  CHECK(std::abs(rows.back().threshold_w_ratio - 1.0) < 0.01);
  CHECK(rows.back().moment_ratio == doctest::Approx(0.987047872166816).epsilon(1e-9));
  CHECK(std::abs(rows.back().entropy_ratio - 1.0) < 0.02);
  CHECK(rows.back().cn_ok);
}
