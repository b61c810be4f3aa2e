#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "collapse_lab/criteria.hpp"
#include "collapse_lab/density.hpp"
#include "oracles.hpp"

using namespace collapse;

namespace {

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ParticleState st(std::vector<double> v) { return ParticleState(vec(v)); }

// (prod mu)^(2/(N-1)) / sum_{i=0}^{N-1} (mu_{i+1} - mu_i)^2 with mu_0 = mu_N = 0.
double c_of_mu_oracle(const std::vector<double>& mu) {
  const double m = static_cast<double>(mu.size());
  double logprod = 0.0;
  for (double v : mu) logprod += std::log(v);
  double q = 0.0;
  double prev = 0.0;
  for (double v : mu) {
    q += (v - prev) * (v - prev);
    prev = v;
  }
  q += prev * prev;
  return std::exp(2.0 / m * logprod) / q;
}

}  // namespace

TEST_CASE("global existence threshold") {
  CHECK(global_existence_threshold(3) == 1.0);
  CHECK(global_existence_threshold(4) == doctest::Approx(1.0 / 9.0));
  for (int n = 4; n < 12; ++n) {
    CHECK(global_existence_threshold(n) ==
          doctest::Approx(1.0 / (1.0 + (n - 3) * global_existence_constant(n))));
  }
  Params p(0.5, 1.0, 3);
  const CheckResult r = global_existence_check(st({-1, 0, 1}), p);
  CHECK(r.holds);
  CHECK(r.measured == doctest::Approx(0.5));
  CHECK(r.threshold == 1.0);
  CHECK_FALSE(global_existence_check(st({-1, 0, 1e-30}), p).holds);
  CHECK_THROWS_AS(global_existence_check(st({-1, 0, 1}), Params(0.0, 1.0, 3)),
                  PreconditionError);
}

TEST_CASE("interaction-energy blow-up criterion") {
  Params p(0.5, 1.0, 3);
  const CheckResult r = blowup_w_check(st({-1, 0, 1}), p);
  CHECK(r.threshold == doctest::Approx(648.0 / 32768.0).epsilon(1e-14));
  CHECK_FALSE(r.holds);
  CHECK(blowup_w_check(st({-0.05, 0, 0.05}), p).holds);
  CHECK_THROWS_AS(blowup_w_check(st({0, 1, 2}), p), PreconditionError);
  // Threshold is large-N stable: N^(2/g) / (N+1)^(2/g+1) overflows when expanded.
  Params big(0.1, 1.0, 1000);
  Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(1000, -1.0, 1.0);
  CHECK(std::isfinite(blowup_w_check(ParticleState(x), big).threshold));
}

TEST_CASE("entropy criterion is the 1/(N-1) member of the continuum") {
  std::mt19937_64 rng(23);
  for (int k = 0; k < 200; ++k) {
    const int n = 3 + k % 6;
    Params p(0.1 + 0.1 * (k % 9), 1.0, n);
    const ParticleState s(vec(oracle::random_state(rng, n, 0.001, 0.05)));
    const CheckResult u = blowup_u_check(s, p);
    const CheckResult c = blowup_c_check(s, p, 1.0 / (n - 1.0));
    CHECK(u.threshold == c.threshold);
    CHECK(u.measured == c.measured);
    CHECK(u.holds == c.holds);
  }
  // Monotone in cN.
  Params p(0.5, 1.0, 4);
  const ParticleState s(vec(oracle::random_state(rng, 4, 0.01, 0.02)));
  CHECK(blowup_c_check(s, p, 0.3).threshold < blowup_c_check(s, p, 0.6).threshold);
}

TEST_CASE("equality never certifies") {
  Params p(0.5, 1.0, 3);
  const CheckResult r = blowup_u_check(st({-0.05, 0, 0.05}), p);
  // Dilate the state so |X|^2 sits exactly at a value and compare strictly.
  CHECK(r.holds == (r.measured < r.threshold));
}

TEST_CASE("C(mu) hand values and homogeneity") {
  CHECK(c_of_mu(vec({1, 1})) == doctest::Approx(0.5));
  CHECK(c_of_mu(vec({1, 2})) == doctest::Approx(1.0 / 3.0));
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> d(0.1, 2.0);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> mu(2 + k % 9);
    for (double& v : mu) v = d(rng);
    const Eigen::VectorXd m = vec(mu);
    CHECK(c_of_mu(m) == doctest::Approx(c_of_mu_oracle(mu)).epsilon(1e-13));
    CHECK(c_of_mu(0.1 * m) == doctest::Approx(c_of_mu(m)).epsilon(1e-13));
    CHECK(c_of_mu(7.0 * m) == doctest::Approx(c_of_mu(m)).epsilon(1e-13));
    CHECK(std::abs(log_c_of_mu_gradient(m).dot(m)) < 1e-10);
  }
  CHECK_THROWS_AS(c_of_mu(vec({1, 0})), DomainError);
  CHECK_THROWS_AS(c_of_mu(vec({1, -1})), DomainError);
}

TEST_CASE("C(3) against a grid search on the unit circle") {
  double best = 0.0;
  const int steps = 2'000'000;
  for (int k = 1; k < steps; ++k) {
    const double th = 0.5 * std::numbers::pi * k / steps;
    best = std::max(best, c_of_mu_oracle({std::cos(th), std::sin(th)}));
  }
  const CnResult r = c_of_n(3);
  CHECK(r.value == doctest::Approx(best).epsilon(1e-8));
  CHECK(r.value == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(r.mu[0] == doctest::Approx(r.mu[1]).epsilon(1e-8));
  CHECK(r.grad_norm < 1e-10);
}

TEST_CASE("C(N) bracket and monotone decrease") {
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 3; n <= 40; ++n) {
    const double c = c_of_n(n).value;
    CHECK(c_of_mu(gaussian_mu(n)) <= c * (1.0 + 1e-12));
    CHECK(c <= 1.0 / (lambda_min(n) * (n - 1.0)) * (1.0 + 1e-12));
    CHECK(c / n < prev);
    prev = c / n;
  }
  CHECK(c_of_n(10).value == doctest::Approx(0.91398).epsilon(1e-4));
}

TEST_CASE("C(N) stalls report the best iterate") {
  CnOptions o;
  o.tol = 1e-300;
  o.random_starts = 0;
  o.max_ascent_iterations = 3;
  o.max_newton_iterations = 0;
  try {
    c_of_n(6, o);
    FAIL("expected NumericalFailure");
  } catch (const NumericalFailure& e) {
    CHECK(e.best_iterate().size() == 5);
  }
}

TEST_CASE("gaussian weights") {
  const Eigen::VectorXd mu = gaussian_mu(4);
  CHECK(mu[1] == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));
  CHECK(mu[0] == doctest::Approx(mu[2]).epsilon(1e-14));
  const double target = 1.0 / (2.0 * std::numbers::pi * std::numbers::e);
  double prev_gap = std::numeric_limits<double>::infinity();
  // Converges from above, squeezed between the limit and C(N) / N.
  for (int n : {10, 100, 1000}) {
    const double v = c_of_mu(gaussian_mu(n)) / n;
    CHECK(v > target);
    CHECK(v - target < prev_gap);
    prev_gap = v - target;
  }
  CHECK(prev_gap < 1e-3);
}

TEST_CASE("difference matrix spectrum") {
  CHECK(lambda_min(3) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(lambda_min(2) == doctest::Approx(2.0).epsilon(1e-15));
  const Eigen::VectorXd ev3 = difference_gram_spectrum(3);
  CHECK(ev3[0] == doctest::Approx(1.0));
  CHECK(ev3[1] == doctest::Approx(3.0));
  for (int n = 2; n <= 64; ++n) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n - 1, n);
    for (int i = 0; i < n - 1; ++i) {
      a(i, i) = -1.0;
      a(i, i + 1) = 1.0;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a * a.transpose());
    CHECK(std::abs(lambda_min(n) - es.eigenvalues()[0]) < 1e-10);
  }
}

TEST_CASE("nu roots of the entropy criterion") {
  const auto r3 = entropy_criterion_nu_roots(3);
  REQUIRE(r3.size() == 1);
  CHECK(r3[0] == doctest::Approx(1.0).epsilon(1e-6));
  for (int n : {4, 5, 8}) {
    const auto roots = entropy_criterion_nu_roots(n);
    CHECK_FALSE(roots.empty());
    for (double nu : roots) {
      const double lhs = std::pow(nu, 2.0 / (n - 1.0));
      const double rhs = 2.0 / (n - 1.0) * (nu * nu - nu + 1.0);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
      std::vector<double> mu(n - 1, 1.0);
      mu[0] = nu;
      CHECK(c_of_mu_oracle(mu) == doctest::Approx(1.0 / (n - 1.0)).epsilon(1e-8));
    }
  }
}

TEST_CASE("logarithmic kernel mass threshold") {
  CHECK(gamma0_mass_threshold(3) == doctest::Approx(8.0 / 3.0));
  CHECK(gamma0_mass_threshold(1'000'000) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(gamma0_check(Params(0.0, 3.0, 3)) == MassRegime::Supercritical);
  CHECK(gamma0_check(Params(0.0, 2.5, 3)) == MassRegime::Subcritical);
  CHECK(gamma0_check(Params(0.0, 8.0 / 3.0, 3)) == MassRegime::Critical);
  const Certificate c = classify_initial(st({-1, 0, 1}), Params(0.0, 3.0, 3));
  CHECK(c.verdict == Verdict::BlowupCertified);
  CHECK(c.triggered.count(CriterionTag::Gamma0_Mass) == 1);
}

TEST_CASE("classify_initial examples") {
  Params p(0.5, 1.0, 3);
  const Certificate g = classify_initial(st({-1, 0, 1}), p);
  CHECK(g.verdict == Verdict::GlobalCertified);
  CHECK(g.triggered.count(CriterionTag::GE_4_8) == 1);
  CHECK(g.thresholds.at(CriterionTag::GE_4_8).threshold == 1.0);
  CHECK(g.thresholds.at(CriterionTag::GE_4_8).measured == doctest::Approx(0.5));
  CHECK(g.thresholds.size() == 4);

  const Certificate b = classify_initial(st({-0.05, 0, 0.05}), p);
  CHECK(b.verdict == Verdict::BlowupCertified);
  CHECK(b.triggered.count(CriterionTag::BU_W_5_2) == 1);

  // Gaps (10, 10): gamma phi = 0.5 * 0.5 * 2 / sqrt(10).
  const Certificate far = classify_initial(st({-10, 0, 10}), p);
  CHECK(far.verdict == Verdict::GlobalCertified);
  CHECK(far.thresholds.at(CriterionTag::GE_4_8).measured ==
        doctest::Approx(0.5 / std::sqrt(10.0)));

  // Non-centered input is recentered for the blow-up criteria.
  const Certificate shifted = classify_initial(st({4.95, 5, 5.05}), p);
  CHECK(shifted.verdict == Verdict::BlowupCertified);
}

TEST_CASE("scale invariance of predicates") {
  std::mt19937_64 rng(31);
  for (int k = 0; k < 200; ++k) {
    const int n = 3 + k % 4;
    Params p(0.5, 1.0, n);
    const double spread = k % 2 ? 0.02 : 1.0;
    const ParticleState s(vec(oracle::random_state(rng, n, 0.1 * spread, spread)));
    for (double lambda : {0.5, 2.0}) {
      auto [s2, p2] = rescale(s, p, lambda);
      CHECK(global_existence_check(s2, p2).holds == global_existence_check(s, p).holds);
      CHECK(blowup_w_check(s2, p2).holds == blowup_w_check(s, p).holds);
      CHECK(blowup_u_check(s2, p2).holds == blowup_u_check(s, p).holds);
      CHECK(blowup_c_check(s2, p2, 0.6).holds == blowup_c_check(s, p, 0.6).holds);
    }
  }
}
