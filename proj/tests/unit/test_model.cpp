#include <doctest.h>

#include <cmath>
#include <random>

#include "collapse_lab/model.hpp"
#include "oracles.hpp"

using namespace collapse;

namespace {

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ParticleState st(std::vector<double> v) { return ParticleState(vec(v)); }

}  // namespace

TEST_CASE("params validation and mass per particle") {
  Params p(0.5, 1.0, 3);
  CHECK(p.h() == doctest::Approx(0.25));
  CHECK(p.flow_scale() == 1.0);
  CHECK(Params(0.0, 1.0, 3).flow_scale() == doctest::Approx(0.25));
  CHECK(Params(0.0, 1.0, 3, TimeScaling::Uniform).flow_scale() == 1.0);
  CHECK_THROWS_AS(Params(1.0, 1.0, 3), DomainError);
  CHECK_THROWS_AS(Params(-0.1, 1.0, 3), DomainError);
  CHECK_THROWS_AS(Params(0.5, 0.0, 3), DomainError);
  CHECK_THROWS_AS(Params(0.5, 1.0, 2), DomainError);
}

TEST_CASE("cone membership") {
  Params p(0.5, 1.0, 3);
  CHECK_THROWS_AS(entropy_u(st({0, 0, 1}), p), DomainError);
  CHECK_THROWS_AS(entropy_u(st({0, 2, 1}), p), DomainError);
  CHECK_THROWS_AS(entropy_u(st({0, 1, NAN}), p), DomainError);
  CHECK_THROWS_AS(entropy_u(st({0, 1}), p), DomainError);
  CHECK(in_cone(vec({0, 1, 2})));
  CHECK_FALSE(in_cone(vec({0, 1, 1})));
}

TEST_CASE("hand-evaluated energies at X = (0,1,2), h = 0.25") {
  Params p(0.5, 1.0, 3);
  const auto s = st({0, 1, 2});
  CHECK(entropy_u(s, p) == doctest::Approx(-0.5 * std::log(4.0)).epsilon(1e-14));
  CHECK(entropy_u(s, p) == doctest::Approx(-0.6931472).epsilon(1e-7));
  CHECK(interaction_w(s, p) == doctest::Approx(0.125 * (2.0 + std::pow(2.0, -0.5))).epsilon(1e-14));
  CHECK(interaction_w(s, p) == doctest::Approx(0.3383883).epsilon(1e-7));
  CHECK(energy_g(s, p) == doctest::Approx(-1.0315355).epsilon(1e-7));
  CHECK(phi(s, p) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(interaction_w(s, Params(0.0, 1.0, 3)) == doctest::Approx(-0.0625 * std::log(2.0)));
  CHECK(entropy_u(st({-1, 0, 1}), p) == entropy_u(s, p));
  CHECK(entropy_u(st({0, 0.25, 0.5}), p) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("velocity at X = (0,1,2)") {
  Params p(0.5, 1.0, 3);
  const Eigen::VectorXd v = velocity(st({0, 1, 2}), p);
  CHECK(v[0] == doctest::Approx(-0.6616117).epsilon(1e-7));
  CHECK(std::abs(v[1]) < 1e-15);
  CHECK(v[2] == doctest::Approx(0.6616117).epsilon(1e-7));
}

TEST_CASE("velocity is -(s/h) grad G against finite differences") {
  std::mt19937_64 rng(7);
  for (double gamma : {0.0, 0.2, 0.5, 0.9}) {
    for (auto scaling : {TimeScaling::PaperConvention, TimeScaling::Uniform}) {
      for (int n : {3, 4, 7}) {
        Params p(gamma, 1.3, n, scaling);
        const auto x = oracle::random_state(rng, n, 0.3, 1.5);
        const auto fd = oracle::fd_gradient(x, p.h(), gamma);
        const Eigen::VectorXd v = velocity(ParticleState(vec(x)), p);
        const Eigen::VectorXd g = energy_gradient(ParticleState(vec(x)), p);
        for (int i = 0; i < n; ++i) {
          CHECK(g[i] == doctest::Approx(fd[i]).epsilon(1e-6));
          CHECK(v[i] == doctest::Approx(-p.flow_scale() / p.h() * fd[i]).epsilon(1e-6));
        }
      }
    }
  }
}

TEST_CASE("velocity sums to zero on 1000 random states") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> nd(3, 8);
  for (int k = 0; k < 1000; ++k) {
    const int n = nd(rng);
    Params p(k % 2 ? 0.5 : 0.0, 1.0, n);
    const auto x = oracle::random_state(rng, n, 0.01, 3.0);
    const Eigen::VectorXd v = velocity(ParticleState(vec(x)), p);
    CHECK(std::abs(v.sum()) < 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("mirror-symmetric state gives antisymmetric velocity") {
  Params p(0.4, 1.0, 5);
  const Eigen::VectorXd v = velocity(st({-3, -1, 0, 1, 3}), p);
  CHECK(v[0] == doctest::Approx(-v[4]));
  CHECK(v[1] == doctest::Approx(-v[3]));
  CHECK(std::abs(v[2]) < 1e-14);
}

TEST_CASE("jacobian and hessian against finite differences") {
  std::mt19937_64 rng(3);
  for (double gamma : {0.0, 0.5}) {
    Params p(gamma, 1.0, 5);
    const auto x = oracle::random_state(rng, 5, 0.4, 1.2);
    const Eigen::MatrixXd jac = velocity_jacobian(ParticleState(vec(x)), p);
    const Eigen::MatrixXd hes = energy_hessian(ParticleState(vec(x)), p);
    CHECK((jac - jac.transpose()).norm() < 1e-12);
    const double step = 1e-6;
    for (int j = 0; j < 5; ++j) {
      auto xp = x, xm = x;
      xp[j] += step;
      xm[j] -= step;
      const Eigen::VectorXd col =
          (velocity(ParticleState(vec(xp)), p) - velocity(ParticleState(vec(xm)), p)) /
          (2.0 * step);
      CHECK((col - jac.col(j)).norm() < 1e-6 * (1.0 + jac.col(j).norm()));
    }
    CHECK((hes + p.h() / p.flow_scale() * jac).norm() < 1e-12 * (1.0 + hes.norm()));
  }
}

TEST_CASE("virial identity") {
  Params p(0.5, 1.0, 3);
  const auto s = st({0, 1, 2});
  CHECK(virial_rhs(s, p) == doctest::Approx(8.0 * (0.5 - 0.5 * 0.3383883476483184)).epsilon(1e-12));
  // 2 <X - mean, V> = 4 * 0.6616117...
  CHECK(virial_rhs(s, p) == doctest::Approx(2.6464466).epsilon(1e-7));
  CHECK(diagnostics(s, p).virial_residual < 1e-12);

  Params p0(0.0, 1.0, 3);
  std::mt19937_64 rng(5);
  for (int k = 0; k < 20; ++k) {
    const auto x = oracle::random_state(rng, 3);
    CHECK(virial_rhs(ParticleState(vec(x)), p0) == doctest::Approx(0.625).epsilon(1e-14));
  }
  // Critical mass h = 2/N.
  Params pc(0.0, 2.0 * 4.0 / 3.0, 3);
  CHECK(std::abs(virial_rhs(st({0, 1, 5}), pc)) < 1e-14);

  for (double gamma : {0.0, 0.3, 0.7}) {
    for (int n : {3, 6}) {
      Params q(gamma, 0.8, n, TimeScaling::Uniform);
      const auto x = oracle::random_state(rng, n);
      const ParticleState sx(vec(x));
      const double direct = 2.0 * (sx.x.array() - sx.x.mean()).matrix().dot(velocity(sx, q));
      CHECK(virial_rhs(sx, q) == doctest::Approx(direct).epsilon(1e-12));
    }
  }
}

TEST_CASE("dilation laws of the energy") {
  std::mt19937_64 rng(13);
  const double lambda = 1.7;
  for (int n : {3, 5}) {
    const auto x = oracle::random_state(rng, n);
    auto lx = x;
    for (double& v : lx) v *= lambda;
    Params p(0.5, 1.0, n);
    const double lhs = energy_g(ParticleState(vec(lx)), p);
    const double rhs = -p.h() * (n - 1) * std::log(lambda) + entropy_u(ParticleState(vec(x)), p) -
                       std::pow(lambda, -0.5) * interaction_w(ParticleState(vec(x)), p);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));

    Params p0(0.0, 1.0, n);
    const double h = p0.h();
    const double d0 = energy_g(ParticleState(vec(lx)), p0) - energy_g(ParticleState(vec(x)), p0);
    CHECK(d0 == doctest::Approx((-h * (n - 1) + h * h * n * (n - 1) / 2.0) * std::log(lambda))
                    .epsilon(1e-12));
  }
}

TEST_CASE("phi sandwiches W") {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 200; ++k) {
    const int n = 3 + k % 6;
    Params p(0.1 + 0.8 * (k % 9) / 8.0, 1.0, n);
    const ParticleState s(vec(oracle::random_state(rng, n, 0.01, 5.0)));
    const double f = phi(s, p), w = interaction_w(s, p);
    CHECK(p.h() * f < w);
    CHECK(w < p.h() * n / 2.0 * f);
  }
}

TEST_CASE("rescale") {
  Params p(0.5, 1.0, 4);
  const ParticleState s(vec({-1.0, -0.2, 0.3, 1.4}), 0.7);
  auto [s1, p1] = rescale(s, p, 1.0);
  CHECK((s1.x - s.x).norm() == 0.0);
  CHECK(p1.h() == p.h());
  CHECK(s1.t == s.t);

  const double lambda = 2.0;
  auto [s2, p2] = rescale(s, p, lambda);
  CHECK(p2.h() == doctest::Approx(std::pow(lambda, 0.5) * p.h()));
  CHECK(s2.t == doctest::Approx(lambda * lambda * s.t));
  CHECK(phi(s2, p2) == doctest::Approx(phi(s, p)).epsilon(1e-14));
  // W picks up lambda^gamma; W / h is the invariant combination.
  CHECK(interaction_w(s2, p2) / p2.h() == doctest::Approx(interaction_w(s, p) / p.h()).epsilon(1e-14));
  CHECK(interaction_w(s2, p2) == doctest::Approx(std::pow(lambda, 0.5) * interaction_w(s, p)).epsilon(1e-14));
  // Chain rule: X'(t') = lambda X(t), t' = lambda^2 t, so V' = V / lambda.
  CHECK((velocity(s2, p2) - velocity(s, p) / lambda).norm() < 1e-13);
  CHECK_THROWS_AS(rescale(s, p, 0.0), DomainError);
}

TEST_CASE("moments and gaps") {
  const auto s = st({-1, 0, 1});
  CHECK(second_moment(s) == 2.0);
  CHECK(center_of_mass(s) == 0.0);
  const Gaps g = gaps(st({0, 1, 2}));
  CHECK(g.y.size() == 2);
  CHECK(g.y[0] == 1.0);
  CHECK(g.y[1] == 1.0);
  Params p(0.5, 1.0, 3);
  const Diagnostics d = diagnostics(st({0, 1, 2}), p);
  CHECK(d.min_gap == 1.0);
  CHECK(d.com == 1.0);
  CHECK(d.g == doctest::Approx(d.u - d.w));
}

TEST_CASE("non-throwing kernels") {
  Params p(0.5, 1.0, 3);
  Eigen::VectorXd out;
  double e = 0.0;
  CHECK(detail::try_velocity(vec({0, 1, 2}), p, out));
  CHECK_FALSE(detail::try_velocity(vec({0, 1, 1}), p, out));
  CHECK(detail::try_energy(vec({0, 1, 2}), p, e));
  CHECK(e == doctest::Approx(-1.0315355).epsilon(1e-7));
  CHECK_FALSE(detail::try_energy(vec({1, 0, 2}), p, e));
}
