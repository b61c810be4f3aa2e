#include "collapse_lab/model.hpp"

#include <cmath>
#include <sstream>

namespace collapse {

Params::Params(double gamma, double mass, int n, TimeScaling scaling)
    : gamma_(gamma), mass_(mass), n_(n), h_(0.0), scaling_(scaling) {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw DomainError("gamma must lie in [0, 1)");
  }
  if (!(mass > 0.0) || !std::isfinite(mass)) {
    throw DomainError("mass must be positive and finite");
  }
  if (n < 3) {
    throw DomainError("at least three particles are required");
  }
  h_ = mass / static_cast<double>(n + 1);
}

double Params::flow_scale() const noexcept {
  return (log_kernel() && scaling_ == TimeScaling::PaperConvention) ? h_ : 1.0;
}

bool in_cone(const Eigen::VectorXd& x) noexcept {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    if (!(x[i + 1] - x[i] > kMinGap)) return false;
  }
  return true;
}

void require_in_cone(const Eigen::VectorXd& x, const Params& p) {
  if (x.size() != p.n()) {
    std::ostringstream os;
    os << "state has " << x.size() << " particles, params expect " << p.n();
    throw DomainError(os.str());
  }
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) throw DomainError("non-finite particle position");
  }
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    if (!(x[i + 1] - x[i] > kMinGap)) {
      std::ostringstream os;
      os << "positions must be strictly increasing (gap " << i << " is "
         << x[i + 1] - x[i] << ")";
      throw DomainError(os.str());
    }
  }
}

namespace {

double entropy_unchecked(const Eigen::VectorXd& x, double h) {
  double s = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) s += std::log((x[i + 1] - x[i]) / h);
  return -h * s;
}

// Pairwise sums in fixed (i ascending, j ascending) order.
double interaction_unchecked(const Eigen::VectorXd& x, const Params& p) {
  const Eigen::Index n = x.size();
  const double h = p.h();
  double s = 0.0;
  if (p.log_kernel()) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) s += std::log(x[j] - x[i]);
    return -h * h * s;
  }
  const double g = p.gamma();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) s += std::pow(x[j] - x[i], -g);
  return h * h / g * s;
}

void velocity_unchecked(const Eigen::VectorXd& x, const Params& p, Eigen::VectorXd& v) {
  const Eigen::Index n = x.size();
  const double a = p.flow_scale();
  const double b = a * p.h();
  const double e = p.gamma() + 1.0;
  v.setZero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double r = a / (x[i + 1] - x[i]);
    v[i] -= r;
    v[i + 1] += r;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = x[j] - x[i];
      const double f = b * (p.log_kernel() ? 1.0 / d : std::pow(d, -e));
      v[i] += f;
      v[j] -= f;
    }
  }
}

}  // namespace

double entropy_u(const ParticleState& state, const Params& p) {
  require_in_cone(state.x, p);
  return entropy_unchecked(state.x, p.h());
}

double interaction_w(const ParticleState& state, const Params& p) {
  require_in_cone(state.x, p);
  return interaction_unchecked(state.x, p);
}

double energy_g(const ParticleState& state, const Params& p) {
  require_in_cone(state.x, p);
  return entropy_unchecked(state.x, p.h()) - interaction_unchecked(state.x, p);
}

double phi(const ParticleState& state, const Params& p) {
  require_in_cone(state.x, p);
  const auto& x = state.x;
  double s = 0.0;
  if (p.log_kernel()) {
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) s += std::log(x[i + 1] - x[i]);
    return -p.h() * s;
  }
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) s += std::pow(x[i + 1] - x[i], -p.gamma());
  return p.h() / p.gamma() * s;
}

Eigen::VectorXd velocity(const ParticleState& state, const Params& p) {
  require_in_cone(state.x, p);
  Eigen::VectorXd v;
  velocity_unchecked(state.x, p, v);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw DomainError("velocity overflow near collision");
  }
  return v;
}

Eigen::VectorXd energy_gradient(const ParticleState& state, const Params& p) {
  return -(p.h() / p.flow_scale()) * velocity(state, p);
}

Eigen::MatrixXd velocity_jacobian(const ParticleState& state, const Params& p) {
  require_in_cone(state.x, p);
  const auto& x = state.x;
  const Eigen::Index n = x.size();
  const double a = p.flow_scale();
  const double b = a * p.h();
  const double e = p.gamma() + 1.0;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const double y = x[i + 1] - x[i];
    const double c = a / (y * y);
    jac(i, i) -= c;
    jac(i + 1, i + 1) -= c;
    jac(i, i + 1) += c;
    jac(i + 1, i) += c;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double d = x[j] - x[i];
      const double c = b * e * std::pow(d, -e - 1.0);
      jac(i, i) += c;
      jac(j, j) += c;
      jac(i, j) -= c;
      jac(j, i) -= c;
    }
  }
  return jac;
}

Eigen::MatrixXd energy_hessian(const ParticleState& state, const Params& p) {
  return -(p.h() / p.flow_scale()) * velocity_jacobian(state, p);
}

double virial_rhs(const ParticleState& state, const Params& p) {
  require_in_cone(state.x, p);
  const double n = p.n();
  const double h = p.h();
  // d/dlambda G[lambda X] at lambda = 1 is -h(N-1) + dilation.
  const double dilation = p.log_kernel() ? h * h * n * (n - 1.0) / 2.0
                                         : p.gamma() * interaction_unchecked(state.x, p);
  return 2.0 * p.flow_scale() / h * (h * (n - 1.0) - dilation);
}

std::pair<ParticleState, Params> rescale(const ParticleState& state, const Params& p,
                                         double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw DomainError("rescale factor must be positive");
  }
  Params q(p.gamma(), std::pow(lambda, p.gamma()) * p.mass(), p.n(), p.time_scaling());
  return {ParticleState(lambda * state.x, lambda * lambda * state.t), q};
}

double second_moment(const ParticleState& state) { return state.x.squaredNorm(); }

double center_of_mass(const ParticleState& state) {
  return state.x.size() == 0 ? 0.0 : state.x.sum() / static_cast<double>(state.x.size());
}

Gaps gaps(const ParticleState& state) {
  const Eigen::Index n = state.x.size();
  if (n < 2) return {Eigen::VectorXd()};
  return {state.x.tail(n - 1) - state.x.head(n - 1)};
}

Diagnostics diagnostics(const ParticleState& state, const Params& p) {
  require_in_cone(state.x, p);
  Diagnostics d;
  d.u = entropy_unchecked(state.x, p.h());
  d.w = interaction_unchecked(state.x, p);
  d.g = d.u - d.w;
  d.phi = phi(state, p);
  d.i2 = second_moment(state);
  d.com = center_of_mass(state);
  d.min_gap = gaps(state).y.minCoeff();
  const Eigen::VectorXd v = velocity(state, p);
  const Eigen::VectorXd centered = state.x.array() - d.com;
  d.virial_residual = std::abs(2.0 * centered.dot(v) - virial_rhs(state, p));
  return d;
}

namespace detail {

bool try_velocity(const Eigen::VectorXd& x, const Params& p, Eigen::VectorXd& out) {
  if (!in_cone(x)) return false;
  velocity_unchecked(x, p, out);
  return out.allFinite();
}

bool try_energy(const Eigen::VectorXd& x, const Params& p, double& out) {
  if (!in_cone(x)) return false;
  out = entropy_unchecked(x, p.h()) - interaction_unchecked(x, p);
  return std::isfinite(out);
}

}  // namespace detail

}  // namespace collapse
