#pragma once

// Particle discretization of the one-parameter family of 1D nonlocal
// drift-diffusion equations with kernel K_gamma(x) = |x|^-gamma / gamma
// (gamma = 0 selects the logarithmic kernel -log|x|).
//
// N particles of mass h = M / (N + 1) each, ghost particles at -inf/+inf.
// Energies:
//   U[X] = -h sum_i log((X_{i+1} - X_i) / h)
//   W[X] = h^2 / gamma sum_{i<j} |X_j - X_i|^-gamma      (gamma > 0)
//        = -h^2 sum_{i<j} log(X_j - X_i)                  (gamma = 0)
//   G[X] = U[X] - W[X]

#include <utility>

#include <Eigen/Dense>

#include "collapse_lab/errors.hpp"

namespace collapse {

/// Flow prefactor. The gamma > 0 scheme is Xdot = -(1/h) grad G; the
/// gamma = 0 scheme is usually written without the 1/h. PaperConvention keeps
/// that split, Uniform uses -(1/h) grad G for every gamma.
enum class TimeScaling { PaperConvention, Uniform };

class Params {
 public:
  Params(double gamma, double mass, int n,
         TimeScaling scaling = TimeScaling::PaperConvention);

  double gamma() const noexcept { return gamma_; }
  double mass() const noexcept { return mass_; }
  int n() const noexcept { return n_; }
  double h() const noexcept { return h_; }
  TimeScaling time_scaling() const noexcept { return scaling_; }

  bool log_kernel() const noexcept { return gamma_ == 0.0; }

  /// Factor s in Xdot = -(s/h) grad G. Equal to h only for the logarithmic
  /// kernel under PaperConvention, 1 otherwise.
  double flow_scale() const noexcept;

  Params with_mass(double mass) const { return Params(gamma_, mass, n_, scaling_); }

 private:
  double gamma_;
  double mass_;
  int n_;
  double h_;
  TimeScaling scaling_;
};

struct ParticleState {
  Eigen::VectorXd x;
  double t = 0.0;

  ParticleState() = default;
  explicit ParticleState(Eigen::VectorXd positions, double time = 0.0)
      : x(std::move(positions)), t(time) {}

  int size() const noexcept { return static_cast<int>(x.size()); }
};

/// Adjacent differences y_i = x_{i+1} - x_i.
struct Gaps {
  Eigen::VectorXd y;
};

struct Diagnostics {
  double u = 0.0;
  double w = 0.0;
  double g = 0.0;
  double phi = 0.0;
  double i2 = 0.0;
  double com = 0.0;
  double min_gap = 0.0;
  double virial_residual = 0.0;
};

/// Smallest admissible gap. Anything at or below raises DomainError.
inline constexpr double kMinGap = 1e-300;

/// Throws DomainError unless x is finite, strictly increasing with every gap
/// above kMinGap, and matches p.n().
void require_in_cone(const Eigen::VectorXd& x, const Params& p);
bool in_cone(const Eigen::VectorXd& x) noexcept;

double entropy_u(const ParticleState& state, const Params& p);
double interaction_w(const ParticleState& state, const Params& p);
double energy_g(const ParticleState& state, const Params& p);

/// (h/gamma) sum gap^-gamma for gamma > 0, -h sum log(gap) for gamma = 0.
double phi(const ParticleState& state, const Params& p);

/// Right-hand side of the particle system under p.time_scaling().
Eigen::VectorXd velocity(const ParticleState& state, const Params& p);

/// grad G (no flow prefactor).
Eigen::VectorXd energy_gradient(const ParticleState& state, const Params& p);

/// Jacobian of velocity() with respect to positions. Symmetric.
Eigen::MatrixXd velocity_jacobian(const ParticleState& state, const Params& p);

/// Hessian of G. Equals -(h / flow_scale) * velocity_jacobian.
Eigen::MatrixXd energy_hessian(const ParticleState& state, const Params& p);

/// Exact d/dt |X|^2 along the flow, from the dilation homogeneity of G.
double virial_rhs(const ParticleState& state, const Params& p);

/// (h, X(t)) -> (lambda^gamma h, lambda X) at time lambda^2 t.
std::pair<ParticleState, Params> rescale(const ParticleState& state, const Params& p,
                                         double lambda);

double second_moment(const ParticleState& state);
double center_of_mass(const ParticleState& state);
Gaps gaps(const ParticleState& state);
Diagnostics diagnostics(const ParticleState& state, const Params& p);

namespace detail {

// Non-throwing kernels for the integrators. Return false when x is outside
// the cone or the result is not finite; out is unspecified in that case.
bool try_velocity(const Eigen::VectorXd& x, const Params& p, Eigen::VectorXd& out);
bool try_energy(const Eigen::VectorXd& x, const Params& p, double& out);

}  // namespace detail

}  // namespace collapse
