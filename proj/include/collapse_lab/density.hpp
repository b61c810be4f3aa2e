#pragma once

// Continuous side: closed-form initial densities, their quantile
// discretization onto the particle grid m_i = i h, the continuous blow-up
// criteria, and discrete-to-continuous convergence tables.

#include <utility>
#include <variant>
#include <vector>

#include "collapse_lab/model.hpp"

namespace collapse {

double std_normal_pdf(double x) noexcept;
double std_normal_cdf(double x) noexcept;

/// Inverse standard normal CDF on (0, 1). Throws DomainError outside.
double std_normal_quantile(double q);

struct GaussianDensity {
  double mean = 0.0;
  double sigma = 1.0;
};

struct UniformDensity {
  double a = 0.0;
  double b = 1.0;
};

/// Density integrating to `mass`.
struct DensitySpec {
  std::variant<GaussianDensity, UniformDensity> kind;
  double mass = 1.0;

  void validate() const;
};

/// X_i = F^{-1}(i h), h = M / (N + 1).
std::pair<ParticleState, Params> quantile_init(
    const DensitySpec& spec, int n, double gamma,
    TimeScaling scaling = TimeScaling::PaperConvention);

struct ContinuousReport {
  double second_moment = 0.0;           // int x^2 rho
  double centered_second_moment = 0.0;  // about the center of mass
  double entropy = 0.0;                 // int rho log rho
  double interaction = 0.0;             // int int rho(x) K(x - y) rho(y)
  double interaction_error = 0.0;       // quadrature error estimate (0 if exact)
  double energy = 0.0;                  // entropy - interaction / 2
  double threshold_w = 0.0;             // (M/2)^(2/gamma + 1)
  double threshold_e = 0.0;             // M^3 / (2 pi e^(2/gamma+1)) exp(-2E/M)
  bool criterion_w = false;             // I0 < threshold_w
  bool criterion_e = false;             // I0 < threshold_e
};

/// gamma in (0, 1). Criteria use the centered second moment.
ContinuousReport continuous_report(const DensitySpec& spec, double gamma);

/// Closed form of int int rho(x) |x - y|^-gamma rho(y) for a Gaussian.
double gaussian_pair_moment_exact(const GaussianDensity& g, double mass, double gamma);

struct ConvergenceRow {
  int n = 0;
  double h = 0.0;
  double discrete_moment = 0.0;       // h |X - com|^2
  double continuous_moment = 0.0;     // I0
  double moment_ratio = 0.0;
  double discrete_threshold_w = 0.0;  // h * interaction-energy criterion threshold
  double continuous_threshold_w = 0.0;
  double threshold_w_ratio = 0.0;
  double cn = 0.0;                    // C(N), 0 when the optimizer failed
  bool cn_ok = true;
  double discrete_threshold_c = 0.0;  // h * continuum entropy criterion threshold
  double continuous_threshold_e = 0.0;
  double threshold_c_ratio = 0.0;
  double discrete_entropy = 0.0;      // U[X]
  double continuous_entropy = 0.0;
  double entropy_ratio = 0.0;
  double discrete_interaction = 0.0;  // W[X]
  double continuous_half_interaction = 0.0;
  double interaction_ratio = 0.0;
};

std::vector<ConvergenceRow> convergence_report(const DensitySpec& spec, double gamma,
                                               const std::vector<int>& n_list);

}  // namespace collapse
