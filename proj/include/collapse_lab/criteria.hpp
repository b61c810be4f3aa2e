#pragma once

// Certification predicates for initial configurations: the smallness
// condition that rules out collisions, three blow-up criteria for centered
// states, the entropy constant C(mu) and its supremum C(N), and the mass
// threshold of the logarithmic kernel.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "collapse_lab/model.hpp"

namespace collapse {

struct CheckResult {
  bool holds = false;
  double threshold = 0.0;
  double measured = 0.0;
};

/// Tolerance on |center of mass| for criteria that need a centered state,
/// measured relative to max(1, max |x_i|).
inline constexpr double kZeroMeanTol = 1e-12;

bool is_centered(const ParticleState& state) noexcept;
ParticleState recenter(const ParticleState& state);

/// Right-hand side T(N) of the smallness condition gamma * phi < T(N):
/// 1 for N = 3, 1 / (1 + 2 (N-2)^2) for N > 3.
double global_existence_threshold(int n);

/// Constant c(N) with T(N) = 1 / (1 + (N-3) c(N)), N > 3.
double global_existence_constant(int n);

/// measured = gamma * phi(X0). Throws PreconditionError for gamma = 0.
CheckResult global_existence_check(const ParticleState& state0, const Params& p);

/// measured = |X0|^2 against the interaction-energy criterion.
CheckResult blowup_w_check(const ParticleState& state0, const Params& p);

/// measured = |X0|^2 against the entropy criterion with constant 1/(N-1).
CheckResult blowup_u_check(const ParticleState& state0, const Params& p);

/// The continuum of entropy criteria; cn is C(N) or any C(mu).
CheckResult blowup_c_check(const ParticleState& state0, const Params& p, double cn);

/// C(mu) for mu = (mu_1..mu_{N-1}), mu_0 = mu_N = 0. N = mu.size() + 1.
double c_of_mu(const Eigen::VectorXd& mu);

/// Gradient of log C(mu). Orthogonal to mu (degree-0 homogeneity).
Eigen::VectorXd log_c_of_mu_gradient(const Eigen::VectorXd& mu);

struct CnResult {
  double value = 0.0;
  Eigen::VectorXd mu;       // maximizer, unit Euclidean norm
  double grad_norm = 0.0;   // tangent gradient of log C at mu
  int starts = 0;
  int ascent_iterations = 0;
  int newton_iterations = 0;
};

struct CnOptions {
  double tol = 1e-10;
  int random_starts = 8;
  int max_ascent_iterations = 2000;
  int max_newton_iterations = 100;
  std::uint64_t seed = 20240229;
};

/// sup over positive mu of C(mu). Throws NumericalFailure (best mu attached)
/// when no start reaches the stationarity tolerance.
CnResult c_of_n(int n, const CnOptions& options = {});
inline CnResult c_of_n(int n, double tol) {
  CnOptions o;
  o.tol = tol;
  return c_of_n(n, o);
}

/// mu_i = standard normal density at the i/N quantile, i = 1..N-1.
Eigen::VectorXd gaussian_mu(int n);

/// 4 sin^2(pi / (2N)), the smallest eigenvalue of A A^T for the
/// (N-1) x N forward-difference matrix A.
double lambda_min(int n);

/// Spectrum of A A^T by dense symmetric eigensolve, ascending.
Eigen::VectorXd difference_gram_spectrum(int n);

/// Roots nu > 0 of nu^(2/(N-1)) = 2/(N-1) (nu^2 - nu + 1), i.e. the weights
/// (nu, 1, ..., 1) that make C(mu) = 1/(N-1).
std::vector<double> entropy_criterion_nu_roots(int n);

double gamma0_mass_threshold(int n);

enum class MassRegime { Subcritical, Critical, Supercritical };
MassRegime gamma0_check(const Params& p);

enum class Verdict { GlobalCertified, BlowupCertified, Uncertified };

enum class CriterionTag { GE_4_8, BU_W_5_2, BU_U_5_7, BU_C_5_10, Gamma0_Mass };

struct ThresholdPair {
  double threshold = 0.0;
  double measured = 0.0;
};

struct Certificate {
  Verdict verdict = Verdict::Uncertified;
  std::set<CriterionTag> triggered;
  std::map<CriterionTag, ThresholdPair> thresholds;
};

/// Evaluates every applicable predicate. The blow-up criteria see a
/// recentered copy of state0. cn defaults to c_of_n(N).
Certificate classify_initial(const ParticleState& state0, const Params& p,
                             std::optional<double> cn = std::nullopt);

std::string_view to_string(Verdict v);
std::string_view to_string(CriterionTag t);
std::string_view to_string(MassRegime r);

}  // namespace collapse
