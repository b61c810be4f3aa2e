#pragma once

// Critical points of the discrete energy, the three-particle reduced phase
// plane (u, v) = (X2 - X1, X3 - X2) on the zero-mean slice, basin sweeps and
// the algebraic identities behind the smallness condition.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "collapse_lab/criteria.hpp"
#include "collapse_lab/dynamics.hpp"
#include "collapse_lab/model.hpp"

namespace collapse {

struct ReducedPoint {
  double u = 0.0;
  double v = 0.0;
};

/// Zero-mean three-particle state: X1 = -(2u + v)/3, X2 = X1 + u, X3 = X2 + v.
ParticleState reduced_to_state(ReducedPoint pt, double t = 0.0);
ReducedPoint state_to_reduced(const ParticleState& state);

/// (du/dt, dv/dt) from the full three-particle right-hand side.
Eigen::Vector2d reduced_velocity(ReducedPoint pt, const Params& p);
Eigen::Matrix2d reduced_jacobian(ReducedPoint pt, const Params& p);

/// Orthonormal basis of the zero-mean hyperplane, N x (N-1).
Eigen::MatrixXd zero_mean_basis(int n);

enum class CriticalKind { Saddle, Max, Min, Degenerate };

struct CriticalPoint {
  ParticleState state;
  double grad_norm = 0.0;        // |Q^T grad G|
  Eigen::VectorXd hessian_eigs;  // of Q^T (Hess G) Q, ascending
  CriticalKind kind = CriticalKind::Degenerate;
  int iterations = 0;
};

/// Equal-gap critical state for N = 3, gap [h (1 + 2^(-1-gamma))]^(1/gamma).
/// Throws NumericalFailure if the velocity there exceeds 1e-12.
CriticalPoint symmetric_critical_point(const Params& p);

/// Damped Newton on the projected gradient. Throws NumericalFailure (last
/// iterate attached) when it stalls or leaves the cone.
CriticalPoint newton_critical_point(const ParticleState& init, const Params& p,
                                    double tol = 1e-10, int max_iter = 100);

/// Dilates state about its mean onto the level set gamma W = h (N - 1).
ParticleState dilate_to_critical_curve(const ParticleState& state, const Params& p);

struct Window {
  double u_min = 0.01;
  double u_max = 0.5;
  double v_min = 0.01;
  double v_max = 0.5;

  void validate() const;
  bool contains(ReducedPoint pt) const noexcept;
};

struct Polyline {
  std::vector<ReducedPoint> points;
  std::vector<double> skipped;  // parameters where no point was found
};

/// Level set gamma W = h (N - 1) for N = 3: u log-spaced over the window,
/// bisection in v to 1e-12.
Polyline critical_curve_n3(const Params& p, int sample_count = 512, const Window& w = {});

enum class CriterionCurve { BlowupW, BlowupC, GlobalExistence };

/// Equality locus of a certification predicate. Each predicate changes value
/// exactly once along a ray from the origin, so the curve is found by radial
/// bisection on rays whose slopes are log-spaced to cover the window.
/// cn is only used by BlowupC (defaults to C(3)).
Polyline criterion_curve_n3(CriterionCurve which, const Params& p, int sample_count = 512,
                            const Window& w = {}, std::optional<double> cn = std::nullopt);

struct SeparatrixConfig {
  Window window;
  double eps_factor = 1e-6;  // start offset from the critical point, in units of its gap
  double bisect_tol = 1e-12;
  IntegratorConfig probe = [] {
    IntegratorConfig c;
    c.t_max = 200.0;
    c.sample_every = 1.0;
    return c;
  }();
  double trace_rtol = 1e-11;
  double trace_atol = 1e-13;
};

enum class SeparatrixMethod { SaddleStableManifold, NodeBoundaryTrace };

struct Separatrix {
  Polyline curve;  // large-v end, critical point, large-u end
  std::size_t critical_index = 0;
  CriticalPoint critical;
  Eigen::Vector2d eigenvalues = Eigen::Vector2d::Zero();  // reduced flow, ascending
  Eigen::Matrix2d eigenvectors = Eigen::Matrix2d::Zero();
  SeparatrixMethod method = SeparatrixMethod::SaddleStableManifold;
};

/// Basin boundary through the symmetric critical point (N = 3).
///
/// Saddle spectrum: the stable manifold, traced by integrating the reversed
/// flow from the critical point along the stable eigendirection. Each branch
/// ends at the window edge or at another equilibrium it runs into.
/// Source spectrum (the energy maximum, e.g. gamma = 1/2, M = 1): every
/// nearby orbit leaves the point, so the boundary is an outgoing orbit not
/// singled out by the linearization. Its crossing of the right window edge is
/// located by bisecting simulated classifications, then the reversed flow
/// (which contracts onto the boundary) is integrated back to the critical
/// point. The second branch is the mirror image (u, v) -> (v, u).
/// Degenerate spectra throw NumericalFailure carrying the eigenvalues.
Separatrix separatrix_n3(const Params& p, const SeparatrixConfig& cfg = {});

/// simulate + classify_run from a reduced point; failures map to Undetermined.
RunClass classify_point(ReducedPoint pt, const Params& p, const IntegratorConfig& cfg);

struct SweepOptions {
  IntegratorConfig integrator = [] {
    IntegratorConfig c;
    c.t_max = 100.0;
    c.sample_every = 1.0;
    return c;
  }();
  int jobs = 1;
  bool with_curves = true;
  int curve_samples = 512;
  SeparatrixConfig separatrix;
  std::optional<double> cn;
};

struct PhasePortrait {
  Window window;
  int nu = 0;
  int nv = 0;
  std::vector<double> u;  // cell centers
  std::vector<double> v;
  std::vector<RunClass> grid;  // row-major, index j * nu + i for (u[i], v[j])
  std::map<std::string, Polyline> curves;
  std::vector<std::string> notes;

  RunClass at(int i, int j) const { return grid[static_cast<std::size_t>(j) * nu + i]; }
};

/// Cells are independent; results are merged by index so the output does not
/// depend on jobs.
PhasePortrait phase_plane_sweep(const Params& p, const Window& w, int nu, int nv,
                                const SweepOptions& opts = {});

struct BoundaryReport {
  int undetermined = 0;
  int blowup = 0;
  int global = 0;
  bool rows_monotone = true;  // each row: blow-up cells, then global cells
  bool cols_monotone = true;

  bool contiguous() const { return undetermined == 0 && rows_monotone && cols_monotone; }
};

BoundaryReport basin_boundary_report(const PhasePortrait& portrait);

/// Terms of d phi / dt = (gamma phi - 1) I + J2 - h^2 R along the flow.
struct PhiRateTerms {
  double phi = 0.0;
  double i_term = 0.0;
  double j1 = 0.0;
  double j2 = 0.0;
  double r_tilde = 0.0;
  double lhs = 0.0;  // <grad phi, velocity>
  double rhs = 0.0;
  double scale = 0.0;  // largest magnitude among the summed terms
};

PhiRateTerms phi_rate_decomposition(const ParticleState& state, const Params& p);

struct DifferenceMatrixReport {
  double n_moment = 0.0;         // N |X|^2
  double pair_sum = 0.0;         // sum_{i<j} (X_j - X_i)^2
  double moment = 0.0;           // |X|^2
  double gram_form = 0.0;        // Y^T (A A^T)^-1 Y
  double ordered_bound = 0.0;    // (2/N) sum_{i<=j} Y_i Y_j, meaningful for increasing X
  bool increasing = false;
  double min_offdiag = 0.0;      // of (A A^T)^-1
  double min_diag = 0.0;
  double offdiag_bound = 0.0;    // 1/N
  double diag_bound = 0.0;       // 2/N
};

/// x must have zero mean (PreconditionError otherwise).
DifferenceMatrixReport lemma51_checks(const Eigen::VectorXd& x);

std::string_view to_string(CriticalKind k);
std::string_view to_string(SeparatrixMethod m);

}  // namespace collapse
