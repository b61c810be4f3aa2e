#pragma once

// Time integration of the particle gradient flow with collision detection.

#include <limits>
#include <optional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "collapse_lab/model.hpp"

namespace collapse {

enum class Method { AdaptiveRK45, ImplicitEuler };

/// Times are in flow time units, collision_eps in position units.
struct IntegratorConfig {
  Method method = Method::AdaptiveRK45;
  double rtol = 1e-10;
  double atol = 1e-14;
  double dt_init = 1e-6;
  double dt_min = 1e-40;
  double dt_max = 0.25;
  double t_max = 10.0;
  double collision_eps = 1e-9;
  double sample_every = 0.1;
  double newton_tol = 1e-12;
  int newton_max_iter = 50;
  long max_steps = 20'000'000;

  /// Throws DomainError when the invariants
  /// 0 < dt_min <= dt_init <= dt_max, collision_eps > 0, t_max > 0 fail.
  void validate() const;
};

struct TrajectorySample {
  double t = 0.0;
  ParticleState state;
  Diagnostics diag;
};

struct TrajectoryRecord {
  std::vector<TrajectorySample> samples;
  long step_count = 0;
  long rejected_steps = 0;
  double collision_eps = 0.0;
  // Largest G_{k+1} - G_k over accepted steps, and whether every step stayed
  // within 10 (rtol |G| + atol) of monotone decrease.
  double max_energy_increase = -std::numeric_limits<double>::infinity();
  bool energy_monotone = true;
  double max_com_drift = 0.0;
};

struct ReachedTmax {};

struct Collision {
  double t_star = 0.0;        // extrapolated collision time
  double t_star_error = 0.0;  // last accepted step size
  int pair = 0;               // particles (pair, pair + 1), zero-based
  double t_last = 0.0;        // time of the last accepted state
};

struct StepSizeUnderflow {
  double t = 0.0;
};

using Outcome = std::variant<ReachedTmax, Collision, StepSizeUnderflow>;

struct SimulationResult {
  TrajectoryRecord record;
  Outcome outcome;
};

/// Integrates from state0.t to state0.t + cfg.t_max. Samples land exactly on
/// multiples of sample_every; the last accepted steps before termination are
/// appended as extra samples so the terminal approach is resolved.
SimulationResult simulate(const ParticleState& state0, const Params& p,
                          const IntegratorConfig& cfg);

/// Solves X+ = X + dt velocity(X+) by damped Newton. Returns nullopt when
/// Newton fails, X+ leaves the cone, or the minimizing-movement inequality
///   G(X+) + (h/s) |X+ - X|^2 / (2 dt) <= G(X) + tolerance
/// is violated (s is Params::flow_scale()).
std::optional<ParticleState> step_implicit_euler(const ParticleState& state, const Params& p,
                                                 double dt, const IntegratorConfig& cfg);

enum class RunClass { GlobalObserved, BlowupObserved, Undetermined };

RunClass classify_run(const TrajectoryRecord& record, const Outcome& outcome,
                      const Params& p);

std::string_view to_string(RunClass c);
std::string_view outcome_name(const Outcome& o);

}  // namespace collapse
