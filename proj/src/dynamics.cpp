#include "collapse_lab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace collapse {

void IntegratorConfig::validate() const {
  if (!(dt_min > 0.0 && dt_min <= dt_init && dt_init <= dt_max)) {
    throw DomainError("integrator needs 0 < dt_min <= dt_init <= dt_max");
  }
  if (!(collision_eps > 0.0)) throw DomainError("collision_eps must be positive");
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw DomainError("t_max must be positive");
  if (!(sample_every > 0.0)) throw DomainError("sample_every must be positive");
  if (!(rtol > 0.0) || !(atol >= 0.0)) throw DomainError("tolerances must be positive");
  if (!(newton_tol > 0.0) || newton_max_iter < 1) throw DomainError("bad newton settings");
  if (max_steps < 1) throw DomainError("max_steps must be positive");
}

namespace {

// Time as an unevaluated sum hi + lo. Steps near a collision drop far below
// ulp(t); a plain double clock would stall while the state keeps moving.
class Clock {
 public:
  explicit Clock(double t) : hi_(t) {}

  void add(double dt) {
    const double s = hi_ + dt;
    const double bp = s - hi_;
    const double err = (hi_ - (s - bp)) + (dt - bp);
    hi_ = s;
    lo_ += err;
    const double r = hi_ + lo_;
    lo_ -= r - hi_;
    hi_ = r;
  }
  void set(double t) {
    hi_ = t;
    lo_ = 0.0;
  }
  double value() const { return hi_ + lo_; }
  double until(double target) const { return (target - hi_) - lo_; }

 private:
  double hi_;
  double lo_ = 0.0;
};

// Dormand-Prince 5(4).
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

// PI controller exponents for a fifth-order solution.
constexpr double kBeta = 0.04;
constexpr double kAlpha = 0.2 - 0.75 * kBeta;
constexpr double kSafety = 0.9;

double min_gap_of(const Eigen::VectorXd& x, int* where = nullptr) {
  double m = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    const double y = x[i + 1] - x[i];
    if (y < m) {
      m = y;
      if (where) *where = static_cast<int>(i);
    }
  }
  return m;
}

struct RkWork {
  Eigen::VectorXd k1, k2, k3, k4, k5, k6, k7, tmp, err;
  explicit RkWork(int n)
      : k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), err(n) {}
};

// One DOPRI step from x with k1 = velocity(x) already in w.k1. Returns false
// when a stage leaves the cone or produces a non-finite velocity. On success
// w.k7 holds velocity(xnew) for reuse.
bool rk45_attempt(const Eigen::VectorXd& x, const Params& p, double dt, RkWork& w,
                  double rtol, double atol, Eigen::VectorXd& xnew, double& err_norm) {
  w.tmp = x + dt * (a21 * w.k1);
  if (!detail::try_velocity(w.tmp, p, w.k2)) return false;
  w.tmp = x + dt * (a31 * w.k1 + a32 * w.k2);
  if (!detail::try_velocity(w.tmp, p, w.k3)) return false;
  w.tmp = x + dt * (a41 * w.k1 + a42 * w.k2 + a43 * w.k3);
  if (!detail::try_velocity(w.tmp, p, w.k4)) return false;
  w.tmp = x + dt * (a51 * w.k1 + a52 * w.k2 + a53 * w.k3 + a54 * w.k4);
  if (!detail::try_velocity(w.tmp, p, w.k5)) return false;
  w.tmp = x + dt * (a61 * w.k1 + a62 * w.k2 + a63 * w.k3 + a64 * w.k4 + a65 * w.k5);
  if (!detail::try_velocity(w.tmp, p, w.k6)) return false;
  xnew = x + dt * (a71 * w.k1 + a73 * w.k3 + a74 * w.k4 + a75 * w.k5 + a76 * w.k6);
  if (!detail::try_velocity(xnew, p, w.k7)) return false;
  w.err = dt * (e1 * w.k1 + e3 * w.k3 + e4 * w.k4 + e5 * w.k5 + e6 * w.k6 + e7 * w.k7);

  // The flow is translation invariant and conserves the mean exactly, so the
  // error is measured on the gaps, scaled by the gaps themselves.
  double acc = 0.0;
  const Eigen::Index m = x.size() - 1;
  for (Eigen::Index i = 0; i < m; ++i) {
    const double e = w.err[i + 1] - w.err[i];
    const double y0 = x[i + 1] - x[i];
    const double y1 = xnew[i + 1] - xnew[i];
    const double sc = atol + rtol * std::max(std::abs(y0), std::abs(y1));
    acc += (e / sc) * (e / sc);
  }
  err_norm = std::sqrt(acc / static_cast<double>(m));
  return std::isfinite(err_norm);
}

struct Accepted {
  double t;
  double min_gap;
  int argmin;
};

}  // namespace

std::optional<ParticleState> step_implicit_euler(const ParticleState& state, const Params& p,
                                                 double dt, const IntegratorConfig& cfg) {
  require_in_cone(state.x, p);
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("implicit step needs dt > 0");
  const Eigen::VectorXd& x0 = state.x;
  const Eigen::Index n = x0.size();

  Eigen::VectorXd v(n);
  if (!detail::try_velocity(x0, p, v)) return std::nullopt;

  // Explicit Euler predictor, falling back to the current state.
  Eigen::VectorXd y = x0 + dt * v;
  if (!detail::try_velocity(y, p, v)) {
    y = x0;
    detail::try_velocity(y, p, v);
  }
  Eigen::VectorXd r = y - x0 - dt * v;
  const double scale = std::max(1.0, x0.cwiseAbs().maxCoeff());
  bool converged = r.lpNorm<Eigen::Infinity>() <= cfg.newton_tol * scale;

  Eigen::VectorXd trial(n), vt(n), rt(n);
  for (int it = 0; it < cfg.newton_max_iter && !converged; ++it) {
    Eigen::MatrixXd jac;
    try {
      jac = Eigen::MatrixXd::Identity(n, n) - dt * velocity_jacobian(ParticleState(y), p);
    } catch (const DomainError&) {
      return std::nullopt;
    }
    const Eigen::VectorXd delta = jac.partialPivLu().solve(-r);
    if (!delta.allFinite()) return std::nullopt;

    const double rnorm = r.norm();
    double lambda = 1.0;
    bool moved = false;
    while (lambda > 1e-10) {
      trial = y + lambda * delta;
      if (detail::try_velocity(trial, p, vt)) {
        rt = trial - x0 - dt * vt;
        if (rt.norm() <= (1.0 - 1e-4 * lambda) * rnorm) {
          moved = true;
          break;
        }
      }
      lambda *= 0.5;
    }
    if (!moved) return std::nullopt;
    y = trial;
    r = rt;
    converged = r.lpNorm<Eigen::Infinity>() <= cfg.newton_tol * scale;
  }
  if (!converged || !in_cone(y)) return std::nullopt;

  double g0 = 0.0, g1 = 0.0;
  if (!detail::try_energy(x0, p, g0) || !detail::try_energy(y, p, g1)) return std::nullopt;
  const double weight = p.h() / p.flow_scale();
  const double movement = weight * (y - x0).squaredNorm() / (2.0 * dt);
  const double tol = 1e-9 * std::max(1.0, std::abs(g0));
  if (g1 + movement > g0 + tol) return std::nullopt;

  return ParticleState(std::move(y), state.t + dt);
}

SimulationResult simulate(const ParticleState& state0, const Params& p,
                          const IntegratorConfig& cfg) {
  cfg.validate();
  require_in_cone(state0.x, p);

  const int n = p.n();
  SimulationResult res;
  TrajectoryRecord& rec = res.record;
  rec.collision_eps = cfg.collision_eps;

  auto push_sample = [&](const Eigen::VectorXd& xs, double ts) {
    ParticleState s(xs, ts);
    Diagnostics d = diagnostics(s, p);
    rec.samples.push_back({ts, std::move(s), d});
  };
  // The terminal state is always recorded. If its time rounds to the last
  // sample's time it replaces that sample to keep times strictly increasing.
  auto push_terminal = [&](const Eigen::VectorXd& xs, double ts) {
    if (!rec.samples.empty() && !(ts > rec.samples.back().t)) rec.samples.pop_back();
    push_sample(xs, ts);
  };

  Eigen::VectorXd x = state0.x;
  Clock clock(state0.t);
  const double t_end = state0.t + cfg.t_max;
  const double com0 = x.mean();
  push_sample(x, state0.t);

  RkWork w(n);
  double g = 0.0;
  if (!detail::try_velocity(x, p, w.k1) || !detail::try_energy(x, p, g)) {
    res.outcome = StepSizeUnderflow{state0.t};
    return res;
  }

  std::deque<Accepted> history;
  {
    int arg = 0;
    const double mg = min_gap_of(x, &arg);
    history.push_back({state0.t, mg, arg});
  }
  double last_sample_gap = history.back().min_gap;
  Eigen::VectorXd prev_x = x;  // state before the last accepted step
  double last_dt = 0.0;

  long sample_index = 1;
  double dt = cfg.dt_init;
  double err_prev = 1e-4;
  bool just_rejected = false;
  Eigen::VectorXd xnew(n);
  const double energy_slack_scale = 10.0;

  auto next_target = [&] {
    return std::min(state0.t + static_cast<double>(sample_index) * cfg.sample_every, t_end);
  };

  while (true) {
    if (rec.step_count >= cfg.max_steps) {
      push_terminal(x, clock.value());
      res.outcome = StepSizeUnderflow{clock.value()};
      return res;
    }
    const double target = next_target();
    const double remaining = clock.until(target);
    double h = dt;
    bool lands = false;
    if (h >= remaining) {
      h = remaining;
      lands = true;
    }

    double err = 0.0;
    bool ok;
    if (cfg.method == Method::AdaptiveRK45) {
      ok = rk45_attempt(x, p, h, w, cfg.rtol, cfg.atol, xnew, err);
    } else {
      auto step = step_implicit_euler(ParticleState(x), p, h, cfg);
      ok = step.has_value();
      if (ok) {
        xnew = std::move(step->x);
        ok = detail::try_velocity(xnew, p, w.k7);
      }
    }

    if (!ok || err > 1.0) {
      ++rec.rejected_steps;
      if (!ok) {
        dt = 0.5 * h;
      } else {
        dt = h * std::max(0.2, kSafety * std::pow(err, -kAlpha));
      }
      just_rejected = true;
      if (dt < cfg.dt_min) {
        push_terminal(x, clock.value());
        res.outcome = StepSizeUnderflow{clock.value()};
        return res;
      }
      continue;
    }

    // Accept.
    ++rec.step_count;
    double g_new = 0.0;
    detail::try_energy(xnew, p, g_new);
    const double increase = g_new - g;
    rec.max_energy_increase = std::max(rec.max_energy_increase, increase);
    if (increase > energy_slack_scale * (cfg.rtol * std::abs(g) + cfg.atol)) {
      rec.energy_monotone = false;
    }
    g = g_new;
    prev_x.swap(x);
    x = xnew;
    w.k1 = w.k7;
    rec.max_com_drift = std::max(rec.max_com_drift, std::abs(x.mean() - com0));
    clock.add(h);
    if (lands) clock.set(target);
    last_dt = h;

    double dt_next;
    if (cfg.method == Method::AdaptiveRK45) {
      const double e = std::max(err, 1e-10);
      double fac = kSafety * std::pow(e, -kAlpha) * std::pow(err_prev, kBeta);
      fac = std::clamp(fac, 0.2, just_rejected ? 1.0 : 10.0);
      dt_next = h * fac;
      err_prev = std::max(err, 1e-4);
    } else {
      dt_next = h * (just_rejected ? 1.0 : 1.25);
    }
    if (lands) dt_next = std::max(dt_next, dt);
    dt = std::min(dt_next, cfg.dt_max);
    just_rejected = false;

    int arg = 0;
    const double mg = min_gap_of(x, &arg);
    history.push_back({clock.value(), mg, arg});
    if (history.size() > 4) history.pop_front();

    if (mg <= cfg.collision_eps) {
      bool decreasing = history.size() >= 2;
      for (std::size_t i = 1; i < history.size(); ++i) {
        decreasing = decreasing && history[i].min_gap < history[i - 1].min_gap;
      }
      if (decreasing) {
        // Near a collision the closing gap behaves like (t* - t)^(1/(gamma+2)).
        const double beta = p.gamma() + 2.0;
        const double y_prev = prev_x[arg + 1] - prev_x[arg];
        const double ratio = std::pow(mg / y_prev, beta);
        Collision c;
        c.t_last = clock.value();
        c.t_star = ratio < 1.0 ? c.t_last + last_dt * ratio / (1.0 - ratio) : c.t_last;
        c.t_star_error = last_dt;
        c.pair = arg;
        push_terminal(x, clock.value());
        res.outcome = c;
        return res;
      }
    }

    if (lands) {
      if (target >= t_end) {
        push_terminal(x, t_end);
        res.outcome = ReachedTmax{};
        return res;
      }
      push_sample(x, target);
      last_sample_gap = mg;
      ++sample_index;
    } else if (mg <= 0.5 * last_sample_gap && clock.value() > rec.samples.back().t) {
      // Extra samples while a gap closes, one per halving.
      push_sample(x, clock.value());
      last_sample_gap = mg;
    }
  }
}

RunClass classify_run(const TrajectoryRecord& record, const Outcome& outcome,
                      [[maybe_unused]] const Params& p) {
  if (!record.energy_monotone) return RunClass::Undetermined;
  const auto& s = record.samples;
  if (std::holds_alternative<Collision>(outcome)) {
    if (s.size() < 5) return RunClass::Undetermined;
    for (std::size_t i = s.size() - 4; i < s.size(); ++i) {
      if (!(s[i].diag.min_gap < s[i - 1].diag.min_gap)) return RunClass::Undetermined;
    }
    return RunClass::BlowupObserved;
  }
  if (std::holds_alternative<ReachedTmax>(outcome)) {
    if (s.empty()) return RunClass::Undetermined;
    const double t0 = s.front().t;
    const double cut = t0 + 0.9 * (s.back().t - t0);
    for (const auto& sample : s) {
      if (sample.t >= cut && sample.diag.min_gap < 10.0 * record.collision_eps) {
        return RunClass::Undetermined;
      }
    }
    return RunClass::GlobalObserved;
  }
  return RunClass::Undetermined;
}

std::string_view to_string(RunClass c) {
  switch (c) {
    case RunClass::GlobalObserved: return "GlobalObserved";
    case RunClass::BlowupObserved: return "BlowupObserved";
    case RunClass::Undetermined: return "Undetermined";
  }
  return "?";
}

std::string_view outcome_name(const Outcome& o) {
  if (std::holds_alternative<ReachedTmax>(o)) return "ReachedTmax";
  if (std::holds_alternative<Collision>(o)) return "Collision";
  return "StepSizeUnderflow";
}

}  // namespace collapse
