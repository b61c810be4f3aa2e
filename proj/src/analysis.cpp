#include "collapse_lab/analysis.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

#include <boost/numeric/odeint.hpp>

namespace collapse {

namespace {

void require_three(const Params& p, const char* what) {
  if (p.n() != 3) throw PreconditionError(std::string(what) + " needs N = 3");
  if (p.log_kernel()) throw PreconditionError(std::string(what) + " needs gamma > 0");
}

ReducedPoint mirror(ReducedPoint pt) { return {pt.v, pt.u}; }

double dist(ReducedPoint a, ReducedPoint b) { return std::hypot(a.u - b.u, a.v - b.v); }

// (u, v) as a linear image of X and back, on the zero-mean slice.
const Eigen::Matrix<double, 2, 3>& diff_map() {
  static const Eigen::Matrix<double, 2, 3> d = (Eigen::Matrix<double, 2, 3>() << -1, 1, 0, 0, -1, 1)
                                                   .finished();
  return d;
}
const Eigen::Matrix<double, 3, 2>& lift_map() {
  static const Eigen::Matrix<double, 3, 2> b =
      (Eigen::Matrix<double, 3, 2>() << -2.0 / 3, -1.0 / 3, 1.0 / 3, -1.0 / 3, 1.0 / 3, 2.0 / 3)
          .finished();
  return b;
}

void fill_hessian(CriticalPoint& cp, const Params& p) {
  const Eigen::MatrixXd q = zero_mean_basis(p.n());
  const Eigen::MatrixXd hr = q.transpose() * energy_hessian(cp.state, p) * q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (hr + hr.transpose()));
  cp.hessian_eigs = es.eigenvalues();
  const double scale = cp.hessian_eigs.cwiseAbs().maxCoeff();
  const bool tiny = (cp.hessian_eigs.cwiseAbs().array() <= 1e-9 * scale).any();
  if (tiny || scale == 0.0) {
    cp.kind = CriticalKind::Degenerate;
  } else if ((cp.hessian_eigs.array() < 0.0).all()) {
    cp.kind = CriticalKind::Max;
  } else if ((cp.hessian_eigs.array() > 0.0).all()) {
    cp.kind = CriticalKind::Min;
  } else {
    cp.kind = CriticalKind::Saddle;
  }
}

double projected_grad_norm(const Eigen::VectorXd& x, const Params& p, const Eigen::MatrixXd& q) {
  return (q.transpose() * energy_gradient(ParticleState(x), p)).norm();
}

// Bisection on a predicate that is true at lo and false at hi.
template <class Pred>
double bisect(double lo, double hi, Pred pred, double tol, int max_iter = 400) {
  for (int k = 0; k < max_iter && hi - lo > tol; ++k) {
    const double mid = 0.5 * (lo + hi);
    (pred(mid) ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

using State2 = std::array<double, 2>;

// Reduced flow, optionally reversed. Throws DomainError outside the cone,
// which ends a trace.
struct ReducedFlow {
  const Params& p;
  double sign;
  void operator()(const State2& x, State2& dx, double) const {
    const Eigen::Vector2d r = reduced_velocity({x[0], x[1]}, p);
    dx[0] = sign * r[0];
    dx[1] = sign * r[1];
  }
};

template <class Stop>
std::vector<ReducedPoint> trace(ReducedPoint start, const Params& p, double sign, double rtol,
                                double atol, double dt0, Stop stop, long max_steps = 200000) {
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_dense_output(atol, rtol, ode::runge_kutta_dopri5<State2>());
  stepper.initialize(State2{start.u, start.v}, 0.0, dt0);
  const ReducedFlow flow{p, sign};
  std::vector<ReducedPoint> pts{start};
  for (long k = 0; k < max_steps; ++k) {
    try {
      stepper.do_step(flow);
    } catch (const DomainError&) {
      break;
    }
    const State2& x = stepper.current_state();
    pts.push_back({x[0], x[1]});
    if (stop(pts.back())) break;
  }
  return pts;
}

}  // namespace

ParticleState reduced_to_state(ReducedPoint pt, double t) {
  if (!(pt.u > 0.0 && pt.v > 0.0) || !std::isfinite(pt.u) || !std::isfinite(pt.v)) {
    throw DomainError("reduced point needs u > 0 and v > 0");
  }
  Eigen::VectorXd x(3);
  x[0] = -(2.0 * pt.u + pt.v) / 3.0;
  x[1] = x[0] + pt.u;
  x[2] = x[1] + pt.v;
  return ParticleState(std::move(x), t);
}

ReducedPoint state_to_reduced(const ParticleState& state) {
  if (state.size() != 3) throw PreconditionError("reduced coordinates need N = 3");
  return {state.x[1] - state.x[0], state.x[2] - state.x[1]};
}

Eigen::Vector2d reduced_velocity(ReducedPoint pt, const Params& p) {
  const Eigen::VectorXd v = velocity(reduced_to_state(pt), p);
  return {v[1] - v[0], v[2] - v[1]};
}

Eigen::Matrix2d reduced_jacobian(ReducedPoint pt, const Params& p) {
  const Eigen::MatrixXd j = velocity_jacobian(reduced_to_state(pt), p);
  return diff_map() * j * lift_map();
}

Eigen::MatrixXd zero_mean_basis(int n) {
  if (n < 2) throw DomainError("zero-mean basis needs N >= 2");
  // Helmert columns: (1, ..., 1, -k, 0, ...) / sqrt(k (k + 1)).
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n - 1);
  for (int k = 1; k < n; ++k) {
    const double c = 1.0 / std::sqrt(static_cast<double>(k) * (k + 1));
    for (int i = 0; i < k; ++i) q(i, k - 1) = c;
    q(k, k - 1) = -k * c;
  }
  return q;
}

CriticalPoint symmetric_critical_point(const Params& p) {
  require_three(p, "symmetric_critical_point");
  const double g = p.gamma();
  const double s = std::pow(p.h() * (1.0 + std::pow(2.0, -1.0 - g)), 1.0 / g);
  CriticalPoint cp;
  Eigen::VectorXd x(3);
  x << -s, 0.0, s;
  cp.state = ParticleState(std::move(x));
  const double vmax = velocity(cp.state, p).cwiseAbs().maxCoeff();
  if (vmax >= 1e-12 * std::max(1.0, 1.0 / s)) {
    throw NumericalFailure("symmetric critical point has residual velocity", cp.state.x);
  }
  cp.grad_norm = projected_grad_norm(cp.state.x, p, zero_mean_basis(3));
  fill_hessian(cp, p);
  return cp;
}

CriticalPoint newton_critical_point(const ParticleState& init, const Params& p, double tol,
                                    int max_iter) {
  require_in_cone(init.x, p);
  if (!is_centered(init)) throw PreconditionError("newton_critical_point needs a zero-mean start");
  const Eigen::MatrixXd q = zero_mean_basis(p.n());
  Eigen::VectorXd x = init.x;

  for (int it = 0; it <= max_iter; ++it) {
    const Eigen::VectorXd g = q.transpose() * energy_gradient(ParticleState(x), p);
    const double gn = g.norm();
    if (gn < tol) {
      CriticalPoint cp;
      cp.state = ParticleState(x);
      cp.grad_norm = gn;
      cp.iterations = it;
      fill_hessian(cp, p);
      return cp;
    }
    if (it == max_iter) break;
    const Eigen::MatrixXd hr = q.transpose() * energy_hessian(ParticleState(x), p) * q;
    const Eigen::VectorXd step = q * hr.fullPivLu().solve(-g);
    double lambda = 1.0;
    bool moved = false;
    while (lambda > 1e-12) {
      const Eigen::VectorXd trial = x + lambda * step;
      if (in_cone(trial) && projected_grad_norm(trial, p, q) < (1.0 - 1e-4 * lambda) * gn) {
        x = trial;
        moved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!moved) throw NumericalFailure("newton_critical_point stalled", x);
  }
  throw NumericalFailure("newton_critical_point did not converge", x);
}

ParticleState dilate_to_critical_curve(const ParticleState& state, const Params& p) {
  if (p.log_kernel()) throw PreconditionError("the critical level set needs gamma > 0");
  require_in_cone(state.x, p);
  const double mean = state.x.mean();
  ParticleState c(state.x.array() - mean, state.t);
  const double w = interaction_w(c, p);
  const double r = std::pow(p.gamma() * w / (p.h() * (p.n() - 1.0)), 1.0 / p.gamma());
  return ParticleState((r * c.x).array() + mean, state.t);
}

void Window::validate() const {
  if (!(u_min > 0.0 && u_min < u_max && v_min > 0.0 && v_min < v_max) ||
      !std::isfinite(u_max) || !std::isfinite(v_max)) {
    throw DomainError("window needs 0 < u_min < u_max and 0 < v_min < v_max");
  }
}

bool Window::contains(ReducedPoint pt) const noexcept {
  return pt.u >= u_min && pt.u <= u_max && pt.v >= v_min && pt.v <= v_max;
}

Polyline critical_curve_n3(const Params& p, int sample_count, const Window& w) {
  require_three(p, "critical_curve_n3");
  w.validate();
  if (sample_count < 2) throw DomainError("sample_count must be at least 2");
  const double target = p.h() * (p.n() - 1.0);
  const auto excess = [&](double u, double v) {
    return p.gamma() * interaction_w(reduced_to_state({u, v}), p) - target;
  };

  Polyline out;
  for (int k = 0; k < sample_count; ++k) {
    const double u = w.u_min * std::pow(w.u_max / w.u_min, k / (sample_count - 1.0));
    // gamma W decreases in v from +inf to h^2 u^-gamma.
    if (p.h() * p.h() * std::pow(u, -p.gamma()) >= target) {
      out.skipped.push_back(u);
      continue;
    }
    double lo = w.v_min;
    while (excess(u, lo) <= 0.0) lo *= 0.5;
    double hi = w.v_max;
    while (excess(u, hi) > 0.0 && hi < 1e12) hi *= 2.0;
    if (excess(u, hi) > 0.0) {
      out.skipped.push_back(u);
      continue;
    }
    const double v = bisect(lo, hi, [&](double vv) { return excess(u, vv) > 0.0; }, 1e-12);
    out.points.push_back({u, v});
  }
  return out;
}

Polyline criterion_curve_n3(CriterionCurve which, const Params& p, int sample_count,
                            const Window& w, std::optional<double> cn) {
  require_three(p, "criterion_curve_n3");
  w.validate();
  if (sample_count < 2) throw DomainError("sample_count must be at least 2");
  const double c = cn ? *cn : c_of_n(3).value;

  const auto holds = [&](ReducedPoint pt) {
    const ParticleState s = reduced_to_state(pt);
    switch (which) {
      case CriterionCurve::BlowupW: return blowup_w_check(s, p).holds;
      case CriterionCurve::BlowupC: return blowup_c_check(s, p, c).holds;
      case CriterionCurve::GlobalExistence: return global_existence_check(s, p).holds;
    }
    return false;
  };

  const double slope_lo = w.v_min / w.u_max;
  const double slope_hi = w.v_max / w.u_min;
  Polyline out;
  for (int k = 0; k < sample_count; ++k) {
    const double m = slope_lo * std::pow(slope_hi / slope_lo, k / (sample_count - 1.0));
    const double norm = std::hypot(1.0, m);
    const auto at = [&](double log_r) {
      const double r = std::exp(log_r);
      return ReducedPoint{r / norm, r * m / norm};
    };
    double lo = std::log(1e-10), hi = std::log(1e10);
    const bool small_side = holds(at(lo));
    if (small_side == holds(at(hi))) {
      out.skipped.push_back(m);
      continue;
    }
    const double log_r =
        bisect(lo, hi, [&](double lr) { return holds(at(lr)) == small_side; }, 1e-14);
    out.points.push_back(at(log_r));
  }
  return out;
}

RunClass classify_point(ReducedPoint pt, const Params& p, const IntegratorConfig& cfg) {
  try {
    const SimulationResult r = simulate(reduced_to_state(pt), p, cfg);
    return classify_run(r.record, r.outcome, p);
  } catch (const std::exception&) {
    return RunClass::Undetermined;
  }
}

Separatrix separatrix_n3(const Params& p, const SeparatrixConfig& cfg) {
  require_three(p, "separatrix_n3");
  cfg.window.validate();
  Separatrix out;
  out.critical = symmetric_critical_point(p);
  const double s = out.critical.state.x[2];
  const ReducedPoint cp{s, s};

  Eigen::EigenSolver<Eigen::Matrix2d> es(reduced_jacobian(cp, p));
  const Eigen::Vector2cd lam = es.eigenvalues();
  const Eigen::Matrix2cd vec = es.eigenvectors();
  std::ostringstream spectrum;
  spectrum.precision(10);
  spectrum << "reduced spectrum (" << lam[0].real() << ", " << lam[1].real() << ")";
  const double scale = lam.cwiseAbs().maxCoeff();
  if (std::abs(lam[0].imag()) > 1e-9 * scale || std::abs(lam[1].imag()) > 1e-9 * scale ||
      std::abs(lam[0].real()) <= 1e-9 * scale || std::abs(lam[1].real()) <= 1e-9 * scale) {
    throw NumericalFailure("degenerate critical point, " + spectrum.str(),
                           Eigen::Vector2d(lam[0].real(), lam[1].real()));
  }
  const int lo_idx = lam[0].real() <= lam[1].real() ? 0 : 1;
  const int hi_idx = 1 - lo_idx;
  out.eigenvalues = {lam[lo_idx].real(), lam[hi_idx].real()};
  out.eigenvectors.col(0) = vec.col(lo_idx).real().normalized();
  out.eigenvectors.col(1) = vec.col(hi_idx).real().normalized();

  const Window& w = cfg.window;
  const double dt0 = 1e-3 / scale;
  std::vector<ReducedPoint> upper, lower;  // each ordered outward from the critical point

  if (out.eigenvalues[0] < 0.0 && out.eigenvalues[1] > 0.0) {
    out.method = SeparatrixMethod::SaddleStableManifold;
    const Eigen::Vector2d e = out.eigenvectors.col(0);
    const double eps = cfg.eps_factor * s;
    // A branch ends at the window edge or where it runs into another
    // equilibrium (for small gamma the stable manifold joins asymmetric maxima).
    const double rest_speed = 1e-9 * scale * s;
    const auto outside = [&](ReducedPoint pt) {
      return !w.contains(pt) || reduced_velocity(pt, p).norm() < rest_speed;
    };
    std::vector<ReducedPoint> a =
        trace({cp.u + eps * e[0], cp.v + eps * e[1]}, p, -1.0, cfg.trace_rtol, cfg.trace_atol,
              dt0, outside);
    std::vector<ReducedPoint> b =
        trace({cp.u - eps * e[0], cp.v - eps * e[1]}, p, -1.0, cfg.trace_rtol, cfg.trace_atol,
              dt0, outside);
    const auto lean = [](const std::vector<ReducedPoint>& br) {
      return br.back().v - br.back().u;
    };
    if (lean(a) >= lean(b)) {
      upper = std::move(a);
      lower = std::move(b);
    } else {
      upper = std::move(b);
      lower = std::move(a);
    }
  } else if (out.eigenvalues[0] > 0.0) {
    out.method = SeparatrixMethod::NodeBoundaryTrace;
    const double u_edge = w.u_max;
    const auto blows = [&](double v) {
      const RunClass c = classify_point({u_edge, v}, p, cfg.probe);
      if (c == RunClass::Undetermined) {
        // A run that neither collides nor settles within t_max sits on the
        // boundary to within the bisection resolution; treat it as blow-up.
        return true;
      }
      return c == RunClass::BlowupObserved;
    };
    if (!blows(w.v_min) || blows(w.v_max)) {
      throw NumericalFailure("window edge u = u_max does not straddle the basin boundary, " +
                             spectrum.str(),
                             Eigen::Vector2d(w.v_min, w.v_max));
    }
    const double v_b = bisect(w.v_min, w.v_max, blows, cfg.bisect_tol);
    const double stop_radius = cfg.eps_factor * s;
    std::vector<ReducedPoint> back =
        trace({u_edge, v_b}, p, -1.0, cfg.trace_rtol, cfg.trace_atol, dt0,
              [&](ReducedPoint pt) { return dist(pt, cp) < stop_radius; });
    if (dist(back.back(), cp) >= stop_radius) {
      throw NumericalFailure("reverse trace did not return to the critical point, " +
                                 spectrum.str(),
                             Eigen::Vector2d(back.back().u, back.back().v));
    }
    lower.assign(back.rbegin(), back.rend());
    upper.reserve(lower.size());
    for (const auto& pt : lower) upper.push_back(mirror(pt));
  } else {
    throw NumericalFailure("critical point attracts in every direction, " + spectrum.str(),
                           out.eigenvalues);
  }

  auto& pts = out.curve.points;
  pts.assign(upper.rbegin(), upper.rend());
  out.critical_index = pts.size();
  pts.push_back(cp);
  pts.insert(pts.end(), lower.begin(), lower.end());
  return out;
}

PhasePortrait phase_plane_sweep(const Params& p, const Window& w, int nu, int nv,
                                const SweepOptions& opts) {
  require_three(p, "phase_plane_sweep");
  w.validate();
  if (nu < 2 || nv < 2) throw DomainError("sweep resolution must be at least 2 x 2");
  opts.integrator.validate();

  PhasePortrait out;
  out.window = w;
  out.nu = nu;
  out.nv = nv;
  for (int i = 0; i < nu; ++i) out.u.push_back(w.u_min + (i + 0.5) * (w.u_max - w.u_min) / nu);
  for (int j = 0; j < nv; ++j) out.v.push_back(w.v_min + (j + 0.5) * (w.v_max - w.v_min) / nv);
  out.grid.assign(static_cast<std::size_t>(nu) * nv, RunClass::Undetermined);

  const std::size_t cells = out.grid.size();
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t k = next++; k < cells; k = next++) {
      const std::size_t i = k % nu, j = k / nu;
      out.grid[k] = classify_point({out.u[i], out.v[j]}, p, opts.integrator);
    }
  };
  const int jobs = std::clamp<int>(opts.jobs, 1, static_cast<int>(std::min<std::size_t>(cells, 256)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }

  if (opts.with_curves) {
    const int n = opts.curve_samples;
    const auto guarded = [&](const char* name, auto&& make) {
      try {
        out.curves[name] = make();
      } catch (const std::exception& e) {
        out.notes.push_back(std::string(name) + ": " + e.what());
      }
    };
    guarded("critical_curve", [&] { return critical_curve_n3(p, n, w); });
    guarded("bu_w_curve",
            [&] { return criterion_curve_n3(CriterionCurve::BlowupW, p, n, w, opts.cn); });
    guarded("bu_c_curve",
            [&] { return criterion_curve_n3(CriterionCurve::BlowupC, p, n, w, opts.cn); });
    guarded("ge_curve",
            [&] { return criterion_curve_n3(CriterionCurve::GlobalExistence, p, n, w, opts.cn); });
    guarded("separatrix", [&] {
      SeparatrixConfig sc = opts.separatrix;
      sc.window = w;
      return separatrix_n3(p, sc).curve;
    });
  }
  return out;
}

BoundaryReport basin_boundary_report(const PhasePortrait& portrait) {
  BoundaryReport r;
  for (RunClass c : portrait.grid) {
    if (c == RunClass::Undetermined) ++r.undetermined;
    if (c == RunClass::BlowupObserved) ++r.blowup;
    if (c == RunClass::GlobalObserved) ++r.global;
  }
  for (int j = 0; j < portrait.nv; ++j) {
    bool seen_global = false;
    for (int i = 0; i < portrait.nu; ++i) {
      const RunClass c = portrait.at(i, j);
      if (c == RunClass::GlobalObserved) seen_global = true;
      if (c == RunClass::BlowupObserved && seen_global) r.rows_monotone = false;
    }
  }
  for (int i = 0; i < portrait.nu; ++i) {
    bool seen_global = false;
    for (int j = 0; j < portrait.nv; ++j) {
      const RunClass c = portrait.at(i, j);
      if (c == RunClass::GlobalObserved) seen_global = true;
      if (c == RunClass::BlowupObserved && seen_global) r.cols_monotone = false;
    }
  }
  return r;
}

PhiRateTerms phi_rate_decomposition(const ParticleState& state, const Params& p) {
  if (p.log_kernel()) throw PreconditionError("phi_rate_decomposition needs gamma > 0");
  require_in_cone(state.x, p);
  const int n = p.n();
  const double g = p.gamma();
  const double h = p.h();
  const Eigen::VectorXd& x = state.x;

  // Gap powers with ghost gaps Y_0 = Y_N = +inf contributing zero.
  std::vector<double> y(n + 1, 0.0), a(n + 1, 0.0), r(n + 1, 0.0), pw(n + 1, 0.0);
  for (int k = 1; k < n; ++k) {
    y[k] = x[k] - x[k - 1];
    a[k] = std::pow(y[k], -g - 1.0);
    r[k] = 1.0 / y[k];
    pw[k] = std::pow(y[k], -g);
  }

  PhiRateTerms t;
  for (int k = 1; k < n; ++k) t.phi += pw[k];
  t.phi *= h / g;

  for (int i = 1; i <= n; ++i) {
    t.i_term += (r[i] - r[i - 1]) * (a[i] - a[i - 1]);
    t.j1 += (a[i] - a[i - 1]) * (a[i] - a[i - 1]);
  }
  t.i_term *= h;
  t.j1 *= h * h;

  for (int i = 0; i < n; ++i) {
    const double da = a[i + 1] - a[i];
    for (int j = 0; j < n; ++j) {
      if (std::abs(j - i) < 2) continue;
      const double d = x[j] - x[i];
      t.j2 += std::copysign(std::pow(std::abs(d), -g - 1.0), d) * da;
    }
  }
  t.j2 *= h * h;

  for (int j = 1; j + 1 < n; ++j) {
    t.r_tilde += (a[j + 1] - a[j]) * (std::pow(y[j], 1.0 - g) - std::pow(y[j + 1], 1.0 - g)) /
                 (y[j] * y[j + 1]);
  }
  for (int j = 1; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (i == j - 1 || i == j) continue;
      t.r_tilde += pw[j] * (r[i + 1] - r[i]) * (a[i + 1] - a[i]);
    }
  }

  const Eigen::VectorXd v = velocity(state, p);
  for (int i = 0; i < n; ++i) t.lhs += h * (a[i + 1] - a[i]) * v[i];

  const double first = (g * t.phi - 1.0) * t.i_term;
  const double third = h * h * t.r_tilde;
  t.rhs = first + t.j2 - third;
  t.scale = std::max({std::abs(first), std::abs(t.j2), std::abs(third), std::abs(t.lhs)});
  return t;
}

DifferenceMatrixReport lemma51_checks(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  if (n < 2) throw DomainError("lemma51_checks needs at least two entries");
  if (!is_centered(ParticleState(x))) throw PreconditionError("lemma51_checks needs zero mean");
  DifferenceMatrixReport r;
  const double nd = static_cast<double>(n);
  r.moment = x.squaredNorm();
  r.n_moment = nd * r.moment;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) r.pair_sum += (x[j] - x[i]) * (x[j] - x[i]);
  }

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n - 1, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    a(i, i) = -1.0;
    a(i, i + 1) = 1.0;
  }
  const Eigen::MatrixXd gram = a * a.transpose();
  const Eigen::MatrixXd inv = gram.ldlt().solve(Eigen::MatrixXd::Identity(n - 1, n - 1));
  const Eigen::VectorXd y = a * x;
  r.gram_form = y.dot(inv * y);
  r.increasing = (y.array() > 0.0).all();
  double tail = 0.0, acc = 0.0;
  for (Eigen::Index i = n - 2; i >= 0; --i) {
    tail += y[i];
    acc += y[i] * tail;  // y_i * sum_{j >= i} y_j
  }
  r.ordered_bound = 2.0 / nd * acc;

  r.min_diag = inv.diagonal().minCoeff();
  r.min_offdiag = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n - 1; ++i) {
    for (Eigen::Index j = 0; j < n - 1; ++j) {
      if (i != j) r.min_offdiag = std::min(r.min_offdiag, inv(i, j));
    }
  }
  if (n == 2) r.min_offdiag = std::numeric_limits<double>::quiet_NaN();
  r.offdiag_bound = 1.0 / nd;
  r.diag_bound = 2.0 / nd;
  return r;
}

std::string_view to_string(CriticalKind k) {
  switch (k) {
    case CriticalKind::Saddle: return "Saddle";
    case CriticalKind::Max: return "Max";
    case CriticalKind::Min: return "Min";
    case CriticalKind::Degenerate: return "Degenerate";
  }
  return "?";
}

std::string_view to_string(SeparatrixMethod m) {
  switch (m) {
    case SeparatrixMethod::SaddleStableManifold: return "SaddleStableManifold";
    case SeparatrixMethod::NodeBoundaryTrace: return "NodeBoundaryTrace";
  }
  return "?";
}

}  // namespace collapse
