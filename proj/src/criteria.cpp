#include "collapse_lab/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Sparse>

#include "collapse_lab/density.hpp"

namespace collapse {

bool is_centered(const ParticleState& state) noexcept {
  if (state.x.size() == 0) return true;
  const double scale = std::max(1.0, state.x.cwiseAbs().maxCoeff());
  return std::abs(center_of_mass(state)) <= kZeroMeanTol * scale;
}

ParticleState recenter(const ParticleState& state) {
  ParticleState out = state;
  out.x.array() -= center_of_mass(state);
  return out;
}

namespace {

void require_positive_gamma(const Params& p, const char* what) {
  if (p.log_kernel()) {
    throw PreconditionError(std::string(what) +
                            " needs gamma > 0; use gamma0_check for the log kernel");
  }
}

void require_centered(const ParticleState& state) {
  if (!is_centered(state)) {
    std::ostringstream os;
    os << "blow-up criteria need a centered state (center of mass "
       << center_of_mass(state) << "); recenter first";
    throw PreconditionError(os.str());
  }
}

// Tridiagonal second-difference operator L = A A^T applied to mu.
Eigen::VectorXd apply_gram(const Eigen::VectorXd& mu) {
  const Eigen::Index m = mu.size();
  Eigen::VectorXd out(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    out[i] = 2.0 * mu[i] - (i > 0 ? mu[i - 1] : 0.0) - (i + 1 < m ? mu[i + 1] : 0.0);
  }
  return out;
}

double log_c_unchecked(const Eigen::VectorXd& mu) {
  const double m = static_cast<double>(mu.size());
  const double quad = mu.dot(apply_gram(mu));
  return 2.0 / m * mu.array().log().sum() - std::log(quad);
}

void require_positive_mu(const Eigen::VectorXd& mu) {
  if (mu.size() < 1) throw DomainError("mu needs at least one entry");
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    if (!(mu[i] > 0.0) || !std::isfinite(mu[i])) {
      throw DomainError("mu entries must be positive and finite");
    }
  }
}

bool all_positive(const Eigen::VectorXd& mu) { return (mu.array() > 0.0).all(); }

Eigen::VectorXd tangent_gradient(const Eigen::VectorXd& mu_unit) {
  Eigen::VectorXd g = log_c_of_mu_gradient(mu_unit);
  g -= g.dot(mu_unit) * mu_unit;
  return g;
}

struct StartOutcome {
  Eigen::VectorXd mu;
  double log_value = -std::numeric_limits<double>::infinity();
  double grad_norm = std::numeric_limits<double>::infinity();
  int ascent_iterations = 0;
  int newton_iterations = 0;
};

// Projected gradient ascent of log C on the unit sphere with Armijo
// backtracking.
int ascend(Eigen::VectorXd& mu, const CnOptions& o) {
  mu.normalize();
  double f = log_c_unchecked(mu);
  double step = 1.0;
  int it = 0;
  for (; it < o.max_ascent_iterations; ++it) {
    const Eigen::VectorXd g = tangent_gradient(mu);
    const double gn2 = g.squaredNorm();
    if (std::sqrt(gn2) < o.tol) break;
    step *= 2.0;
    bool accepted = false;
    while (step > 1e-300) {
      Eigen::VectorXd trial = (mu + step * g).normalized();
      if (all_positive(trial)) {
        const double ft = log_c_unchecked(trial);
        if (ft >= f + 1e-4 * step * gn2) {
          mu = std::move(trial);
          f = ft;
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return it;
}

// Newton on the stationarity system mu_i (L mu)_i = 1 / (N - 1), whose
// positive solution is the maximizer scaled to mu^T L mu = 1.
int newton_polish(Eigen::VectorXd& mu, const CnOptions& o) {
  const Eigen::Index m = mu.size();
  const double target = 1.0 / static_cast<double>(m);
  mu /= std::sqrt(mu.dot(apply_gram(mu)));
  auto residual = [&](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(v.cwiseProduct(apply_gram(v)).array() - target);
  };
  Eigen::VectorXd res = residual(mu);
  int it = 0;
  for (; it < o.max_newton_iterations; ++it) {
    const double rn = res.lpNorm<Eigen::Infinity>();
    if (rn <= 8.0 * std::numeric_limits<double>::epsilon() * target) break;
    const Eigen::VectorXd lmu = apply_gram(mu);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(3 * m));
    for (Eigen::Index i = 0; i < m; ++i) {
      trips.emplace_back(i, i, lmu[i] + 2.0 * mu[i]);
      if (i > 0) trips.emplace_back(i, i - 1, -mu[i]);
      if (i + 1 < m) trips.emplace_back(i, i + 1, -mu[i]);
    }
    Eigen::SparseMatrix<double> jac(m, m);
    jac.setFromTriplets(trips.begin(), trips.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(jac);
    if (lu.info() != Eigen::Success) break;
    const Eigen::VectorXd delta = lu.solve(-res);
    double t = 1.0;
    bool moved = false;
    while (t > 1e-12) {
      Eigen::VectorXd trial = mu + t * delta;
      if (all_positive(trial)) {
        Eigen::VectorXd tr = residual(trial);
        if (tr.lpNorm<Eigen::Infinity>() < rn) {
          mu = std::move(trial);
          res = std::move(tr);
          moved = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  return it;
}

StartOutcome run_start(Eigen::VectorXd mu, const CnOptions& o) {
  StartOutcome out;
  out.ascent_iterations = ascend(mu, o);
  out.newton_iterations = newton_polish(mu, o);
  mu.normalize();
  out.log_value = log_c_unchecked(mu);
  out.grad_norm = tangent_gradient(mu).norm();
  out.mu = std::move(mu);
  return out;
}

}  // namespace

double global_existence_threshold(int n) {
  if (n < 3) throw DomainError("N must be at least 3");
  if (n == 3) return 1.0;
  const double k = n - 2.0;
  return 1.0 / (1.0 + 2.0 * k * k);
}

double global_existence_constant(int n) {
  if (n <= 3) throw DomainError("c(N) is defined for N > 3");
  const double k = n - 2.0;
  return 2.0 * k * k / (n - 3.0);
}

CheckResult global_existence_check(const ParticleState& state0, const Params& p) {
  require_positive_gamma(p, "global_existence_check");
  CheckResult r;
  r.threshold = global_existence_threshold(p.n());
  r.measured = p.gamma() * phi(state0, p);
  r.holds = r.measured < r.threshold;
  return r;
}

CheckResult blowup_w_check(const ParticleState& state0, const Params& p) {
  require_positive_gamma(p, "blowup_w_check");
  require_in_cone(state0.x, p);
  require_centered(state0);
  const double g = p.gamma();
  const double n = p.n();
  // N^(2/g) (N-1) / (N+1)^(2/g+1) rewritten to avoid overflow.
  const double ratio = std::pow(n / (n + 1.0), 2.0 / g) * (n - 1.0) / (n + 1.0);
  CheckResult r;
  r.threshold = std::pow(p.mass() / 2.0, 2.0 / g + 1.0) * ratio / p.h();
  r.measured = second_moment(state0);
  r.holds = r.measured < r.threshold;
  return r;
}

CheckResult blowup_c_check(const ParticleState& state0, const Params& p, double cn) {
  require_positive_gamma(p, "blowup_c_check");
  if (!(cn > 0.0) || !std::isfinite(cn)) throw DomainError("C(N) must be positive");
  require_in_cone(state0.x, p);
  require_centered(state0);
  const double h = p.h();
  const double nm1 = p.n() - 1.0;
  const double g0 = energy_g(state0, p);
  CheckResult r;
  r.threshold = std::exp(std::log(h * h * nm1 * nm1 * cn) - 2.0 / p.gamma() -
                         2.0 * g0 / (h * nm1));
  r.measured = second_moment(state0);
  r.holds = r.measured < r.threshold;
  return r;
}

CheckResult blowup_u_check(const ParticleState& state0, const Params& p) {
  // The entropy criterion is the member C(mu) = 1/(N-1) of the continuum.
  return blowup_c_check(state0, p, 1.0 / (p.n() - 1.0));
}

double c_of_mu(const Eigen::VectorXd& mu) {
  require_positive_mu(mu);
  return std::exp(log_c_unchecked(mu));
}

Eigen::VectorXd log_c_of_mu_gradient(const Eigen::VectorXd& mu) {
  require_positive_mu(mu);
  const double m = static_cast<double>(mu.size());
  const Eigen::VectorXd lmu = apply_gram(mu);
  const double quad = mu.dot(lmu);
  return (2.0 / m) * mu.cwiseInverse() - (2.0 / quad) * lmu;
}

CnResult c_of_n(int n, const CnOptions& options) {
  if (n < 3) throw DomainError("C(N) needs N >= 3");
  const Eigen::Index m = n - 1;

  std::vector<Eigen::VectorXd> starts;
  starts.emplace_back(Eigen::VectorXd::Ones(m));
  starts.emplace_back(gaussian_mu(n));
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> dist(0.05, 1.0);
  for (int k = 0; k < options.random_starts; ++k) {
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) v[i] = dist(rng);
    starts.push_back(std::move(v));
  }

  StartOutcome best;
  CnResult result;
  for (auto& s : starts) {
    StartOutcome o = run_start(std::move(s), options);
    result.ascent_iterations += o.ascent_iterations;
    result.newton_iterations += o.newton_iterations;
    ++result.starts;
    const bool certified = o.grad_norm < options.tol;
    const bool best_certified = best.grad_norm < options.tol;
    if ((certified && !best_certified) ||
        (certified == best_certified && o.log_value > best.log_value)) {
      best = std::move(o);
    }
  }
  if (!(best.grad_norm < options.tol)) {
    std::ostringstream os;
    os << "C(" << n << ") optimizer stalled at gradient norm " << best.grad_norm;
    throw NumericalFailure(os.str(), best.mu);
  }
  result.value = std::exp(best.log_value);
  result.mu = std::move(best.mu);
  result.grad_norm = best.grad_norm;
  return result;
}

Eigen::VectorXd gaussian_mu(int n) {
  if (n < 2) throw DomainError("gaussian_mu needs N >= 2");
  Eigen::VectorXd mu(n - 1);
  for (int i = 1; i < n; ++i) {
    mu[i - 1] = std_normal_pdf(std_normal_quantile(static_cast<double>(i) / n));
  }
  return mu;
}

double lambda_min(int n) {
  if (n < 2) throw DomainError("lambda_min needs N >= 2");
  const double s = std::sin(std::numbers::pi / (2.0 * n));
  return 4.0 * s * s;
}

Eigen::VectorXd difference_gram_spectrum(int n) {
  if (n < 2) throw DomainError("difference_gram_spectrum needs N >= 2");
  const Eigen::Index m = n - 1;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, i) = -1.0;
    a(i, i + 1) = 1.0;
  }
  const Eigen::MatrixXd gram = a * a.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

std::vector<double> entropy_criterion_nu_roots(int n) {
  if (n < 3) throw DomainError("N must be at least 3");
  const double k = 2.0 / (n - 1.0);
  auto f = [k](double nu) { return k * (nu * nu - nu + 1.0) - std::pow(nu, k); };
  auto df = [k](double nu) { return k * (2.0 * nu - 1.0) - k * std::pow(nu, k - 1.0); };
  auto bisect = [](auto&& fn, double lo, double hi) {
    double flo = fn(lo);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = fn(mid);
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  std::vector<double> roots;
  const int samples = 4000;
  const double lo = std::log(1e-8), hi = std::log(1e4);
  double prev_nu = std::exp(lo);
  double prev_f = f(prev_nu), prev_df = df(prev_nu);
  for (int s = 1; s <= samples; ++s) {
    const double nu = std::exp(lo + (hi - lo) * s / samples);
    const double fv = f(nu), dv = df(nu);
    if ((fv < 0.0) != (prev_f < 0.0)) {
      roots.push_back(bisect(f, prev_nu, nu));
    } else if ((dv < 0.0) != (prev_df < 0.0)) {
      // Local minimum of f: a tangential root if it touches zero.
      const double at = bisect(df, prev_nu, nu);
      if (std::abs(f(at)) <= 1e-14) roots.push_back(at);
    }
    prev_nu = nu;
    prev_f = fv;
    prev_df = dv;
  }
  return roots;
}

double gamma0_mass_threshold(int n) {
  if (n < 1) throw DomainError("N must be positive");
  return 2.0 * (n + 1.0) / n;
}

MassRegime gamma0_check(const Params& p) {
  const double t = gamma0_mass_threshold(p.n());
  const double m = p.mass();
  if (std::abs(m - t) <= 4.0 * std::numeric_limits<double>::epsilon() * t) {
    return MassRegime::Critical;
  }
  return m > t ? MassRegime::Supercritical : MassRegime::Subcritical;
}

Certificate classify_initial(const ParticleState& state0, const Params& p,
                             std::optional<double> cn) {
  require_in_cone(state0.x, p);
  Certificate c;
  if (p.log_kernel()) {
    const MassRegime regime = gamma0_check(p);
    c.thresholds[CriterionTag::Gamma0_Mass] = {gamma0_mass_threshold(p.n()), p.mass()};
    if (regime == MassRegime::Supercritical) {
      c.triggered.insert(CriterionTag::Gamma0_Mass);
      c.verdict = Verdict::BlowupCertified;
    } else if (regime == MassRegime::Subcritical) {
      c.triggered.insert(CriterionTag::Gamma0_Mass);
      c.verdict = Verdict::GlobalCertified;
    }
    return c;
  }

  const ParticleState centered = recenter(state0);
  const double cn_value = cn ? *cn : c_of_n(p.n()).value;
  const auto record = [&c](CriterionTag tag, const CheckResult& r) {
    c.thresholds[tag] = {r.threshold, r.measured};
    if (r.holds) c.triggered.insert(tag);
  };
  record(CriterionTag::GE_4_8, global_existence_check(state0, p));
  record(CriterionTag::BU_W_5_2, blowup_w_check(centered, p));
  record(CriterionTag::BU_U_5_7, blowup_u_check(centered, p));
  record(CriterionTag::BU_C_5_10, blowup_c_check(centered, p, cn_value));

  const bool global = c.triggered.contains(CriterionTag::GE_4_8);
  const bool blowup = c.triggered.contains(CriterionTag::BU_W_5_2) ||
                      c.triggered.contains(CriterionTag::BU_U_5_7) ||
                      c.triggered.contains(CriterionTag::BU_C_5_10);
  if (global && blowup) {
    throw std::logic_error("smallness condition and a blow-up criterion hold together");
  }
  if (global) c.verdict = Verdict::GlobalCertified;
  if (blowup) c.verdict = Verdict::BlowupCertified;
  return c;
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::GlobalCertified: return "GlobalCertified";
    case Verdict::BlowupCertified: return "BlowupCertified";
    case Verdict::Uncertified: return "Uncertified";
  }
  return "?";
}

std::string_view to_string(CriterionTag t) {
  switch (t) {
    case CriterionTag::GE_4_8: return "GE_4_8";
    case CriterionTag::BU_W_5_2: return "BU_W_5_2";
    case CriterionTag::BU_U_5_7: return "BU_U_5_7";
    case CriterionTag::BU_C_5_10: return "BU_C_5_10";
    case CriterionTag::Gamma0_Mass: return "Gamma0_Mass";
  }
  return "?";
}

std::string_view to_string(MassRegime r) {
  switch (r) {
    case MassRegime::Subcritical: return "Subcritical";
    case MassRegime::Critical: return "Critical";
    case MassRegime::Supercritical: return "Supercritical";
  }
  return "?";
}

}  // namespace collapse
