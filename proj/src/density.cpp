#include "collapse_lab/density.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "collapse_lab/criteria.hpp"

namespace collapse {

double std_normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double std_normal_cdf(double x) noexcept {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace {

// Acklam's rational approximation, relative error about 1e-9 before
// refinement. Valid for 0 < q <= 0.5.
double quantile_lower(double q) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double q_low = 0.02425;

  double x;
  if (q < q_low) {
    const double r = std::sqrt(-2.0 * std::log(q));
    x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  } else {
    const double s = q - 0.5;
    const double r = s * s;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * s /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  // One Newton step on the CDF. The lower tail keeps erfc accurate.
  const double e = std_normal_cdf(x) - q;
  x -= e / std_normal_pdf(x);
  return x;
}

struct MomentsVisitor {
  double mass;
  double gamma;
  ContinuousReport& out;

  void operator()(const GaussianDensity& g) const {
    out.second_moment = mass * (g.mean * g.mean + g.sigma * g.sigma);
    out.centered_second_moment = mass * g.sigma * g.sigma;
    out.entropy = mass * std::log(mass / (g.sigma * std::sqrt(2.0 * std::numbers::pi *
                                                              std::numbers::e)));
    // x - y ~ N(0, 2 sigma^2). In units w = |x - y| / (sigma sqrt 2):
    //   pair = M^2 (sigma sqrt 2)^-gamma * 2 int_0^inf pdf(w) w^-gamma dw.
    // On [0, 1] substitute w = t^(1/(1-gamma)) to remove the singularity.
    using boost::math::quadrature::gauss_kronrod;
    const double p = 1.0 / (1.0 - gamma);
    double err_near = 0.0, err_far = 0.0;
    const double near = p * gauss_kronrod<double, 31>::integrate(
                                [p](double t) { return std_normal_pdf(std::pow(t, p)); },
                                0.0, 1.0, 15, 1e-13, &err_near);
    const double far = gauss_kronrod<double, 31>::integrate(
        [this](double w) { return std_normal_pdf(w) * std::pow(w, -gamma); }, 1.0,
        std::numeric_limits<double>::infinity(), 15, 1e-13, &err_far);
    const double scale = mass * mass * std::pow(g.sigma * std::numbers::sqrt2, -gamma) * 2.0;
    const double pair = scale * (near + far);
    out.interaction = pair / gamma;
    out.interaction_error = scale * (p * err_near + err_far) / gamma;
  }

  void operator()(const UniformDensity& u) const {
    const double len = u.b - u.a;
    out.second_moment = mass * (u.a * u.a + u.a * u.b + u.b * u.b) / 3.0;
    out.centered_second_moment = mass * len * len / 12.0;
    out.entropy = mass * std::log(mass / len);
    // x - y has the triangular density (L - |z|) / L^2 on [-L, L].
    const double pair =
        2.0 * mass * mass * std::pow(len, -gamma) / ((1.0 - gamma) * (2.0 - gamma));
    out.interaction = pair / gamma;
    out.interaction_error = 0.0;
  }
};

}  // namespace

double std_normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
  if (q > 0.5) return -quantile_lower(1.0 - q);
  return quantile_lower(q);
}

void DensitySpec::validate() const {
  if (!(mass > 0.0) || !std::isfinite(mass)) throw DomainError("density mass must be positive");
  if (const auto* g = std::get_if<GaussianDensity>(&kind)) {
    if (!(g->sigma > 0.0) || !std::isfinite(g->mean)) {
      throw DomainError("gaussian density needs sigma > 0 and a finite mean");
    }
  } else if (const auto* u = std::get_if<UniformDensity>(&kind)) {
    if (!(u->a < u->b) || !std::isfinite(u->a) || !std::isfinite(u->b)) {
      throw DomainError("uniform density needs a < b");
    }
  }
}

std::pair<ParticleState, Params> quantile_init(const DensitySpec& spec, int n, double gamma,
                                               TimeScaling scaling) {
  spec.validate();
  Params p(gamma, spec.mass, n, scaling);
  Eigen::VectorXd x(n);
  for (int i = 1; i <= n; ++i) {
    const double level = static_cast<double>(i) / (n + 1.0);
    if (const auto* g = std::get_if<GaussianDensity>(&spec.kind)) {
      x[i - 1] = g->mean + g->sigma * std_normal_quantile(level);
    } else {
      const auto& u = std::get<UniformDensity>(spec.kind);
      x[i - 1] = u.a + (u.b - u.a) * level;
    }
  }
  ParticleState s(std::move(x));
  require_in_cone(s.x, p);
  return {std::move(s), p};
}

double gaussian_pair_moment_exact(const GaussianDensity& g, double mass, double gamma) {
  // E|Z|^-gamma for Z ~ N(0, 2 sigma^2).
  const double std_moment =
      std::pow(2.0, -gamma / 2.0) * std::tgamma((1.0 - gamma) / 2.0) / std::sqrt(std::numbers::pi);
  return mass * mass * std::pow(2.0 * g.sigma * g.sigma, -gamma / 2.0) * std_moment;
}

ContinuousReport continuous_report(const DensitySpec& spec, double gamma) {
  spec.validate();
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("continuous report needs gamma in (0,1)");
  ContinuousReport r;
  std::visit(MomentsVisitor{spec.mass, gamma, r}, spec.kind);
  if (!std::isfinite(r.interaction) ||
      r.interaction_error > 1e-6 * std::abs(r.interaction)) {
    throw NumericalFailure("interaction quadrature did not reach 1e-6 relative accuracy",
                           Eigen::VectorXd::Constant(1, r.interaction));
  }
  const double m = spec.mass;
  r.energy = r.entropy - 0.5 * r.interaction;
  r.threshold_w = std::pow(m / 2.0, 2.0 / gamma + 1.0);
  r.threshold_e = m * m * m / (2.0 * std::numbers::pi * std::exp(2.0 / gamma + 1.0)) *
                  std::exp(-2.0 * r.energy / m);
  r.criterion_w = r.centered_second_moment < r.threshold_w;
  r.criterion_e = r.centered_second_moment < r.threshold_e;
  return r;
}

std::vector<ConvergenceRow> convergence_report(const DensitySpec& spec, double gamma,
                                               const std::vector<int>& n_list) {
  const ContinuousReport cont = continuous_report(spec, gamma);
  std::vector<ConvergenceRow> rows;
  rows.reserve(n_list.size());
  for (int n : n_list) {
    auto [state, p] = quantile_init(spec, n, gamma);
    const ParticleState centered = recenter(state);
    ConvergenceRow row;
    row.n = n;
    row.h = p.h();
    row.discrete_moment = p.h() * second_moment(centered);
    row.continuous_moment = cont.centered_second_moment;
    row.moment_ratio = row.discrete_moment / row.continuous_moment;
    row.discrete_threshold_w = p.h() * blowup_w_check(centered, p).threshold;
    row.continuous_threshold_w = cont.threshold_w;
    row.threshold_w_ratio = row.discrete_threshold_w / row.continuous_threshold_w;
    try {
      row.cn = c_of_n(n).value;
    } catch (const NumericalFailure&) {
      row.cn_ok = false;
    }
    row.continuous_threshold_e = cont.threshold_e;
    if (row.cn_ok) {
      row.discrete_threshold_c = p.h() * blowup_c_check(centered, p, row.cn).threshold;
      row.threshold_c_ratio = row.discrete_threshold_c / row.continuous_threshold_e;
    }
    row.discrete_entropy = entropy_u(state, p);
    row.continuous_entropy = cont.entropy;
    row.entropy_ratio = row.discrete_entropy / row.continuous_entropy;
    row.discrete_interaction = interaction_w(state, p);
    row.continuous_half_interaction = 0.5 * cont.interaction;
    row.interaction_ratio = row.discrete_interaction / row.continuous_half_interaction;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace collapse
