#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>

#include "collapse_lab/analysis.hpp"
#include "collapse_lab/criteria.hpp"
#include "collapse_lab/density.hpp"
#include "collapse_lab/dynamics.hpp"
#include "collapse_lab/errors.hpp"
#include "collapse_lab/model.hpp"

namespace py = pybind11;
using namespace collapse;

namespace {

ParticleState as_state(const Eigen::VectorXd& x) { return ParticleState(x); }

IntegratorConfig integrator_from(const py::dict& kw) {
  IntegratorConfig c;
  for (const auto& [k, v] : kw) {
    const std::string key = py::str(k);
    if (key == "method") {
      const std::string m = py::str(v);
      if (m == "rk45") c.method = Method::AdaptiveRK45;
      else if (m == "implicit_euler") c.method = Method::ImplicitEuler;
      else throw py::value_error("method must be 'rk45' or 'implicit_euler'");
    } else if (key == "rtol") c.rtol = v.cast<double>();
    else if (key == "atol") c.atol = v.cast<double>();
    else if (key == "dt_init") c.dt_init = v.cast<double>();
    else if (key == "dt_min") c.dt_min = v.cast<double>();
    else if (key == "dt_max") c.dt_max = v.cast<double>();
    else if (key == "t_max") c.t_max = v.cast<double>();
    else if (key == "collision_eps") c.collision_eps = v.cast<double>();
    else if (key == "sample_every") c.sample_every = v.cast<double>();
    else if (key == "newton_tol") c.newton_tol = v.cast<double>();
    else if (key == "newton_max_iter") c.newton_max_iter = v.cast<int>();
    else if (key == "max_steps") c.max_steps = v.cast<long>();
    else throw py::key_error("unknown integrator option: " + key);
  }
  c.validate();
  return c;
}

py::dict certificate_dict(const Certificate& c) {
  py::list triggered;
  for (CriterionTag t : c.triggered) triggered.append(std::string(to_string(t)));
  py::dict thresholds;
  for (const auto& [t, pair] : c.thresholds) {
    thresholds[py::str(std::string(to_string(t)))] = py::make_tuple(pair.threshold, pair.measured);
  }
  py::dict d;
  d["verdict"] = std::string(to_string(c.verdict));
  d["triggered"] = triggered;
  d["thresholds"] = thresholds;
  return d;
}

py::dict polyline_dict(const Polyline& line) {
  Eigen::MatrixX2d pts(static_cast<Eigen::Index>(line.points.size()), 2);
  for (std::size_t k = 0; k < line.points.size(); ++k) {
    pts(static_cast<Eigen::Index>(k), 0) = line.points[k].u;
    pts(static_cast<Eigen::Index>(k), 1) = line.points[k].v;
  }
  py::dict d;
  d["points"] = pts;
  d["skipped"] = line.skipped;
  return d;
}

py::dict simulate_py(const Eigen::VectorXd& x0, const Params& p, const py::kwargs& kw) {
  const SimulationResult r = simulate(as_state(x0), p, integrator_from(kw));
  const auto& s = r.record.samples;
  const Eigen::Index m = static_cast<Eigen::Index>(s.size());
  Eigen::VectorXd t(m), g(m), u(m), w(m), ph(m), i2(m), com(m), gap(m);
  Eigen::MatrixXd x(m, p.n());
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto& smp = s[static_cast<std::size_t>(k)];
    t[k] = smp.t;
    x.row(k) = smp.state.x.transpose();
    g[k] = smp.diag.g;
    u[k] = smp.diag.u;
    w[k] = smp.diag.w;
    ph[k] = smp.diag.phi;
    i2[k] = smp.diag.i2;
    com[k] = smp.diag.com;
    gap[k] = smp.diag.min_gap;
  }
  py::dict outcome;
  outcome["kind"] = std::string(outcome_name(r.outcome));
  if (const auto* c = std::get_if<Collision>(&r.outcome)) {
    outcome["t_star"] = c->t_star;
    outcome["t_star_error"] = c->t_star_error;
    outcome["pair"] = c->pair;
  } else if (const auto* f = std::get_if<StepSizeUnderflow>(&r.outcome)) {
    outcome["t"] = f->t;
  }
  py::dict d;
  d["t"] = t;
  d["x"] = x;
  d["G"] = g;
  d["U"] = u;
  d["W"] = w;
  d["phi"] = ph;
  d["I2"] = i2;
  d["com"] = com;
  d["min_gap"] = gap;
  d["outcome"] = outcome;
  d["classification"] = std::string(to_string(classify_run(r.record, r.outcome, p)));
  d["steps"] = r.record.step_count;
  d["rejected_steps"] = r.record.rejected_steps;
  d["energy_monotone"] = r.record.energy_monotone;
  d["max_com_drift"] = r.record.max_com_drift;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Collapse versus global existence for a one-dimensional particle model";

  static py::exception<DomainError> domain_exc(m, "DomainError", PyExc_ValueError);
  static py::exception<PreconditionError> pre_exc(m, "PreconditionError", PyExc_ValueError);
  static py::exception<NumericalFailure> num_exc(m, "NumericalFailure", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DomainError& e) {
      domain_exc(e.what());
    } catch (const PreconditionError& e) {
      pre_exc(e.what());
    } catch (const NumericalFailure& e) {
      num_exc(e.what());
    }
  });

  py::enum_<TimeScaling>(m, "TimeScaling")
      .value("PAPER", TimeScaling::PaperConvention)
      .value("UNIFORM", TimeScaling::Uniform);

  py::class_<Params>(m, "Params")
      .def(py::init<double, double, int, TimeScaling>(), py::arg("gamma"), py::arg("mass"),
           py::arg("n"), py::arg("time_scaling") = TimeScaling::PaperConvention)
      .def_property_readonly("gamma", &Params::gamma)
      .def_property_readonly("mass", &Params::mass)
      .def_property_readonly("n", &Params::n)
      .def_property_readonly("h", &Params::h)
      .def_property_readonly("time_scaling", &Params::time_scaling)
      .def("__repr__", [](const Params& p) {
        return "Params(gamma=" + std::to_string(p.gamma()) + ", mass=" + std::to_string(p.mass()) +
               ", n=" + std::to_string(p.n()) + ")";
      });

  const auto state_fn = [&m](const char* name, double (*f)(const ParticleState&, const Params&)) {
    m.def(name, [f](const Eigen::VectorXd& x, const Params& p) { return f(as_state(x), p); },
          py::arg("x"), py::arg("params"));
  };
  state_fn("entropy_u", &entropy_u);
  state_fn("interaction_w", &interaction_w);
  state_fn("energy_g", &energy_g);
  state_fn("phi", &phi);
  state_fn("virial_rhs", &virial_rhs);
  m.def("velocity", [](const Eigen::VectorXd& x, const Params& p) { return velocity(as_state(x), p); },
        py::arg("x"), py::arg("params"));
  m.def("energy_gradient",
        [](const Eigen::VectorXd& x, const Params& p) { return energy_gradient(as_state(x), p); },
        py::arg("x"), py::arg("params"));
  m.def("rescale",
        [](const Eigen::VectorXd& x, const Params& p, double lambda) {
          auto [s, q] = rescale(as_state(x), p, lambda);
          return py::make_tuple(s.x, q);
        },
        py::arg("x"), py::arg("params"), py::arg("lam"));

  m.def("classify_initial",
        [](const Eigen::VectorXd& x, const Params& p, std::optional<double> cn) {
          return certificate_dict(classify_initial(as_state(x), p, cn));
        },
        py::arg("x"), py::arg("params"), py::arg("cn") = py::none());
  m.def("global_existence_threshold", &global_existence_threshold, py::arg("n"));
  m.def("c_of_mu", &c_of_mu, py::arg("mu"));
  m.def("c_of_n",
        [](int n, double tol, int random_starts, std::uint64_t seed) {
          CnOptions o;
          o.tol = tol;
          o.random_starts = random_starts;
          o.seed = seed;
          const CnResult r = c_of_n(n, o);
          py::dict d;
          d["value"] = r.value;
          d["mu"] = r.mu;
          d["grad_norm"] = r.grad_norm;
          return d;
        },
        py::arg("n"), py::arg("tol") = 1e-10, py::arg("random_starts") = 8,
        py::arg("seed") = std::uint64_t{20240229});
  m.def("gaussian_mu", &gaussian_mu, py::arg("n"));
  m.def("lambda_min", &lambda_min, py::arg("n"));
  m.def("gamma0_mass_threshold", &gamma0_mass_threshold, py::arg("n"));

  m.def("simulate", &simulate_py, py::arg("x0"), py::arg("params"),
        "Integrate the flow. Keyword arguments set integrator options (t_max, rtol, method, ...).");

  m.def("reduced_to_state",
        [](double u, double v) { return reduced_to_state({u, v}).x; }, py::arg("u"), py::arg("v"));
  m.def("state_to_reduced",
        [](const Eigen::VectorXd& x) {
          const ReducedPoint r = state_to_reduced(as_state(x));
          return py::make_tuple(r.u, r.v);
        },
        py::arg("x"));
  m.def("symmetric_critical_point",
        [](const Params& p) {
          const CriticalPoint c = symmetric_critical_point(p);
          py::dict d;
          d["x"] = c.state.x;
          d["grad_norm"] = c.grad_norm;
          d["hessian_eigs"] = c.hessian_eigs;
          d["kind"] = std::string(to_string(c.kind));
          return d;
        },
        py::arg("params"));
  m.def("phase_plane_sweep",
        [](const Params& p, std::array<double, 4> window, int nu, int nv, int jobs, bool curves,
           int curve_samples, double t_max) {
          const Window w{window[0], window[1], window[2], window[3]};
          SweepOptions o;
          o.jobs = jobs;
          o.with_curves = curves;
          o.curve_samples = curve_samples;
          o.integrator.t_max = t_max;
          const PhasePortrait pp = phase_plane_sweep(p, w, nu, nv, o);
          Eigen::MatrixXi grid(nv, nu);  // -1 undetermined, 0 global, 1 blow-up
          for (int j = 0; j < nv; ++j) {
            for (int i = 0; i < nu; ++i) {
              const RunClass c = pp.at(i, j);
              grid(j, i) = c == RunClass::BlowupObserved ? 1 : c == RunClass::GlobalObserved ? 0 : -1;
            }
          }
          py::dict cs;
          for (const auto& [name, line] : pp.curves) cs[py::str(name)] = polyline_dict(line);
          py::dict d;
          d["u"] = pp.u;
          d["v"] = pp.v;
          d["grid"] = grid;
          d["curves"] = cs;
          d["notes"] = pp.notes;
          d["contiguous"] = basin_boundary_report(pp).contiguous();
          return d;
        },
        py::arg("params"), py::arg("window") = std::array<double, 4>{0.01, 0.5, 0.01, 0.5},
        py::arg("nu") = 64, py::arg("nv") = 64, py::arg("jobs") = 1, py::arg("curves") = true,
        py::arg("curve_samples") = 512, py::arg("t_max") = 100.0,
        "window is (u_min, u_max, v_min, v_max); grid[j, i] is 1 for blow-up, 0 for global, "
        "-1 undetermined.");

  m.def("convergence_report",
        [](double sigma, double mass, double gamma, const std::vector<int>& n_list) {
          py::list rows;
          for (const ConvergenceRow& r :
               convergence_report({GaussianDensity{0.0, sigma}, mass}, gamma, n_list)) {
            py::dict d;
            d["n"] = r.n;
            d["moment_ratio"] = r.moment_ratio;
            d["threshold_w_ratio"] = r.threshold_w_ratio;
            d["threshold_c_ratio"] = r.threshold_c_ratio;
            d["entropy_ratio"] = r.entropy_ratio;
            d["interaction_ratio"] = r.interaction_ratio;
            d["cn"] = r.cn;
            rows.append(d);
          }
          return rows;
        },
        py::arg("sigma"), py::arg("mass"), py::arg("gamma"), py::arg("n_list"),
        "Gaussian quantile initialisation compared with the continuum density.");

  m.def("phi_rate_terms",
        [](const Eigen::VectorXd& x, const Params& p) {
          const PhiRateTerms t = phi_rate_decomposition(as_state(x), p);
          py::dict d;
          d["phi"] = t.phi;
          d["I"] = t.i_term;
          d["J1"] = t.j1;
          d["J2"] = t.j2;
          d["lhs"] = t.lhs;
          d["rhs"] = t.rhs;
          return d;
        },
        py::arg("x"), py::arg("params"));
}
