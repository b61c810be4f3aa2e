#include "collapse_lab/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace collapse {

namespace {

using json = nlohmann::ordered_json;

std::string fmt17(double x) {
  if (x == 0.0) x = 0.0;  // no "-0" in output files
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt10(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct Ctx {
  const std::string& source;
  int line;
  const std::string& key;

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(source, line, key, msg); }
};

double to_double(std::string_view v, const Ctx& c) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x)) {
    c.fail("expected a finite number, got '" + std::string(v) + "'");
  }
  return x;
}

long long to_int(std::string_view v, const Ctx& c) {
  long long x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    c.fail("expected an integer, got '" + std::string(v) + "'");
  }
  return x;
}

int to_count(std::string_view v, const Ctx& c, long long lo) {
  const long long x = to_int(v, c);
  if (x < lo || x > 1'000'000'000) c.fail("must be an integer >= " + std::to_string(lo));
  return static_cast<int>(x);
}

double to_positive(std::string_view v, const Ctx& c) {
  const double x = to_double(v, c);
  if (!(x > 0.0)) c.fail("must be positive");
  return x;
}

bool to_bool(std::string_view v, const Ctx& c) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  c.fail("expected true or false, got '" + std::string(v) + "'");
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < v.size()) {
    while (i < v.size() && (v[i] == ',' || v[i] == ' ' || v[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < v.size() && v[j] != ',' && v[j] != ' ' && v[j] != '\t') ++j;
    if (j > i) out.push_back(v.substr(i, j - i));
    i = j;
  }
  return out;
}

// Init keys are collected first and resolved once the whole file is read.
struct InitDraft {
  std::optional<std::vector<double>> positions;
  std::optional<std::string> density;
  std::optional<double> mean, sigma, a, b, u, v;
};

using Setter = std::function<void(RunConfig&, InitDraft&, std::string_view, const Ctx&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    t["problem.gamma"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      const double g = to_double(v, c);
      if (!(g >= 0.0 && g < 1.0)) c.fail("gamma must lie in [0, 1)");
      r.gamma = g;
    };
    t["problem.mass"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.mass = to_positive(v, c);
    };
    t["problem.n"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.n = to_count(v, c, 3);
    };
    t["problem.time_scaling"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      if (v == "paper") {
        r.time_scaling = TimeScaling::PaperConvention;
      } else if (v == "uniform") {
        r.time_scaling = TimeScaling::Uniform;
      } else {
        c.fail("expected paper or uniform");
      }
    };

    t["init.positions"] = [](RunConfig&, InitDraft& d, std::string_view v, const Ctx& c) {
      std::vector<double> xs;
      for (auto tok : split_list(v)) xs.push_back(to_double(tok, c));
      if (xs.size() < 3) c.fail("at least three positions are required");
      d.positions = std::move(xs);
    };
    t["init.density"] = [](RunConfig&, InitDraft& d, std::string_view v, const Ctx& c) {
      if (v != "gaussian" && v != "uniform") c.fail("expected gaussian or uniform");
      d.density = std::string(v);
    };
    t["init.mean"] = [](RunConfig&, InitDraft& d, std::string_view v, const Ctx& c) {
      d.mean = to_double(v, c);
    };
    t["init.sigma"] = [](RunConfig&, InitDraft& d, std::string_view v, const Ctx& c) {
      d.sigma = to_positive(v, c);
    };
    t["init.a"] = [](RunConfig&, InitDraft& d, std::string_view v, const Ctx& c) {
      d.a = to_double(v, c);
    };
    t["init.b"] = [](RunConfig&, InitDraft& d, std::string_view v, const Ctx& c) {
      d.b = to_double(v, c);
    };
    t["init.u"] = [](RunConfig&, InitDraft& d, std::string_view v, const Ctx& c) {
      d.u = to_positive(v, c);
    };
    t["init.v"] = [](RunConfig&, InitDraft& d, std::string_view v, const Ctx& c) {
      d.v = to_positive(v, c);
    };

    t["integrator.method"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      if (v == "rk45") {
        r.integrator.method = Method::AdaptiveRK45;
      } else if (v == "implicit_euler") {
        r.integrator.method = Method::ImplicitEuler;
      } else {
        c.fail("expected rk45 or implicit_euler");
      }
    };
    const auto real = [&t](const char* key, double IntegratorConfig::*field) {
      t[key] = [field](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
        r.integrator.*field = to_positive(v, c);
      };
    };
    real("integrator.rtol", &IntegratorConfig::rtol);
    real("integrator.atol", &IntegratorConfig::atol);
    real("integrator.dt_init", &IntegratorConfig::dt_init);
    real("integrator.dt_min", &IntegratorConfig::dt_min);
    real("integrator.dt_max", &IntegratorConfig::dt_max);
    real("integrator.t_max", &IntegratorConfig::t_max);
    real("integrator.collision_eps", &IntegratorConfig::collision_eps);
    real("integrator.sample_every", &IntegratorConfig::sample_every);
    real("integrator.newton_tol", &IntegratorConfig::newton_tol);
    t["integrator.newton_max_iter"] = [](RunConfig& r, InitDraft&, std::string_view v,
                                         const Ctx& c) {
      r.integrator.newton_max_iter = to_count(v, c, 1);
    };
    t["integrator.max_steps"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.integrator.max_steps = to_count(v, c, 1);
    };

    t["output.trajectory_csv"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx&) {
      r.output.trajectory_csv = std::string(v);
    };
    t["output.summary_json"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx&) {
      r.output.summary_json = std::string(v);
    };
    t["output.gnuplot"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx&) {
      r.output.gnuplot = std::string(v);
    };

    t["seed"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      const long long s = to_int(v, c);
      if (s < 0) c.fail("seed must be non-negative");
      r.seed = static_cast<std::uint64_t>(s);
    };

    const auto window = [&t](const char* key, double Window::*field) {
      t[key] = [field](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
        r.phase.window.*field = to_positive(v, c);
      };
    };
    window("phase.u_min", &Window::u_min);
    window("phase.u_max", &Window::u_max);
    window("phase.v_min", &Window::v_min);
    window("phase.v_max", &Window::v_max);
    t["phase.nu"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.phase.nu = to_count(v, c, 2);
    };
    t["phase.nv"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.phase.nv = to_count(v, c, 2);
    };
    t["phase.t_max"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.phase.t_max = to_positive(v, c);
    };
    t["phase.sample_every"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.phase.sample_every = to_positive(v, c);
    };
    t["phase.curve_samples"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.phase.curve_samples = to_count(v, c, 2);
    };
    t["phase.curves"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.phase.curves = to_bool(v, c);
    };

    t["cn.n_min"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.cn.n_min = to_count(v, c, 3);
    };
    t["cn.n_max"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.cn.n_max = to_count(v, c, 3);
    };
    t["cn.tol"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.cn.tol = to_positive(v, c);
    };
    t["cn.random_starts"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      r.cn.random_starts = to_count(v, c, 0);
    };

    t["converge.n_list"] = [](RunConfig& r, InitDraft&, std::string_view v, const Ctx& c) {
      std::vector<int> ns;
      for (auto tok : split_list(v)) ns.push_back(to_count(tok, c, 3));
      if (ns.empty()) c.fail("expected at least one particle count");
      r.converge.n_list = std::move(ns);
    };
    return t;
  }();
  return table;
}

void resolve_init(RunConfig& r, const InitDraft& d) {
  const auto line_of = [&](const char* key) {
    const auto it = r.key_lines.find(key);
    return it == r.key_lines.end() ? 0 : it->second;
  };
  const auto fail = [&](const char* key, const std::string& msg) {
    throw ConfigError(r.source, line_of(key), key, msg);
  };

  const bool explicit_set = d.positions.has_value();
  const bool density_set = d.density || d.mean || d.sigma || d.a || d.b;
  const bool reduced_set = d.u || d.v;
  if (explicit_set + density_set + reduced_set > 1) {
    // Blame the family that starts later in the file.
    const auto first_line = [&](std::initializer_list<const char*> keys) {
      int best = 0;
      for (const char* k : keys) {
        const int l = line_of(k);
        if (l > 0 && (best == 0 || l < best)) best = l;
      }
      return best;
    };
    const int lines[] = {first_line({"init.positions"}),
                         first_line({"init.density", "init.mean", "init.sigma", "init.a", "init.b"}),
                         first_line({"init.u", "init.v"})};
    const int culprit = std::max({lines[0], lines[1], lines[2]});
    throw ConfigError(r.source, culprit, "init",
                      "init.positions, init.density and init.u/init.v are mutually exclusive");
  }

  if (explicit_set) {
    r.init = ExplicitInit{*d.positions};
  } else if (density_set) {
    if (!d.density) fail("init.density", "density parameters given without init.density");
    DensitySpec spec;
    if (*d.density == "gaussian") {
      if (d.a || d.b) fail(d.a ? "init.a" : "init.b", "init.a/init.b belong to a uniform density");
      spec.kind = GaussianDensity{d.mean.value_or(0.0), d.sigma.value_or(1.0)};
    } else {
      if (d.mean || d.sigma) {
        fail(d.mean ? "init.mean" : "init.sigma", "init.mean/init.sigma belong to a gaussian density");
      }
      const double a = d.a.value_or(0.0), b = d.b.value_or(1.0);
      if (!(a < b)) fail("init.b", "uniform density needs init.a < init.b");
      spec.kind = UniformDensity{a, b};
    }
    r.init = DensityInit{spec};
  } else if (reduced_set) {
    if (!d.u || !d.v) fail(d.u ? "init.v" : "init.u", "init.u and init.v must be given together");
    r.init = ReducedInit{{*d.u, *d.v}};
  }

  if (r.init && r.n) {
    const std::optional<int> implied =
        std::holds_alternative<ExplicitInit>(*r.init)
            ? std::optional<int>(static_cast<int>(std::get<ExplicitInit>(*r.init).positions.size()))
        : std::holds_alternative<ReducedInit>(*r.init) ? std::optional<int>(3)
                                                        : std::nullopt;
    if (implied && *implied != *r.n) {
      fail("problem.n", "problem.n = " + std::to_string(*r.n) + " but the init block has " +
                            std::to_string(*implied) + " particles");
    }
  }
}

void validate_sections(const RunConfig& r) {
  const auto line_of = [&](const std::string& key) {
    const auto it = r.key_lines.find(key);
    return it == r.key_lines.end() ? 0 : it->second;
  };
  try {
    r.integrator.validate();
  } catch (const DomainError& e) {
    throw ConfigError(r.source, 0, "integrator", e.what());
  }
  try {
    r.phase.window.validate();
  } catch (const DomainError& e) {
    throw ConfigError(r.source, line_of("phase.u_max"), "phase", e.what());
  }
  if (r.cn.n_min > r.cn.n_max) {
    throw ConfigError(r.source, line_of("cn.n_max"), "cn.n_max", "cn.n_max must be >= cn.n_min");
  }
}

// Opens out_dir/name for writing, creating out_dir.
std::ofstream open_output(const std::filesystem::path& path, const char* key) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("<output>", 0, key, "cannot write " + path.string());
  f.exceptions(std::ios::badbit | std::ios::failbit);
  return f;
}

json diagnostics_json(const Diagnostics& d) {
  return json{{"G", d.g},     {"U", d.u},     {"W", d.w},
              {"phi", d.phi}, {"I2", d.i2},   {"com", d.com},
              {"min_gap", d.min_gap}, {"virial_residual", d.virial_residual}};
}

json certificate_json(const Certificate& c) {
  json out;
  out["verdict"] = to_string(c.verdict);
  json triggered = json::array();
  for (CriterionTag t : c.triggered) triggered.push_back(to_string(t));
  out["triggered"] = triggered;
  json th = json::object();
  for (const auto& [tag, pair] : c.thresholds) {
    th[std::string(to_string(tag))] = {{"threshold", pair.threshold}, {"measured", pair.measured}};
  }
  out["thresholds"] = th;
  return out;
}

template <class F>
CommandResult guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return {kExitNumericalFailure, {}};
  } catch (const std::ios_base::failure& e) {
    err << "error: write failed: " << e.what() << '\n';
  }
  return {kExitInvalidConfig, {}};
}

std::uint64_t effective_seed(const RunConfig& cfg, const CommandOptions& opts) {
  return opts.seed.value_or(cfg.seed);
}

CnOptions cn_options(const RunConfig& cfg, const CommandOptions& opts) {
  CnOptions o;
  o.tol = cfg.cn.tol;
  o.random_starts = cfg.cn.random_starts;
  o.seed = effective_seed(cfg, opts);
  return o;
}

void write_polyline(const std::filesystem::path& path, const Polyline& line) {
  auto f = open_output(path, "output");
  f << "u,v\n";
  for (const auto& pt : line.points) f << fmt17(pt.u) << ',' << fmt17(pt.v) << '\n';
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& key,
                         const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                         ": " + (key.empty() ? std::string() : key + ": ") + message),
      line_(line),
      key_(key) {}

std::optional<int> RunConfig::particle_count() const {
  if (init) {
    if (const auto* e = std::get_if<ExplicitInit>(&*init)) return static_cast<int>(e->positions.size());
    if (std::holds_alternative<ReducedInit>(*init)) return 3;
  }
  return n;
}

Params RunConfig::params() const {
  if (!gamma) throw ConfigError(source, 0, "problem.gamma", "required");
  if (!mass) throw ConfigError(source, 0, "problem.mass", "required");
  const std::optional<int> count = particle_count();
  if (!count) throw ConfigError(source, 0, "problem.n", "required (or give init.positions)");
  try {
    return Params(*gamma, *mass, *count, time_scaling);
  } catch (const DomainError& e) {
    throw ConfigError(source, 0, "problem", e.what());
  }
}

ParticleState RunConfig::initial_state() const {
  const Params p = params();
  if (!init) throw ConfigError(source, 0, "init", "an init block is required");
  try {
    if (const auto* e = std::get_if<ExplicitInit>(&*init)) {
      ParticleState s(Eigen::Map<const Eigen::VectorXd>(e->positions.data(),
                                                        static_cast<Eigen::Index>(e->positions.size())));
      require_in_cone(s.x, p);
      return s;
    }
    if (const auto* d = std::get_if<DensityInit>(&*init)) {
      DensitySpec spec = d->density;
      spec.mass = *mass;
      return quantile_init(spec, p.n(), p.gamma(), p.time_scaling()).first;
    }
    return reduced_to_state(std::get<ReducedInit>(*init).point);
  } catch (const DomainError& e) {
    const auto it = key_lines.find("init.positions");
    throw ConfigError(source, it == key_lines.end() ? 0 : it->second, "init", e.what());
  }
}

RunConfig parse_config(std::istream& in, const std::string& source) {
  RunConfig r;
  r.source = source;
  InitDraft draft;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source, line_no, "", "expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(source, line_no, key, "unknown key");
    if (r.key_lines.count(key)) {
      throw ConfigError(source, line_no, key,
                        "duplicate key (first set on line " + std::to_string(r.key_lines[key]) + ")");
    }
    const Ctx ctx{source, line_no, key};
    if (value.empty()) ctx.fail("missing value");
    r.key_lines[key] = line_no;
    it->second(r, draft, value, ctx);
  }
  resolve_init(r, draft);
  validate_sections(r);
  return r;
}

RunConfig parse_config_string(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse_config(in, source);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError(path.string(), 0, "", "cannot open config file");
  return parse_config(f, path.string());
}

std::map<std::string, std::string> config_echo(const RunConfig& cfg) {
  std::map<std::string, std::string> m;
  if (cfg.gamma) m["problem.gamma"] = fmt17(*cfg.gamma);
  if (cfg.mass) m["problem.mass"] = fmt17(*cfg.mass);
  if (cfg.n) m["problem.n"] = std::to_string(*cfg.n);
  m["problem.time_scaling"] =
      cfg.time_scaling == TimeScaling::PaperConvention ? "paper" : "uniform";
  if (cfg.init) {
    if (const auto* e = std::get_if<ExplicitInit>(&*cfg.init)) {
      std::string list;
      for (double x : e->positions) list += (list.empty() ? "" : ", ") + fmt17(x);
      m["init.positions"] = list;
    } else if (const auto* d = std::get_if<DensityInit>(&*cfg.init)) {
      if (const auto* g = std::get_if<GaussianDensity>(&d->density.kind)) {
        m["init.density"] = "gaussian";
        m["init.mean"] = fmt17(g->mean);
        m["init.sigma"] = fmt17(g->sigma);
      } else {
        const auto& u = std::get<UniformDensity>(d->density.kind);
        m["init.density"] = "uniform";
        m["init.a"] = fmt17(u.a);
        m["init.b"] = fmt17(u.b);
      }
    } else {
      const auto& pt = std::get<ReducedInit>(*cfg.init).point;
      m["init.u"] = fmt17(pt.u);
      m["init.v"] = fmt17(pt.v);
    }
  }
  const IntegratorConfig& ic = cfg.integrator;
  m["integrator.method"] = ic.method == Method::AdaptiveRK45 ? "rk45" : "implicit_euler";
  m["integrator.rtol"] = fmt17(ic.rtol);
  m["integrator.atol"] = fmt17(ic.atol);
  m["integrator.dt_init"] = fmt17(ic.dt_init);
  m["integrator.dt_min"] = fmt17(ic.dt_min);
  m["integrator.dt_max"] = fmt17(ic.dt_max);
  m["integrator.t_max"] = fmt17(ic.t_max);
  m["integrator.collision_eps"] = fmt17(ic.collision_eps);
  m["integrator.sample_every"] = fmt17(ic.sample_every);
  m["integrator.newton_tol"] = fmt17(ic.newton_tol);
  m["integrator.newton_max_iter"] = std::to_string(ic.newton_max_iter);
  m["integrator.max_steps"] = std::to_string(ic.max_steps);
  m["output.trajectory_csv"] = cfg.output.trajectory_csv;
  m["output.summary_json"] = cfg.output.summary_json;
  if (!cfg.output.gnuplot.empty()) m["output.gnuplot"] = cfg.output.gnuplot;
  m["seed"] = std::to_string(cfg.seed);
  m["phase.u_min"] = fmt17(cfg.phase.window.u_min);
  m["phase.u_max"] = fmt17(cfg.phase.window.u_max);
  m["phase.v_min"] = fmt17(cfg.phase.window.v_min);
  m["phase.v_max"] = fmt17(cfg.phase.window.v_max);
  m["phase.nu"] = std::to_string(cfg.phase.nu);
  m["phase.nv"] = std::to_string(cfg.phase.nv);
  m["phase.t_max"] = fmt17(cfg.phase.t_max);
  m["phase.sample_every"] = fmt17(cfg.phase.sample_every);
  m["phase.curve_samples"] = std::to_string(cfg.phase.curve_samples);
  m["phase.curves"] = cfg.phase.curves ? "true" : "false";
  m["cn.n_min"] = std::to_string(cfg.cn.n_min);
  m["cn.n_max"] = std::to_string(cfg.cn.n_max);
  m["cn.tol"] = fmt17(cfg.cn.tol);
  m["cn.random_starts"] = std::to_string(cfg.cn.random_starts);
  std::string ns;
  for (int n : cfg.converge.n_list) ns += (ns.empty() ? "" : ", ") + std::to_string(n);
  m["converge.n_list"] = ns;
  return m;
}

std::string to_config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_echo(cfg)) out += k + " = " + v + "\n";
  return out;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record) {
  const int n = record.samples.empty() ? 0 : record.samples.front().state.size();
  out << 't';
  for (int i = 1; i <= n; ++i) out << ",x_" << i;
  out << ",G,U,W,phi,I2,com,min_gap,virial_residual\n";
  std::string row;
  for (const auto& s : record.samples) {
    row = fmt17(s.t);
    for (int i = 0; i < n; ++i) row += ',' + fmt17(s.state.x[i]);
    const Diagnostics& d = s.diag;
    for (double v : {d.g, d.u, d.w, d.phi, d.i2, d.com, d.min_gap, d.virial_residual}) {
      row += ',' + fmt17(v);
    }
    row += '\n';
    out << row;
  }
}

std::vector<TrajectorySample> read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DomainError("trajectory CSV is empty");
  const auto header = split_list(line);
  const int columns = static_cast<int>(header.size());
  const int n = columns - 9;
  if (n < 1 || header.front() != "t" || header[static_cast<std::size_t>(n) + 1] != "G") {
    throw DomainError("trajectory CSV header not recognized");
  }
  std::vector<TrajectorySample> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> vals;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = std::min(line.find(',', pos), line.size());
      const std::string cell(trim(std::string_view(line).substr(pos, comma - pos)));
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0') {
        throw DomainError("trajectory CSV line " + std::to_string(line_no) + ": bad value '" +
                          cell + "'");
      }
      vals.push_back(v);
      pos = comma + 1;
    }
    if (static_cast<int>(vals.size()) != columns) {
      throw DomainError("trajectory CSV line " + std::to_string(line_no) + ": expected " +
                        std::to_string(columns) + " columns");
    }
    TrajectorySample s;
    s.t = vals[0];
    s.state = ParticleState(Eigen::Map<const Eigen::VectorXd>(vals.data() + 1, n), s.t);
    const double* d = vals.data() + 1 + n;
    s.diag = Diagnostics{d[1], d[2], d[0], d[3], d[4], d[5], d[6], d[7]};
    out.push_back(std::move(s));
  }
  return out;
}

std::string summary_to_json(const SummaryRecord& s) {
  json j;
  json echo = json::object();
  for (const auto& [k, v] : config_echo(s.config)) echo[k] = v;
  j["config"] = echo;
  j["certificate"] = certificate_json(s.certificate);
  j["outcome"] = s.outcome;
  j["classification"] = to_string(s.classification);
  j["t_star"] = s.t_star ? json(*s.t_star) : json(nullptr);
  j["t_star_error"] = s.t_star_error ? json(*s.t_star_error) : json(nullptr);
  j["collision_pair"] = s.collision_pair ? json(*s.collision_pair) : json(nullptr);
  j["t_final"] = s.t_final;
  j["terminal"] = diagnostics_json(s.terminal);
  j["steps"] = s.steps;
  j["rejected_steps"] = s.rejected_steps;
  j["energy_monotone"] = s.energy_monotone;
  j["max_energy_increase"] = s.max_energy_increase;
  j["max_com_drift"] = s.max_com_drift;
  j["wall_time"] = s.wall_time;
  j["consistency_violation"] = s.consistency_violation;
  return j.dump(2) + "\n";
}

CommandResult cmd_simulate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out,
                           std::ostream& err) {
  return guarded(err, [&] {
    const Params p = cfg.params();
    const ParticleState x0 = cfg.initial_state();
    const auto start = std::chrono::steady_clock::now();

    SummaryRecord s;
    s.config = cfg;
    s.certificate = classify_initial(x0, p);
    const SimulationResult r = simulate(x0, p, cfg.integrator);
    s.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    s.outcome = outcome_name(r.outcome);
    s.classification = classify_run(r.record, r.outcome, p);
    if (const auto* c = std::get_if<Collision>(&r.outcome)) {
      s.t_star = c->t_star;
      s.t_star_error = c->t_star_error;
      s.collision_pair = c->pair;
    }
    const TrajectorySample& last = r.record.samples.back();
    s.t_final = last.t;
    s.terminal = last.diag;
    s.steps = r.record.step_count;
    s.rejected_steps = r.record.rejected_steps;
    s.energy_monotone = r.record.energy_monotone;
    s.max_energy_increase = r.record.max_energy_increase;
    s.max_com_drift = r.record.max_com_drift;
    s.consistency_violation = s.certificate.verdict == Verdict::GlobalCertified &&
                              s.classification == RunClass::BlowupObserved;

    CommandResult res;
    const auto csv_path = opts.out_dir / cfg.output.trajectory_csv;
    {
      auto f = open_output(csv_path, "output.trajectory_csv");
      write_trajectory_csv(f, r.record);
    }
    const auto json_path = opts.out_dir / cfg.output.summary_json;
    {
      auto f = open_output(json_path, "output.summary_json");
      f << summary_to_json(s);
    }
    res.written = {csv_path, json_path};

    if (s.consistency_violation) {
      err << "warning: GE-certified initial state ended BlowupObserved\n";
    }
    if (!opts.quiet) {
      out << "verdict " << to_string(s.certificate.verdict) << ", outcome " << s.outcome
          << ", classification " << to_string(s.classification) << '\n';
      if (s.t_star) out << "t_star " << fmt10(*s.t_star) << " +- " << fmt10(*s.t_star_error) << '\n';
      out << "samples " << r.record.samples.size() << ", steps " << s.steps << ", wall "
          << fmt10(s.wall_time) << " s\n";
    }
    if (std::holds_alternative<StepSizeUnderflow>(r.outcome) &&
        s.classification == RunClass::Undetermined) {
      err << "numerical failure: step size underflow at t = " << fmt10(last.t) << '\n';
      res.exit_code = kExitNumericalFailure;
    }
    return res;
  });
}

CommandResult cmd_criteria(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out,
                           std::ostream& err) {
  return guarded(err, [&] {
    const Params p = cfg.params();
    const ParticleState x0 = cfg.initial_state();
    std::optional<double> cn;
    if (!p.log_kernel()) cn = c_of_n(p.n(), cn_options(cfg, opts)).value;
    const Certificate c = classify_initial(x0, p, cn);
    for (const auto& [tag, pair] : c.thresholds) {
      out << to_string(tag) << ": threshold " << fmt10(pair.threshold) << ", measured "
          << fmt10(pair.measured) << (c.triggered.count(tag) ? ", triggered" : "") << '\n';
    }
    if (p.log_kernel()) out << "mass regime " << to_string(gamma0_check(p)) << '\n';
    out << "verdict " << to_string(c.verdict) << '\n';
    return CommandResult{};
  });
}

std::string phase_plane_gnuplot(const PhasePortrait& portrait) {
  const Window& w = portrait.window;
  struct Panel {
    const char* file;
    const char* title;
  };
  static constexpr Panel panels[] = {
      {"bu_w_curve", "Blow-up criterion, interaction energy"},
      {"bu_c_curve", "Blow-up criterion, entropy constant C(N)"},
      {"critical_curve", "Critical points: gamma W = h (N - 1)"},
      {"ge_curve", "Global existence criterion"},
      {"separatrix", "Basin boundary through the energy maximum"},
  };
  std::ostringstream s;
  s << "# Basins of the three-particle flow; red: blow-up, blue: global, grey: undetermined.\n"
    << "if (!exists(\"outfile\")) outfile = \"figure.png\"\n"
    << "set terminal pngcairo size 1200,1600\n"
    << "set output outfile\n"
    << "set datafile separator \",\"\n"
    << "set multiplot layout 3,2\n"
    << "set xrange [" << fmt17(w.u_min) << ":" << fmt17(w.u_max) << "]\n"
    << "set yrange [" << fmt17(w.v_min) << ":" << fmt17(w.v_max) << "]\n"
    << "set size ratio -1\n"
    << "set xlabel \"u = X2 - X1\"\n"
    << "set ylabel \"v = X3 - X2\"\n"
    << "cls(s) = s eq \"BlowupObserved\" ? 0xe8a0a0 : (s eq \"GlobalObserved\" ? 0xa0c0e8 : "
       "0xb0b0b0)\n"
    << "basin = \"plot 'grid.csv' skip 1 using 1:2:(cls(strcol(3))) with points pt 5 ps 0.5 "
       "lc rgb variable notitle\"\n";
  std::string all;
  for (const Panel& p : panels) {
    s << "set title \"" << p.title << "\"\n";
    if (portrait.curves.count(p.file)) {
      const std::string curve =
          std::string("'") + p.file + ".csv' skip 1 using 1:2 with lines lw 3 lc \"black\" notitle";
      s << "@basin, " << curve << '\n';
      all += (all.empty() ? "" : ", ") + std::string("'") + p.file +
             ".csv' skip 1 using 1:2 with lines lw 2 title \"" + p.file + "\"";
    } else {
      s << "@basin\n";
    }
  }
  s << "set title \"All curves\"\n"
    << "set key bottom right\n";
  if (all.empty()) {
    s << "@basin\n";
  } else {
    s << "@basin, " << all << '\n';
  }
  s << "unset multiplot\n";
  return s.str();
}

CommandResult cmd_phase_plane(const RunConfig& cfg, const CommandOptions& opts,
                              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Params p = cfg.params();
    if (p.n() != 3) throw ConfigError(cfg.source, 0, "problem.n", "the phase plane needs N = 3");
    SweepOptions so;
    so.integrator = cfg.integrator;
    so.integrator.t_max = cfg.phase.t_max;
    so.integrator.sample_every = cfg.phase.sample_every;
    so.jobs = std::max(1, opts.jobs);
    so.with_curves = cfg.phase.curves;
    so.curve_samples = cfg.phase.curve_samples;
    if (cfg.phase.curves && !p.log_kernel()) so.cn = c_of_n(3, cn_options(cfg, opts)).value;
    if (p.log_kernel()) so.with_curves = false;

    const auto start = std::chrono::steady_clock::now();
    const PhasePortrait portrait = phase_plane_sweep(p, cfg.phase.window, cfg.phase.nu,
                                                     cfg.phase.nv, so);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const BoundaryReport rep = basin_boundary_report(portrait);

    CommandResult res;
    const auto grid_path = opts.out_dir / "grid.csv";
    {
      auto f = open_output(grid_path, "output");
      f << "u,v,class\n";
      for (int j = 0; j < portrait.nv; ++j) {
        for (int i = 0; i < portrait.nu; ++i) {
          f << fmt17(portrait.u[i]) << ',' << fmt17(portrait.v[j]) << ','
            << to_string(portrait.at(i, j)) << '\n';
        }
      }
    }
    res.written.push_back(grid_path);
    for (const auto& [name, line] : portrait.curves) {
      const auto path = opts.out_dir / (name + ".csv");
      write_polyline(path, line);
      res.written.push_back(path);
    }
    const auto script_path =
        opts.out_dir / (cfg.output.gnuplot.empty() ? std::string("figure.gp") : cfg.output.gnuplot);
    {
      auto f = open_output(script_path, "output.gnuplot");
      f << phase_plane_gnuplot(portrait);
    }
    res.written.push_back(script_path);

    for (const auto& note : portrait.notes) err << "curve failed: " << note << '\n';
    if (rep.undetermined > 0) err << rep.undetermined << " cells undetermined\n";
    if (!opts.quiet) {
      out << portrait.nu << "x" << portrait.nv << " cells: " << rep.blowup << " blow-up, "
          << rep.global << " global, " << rep.undetermined << " undetermined; boundary "
          << (rep.contiguous() ? "contiguous" : "not contiguous") << "; " << fmt10(wall)
          << " s\n";
    }
    if (rep.undetermined == static_cast<int>(portrait.grid.size())) {
      err << "numerical failure: every cell of the sweep is undetermined\n";
      res.exit_code = kExitNumericalFailure;
    }
    return res;
  });
}

CommandResult cmd_cn(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out,
                     std::ostream& err) {
  return guarded(err, [&] {
    const CnOptions co = cn_options(cfg, opts);
    CommandResult res;
    const auto path = opts.out_dir / "cn.csv";
    auto f = open_output(path, "output");
    const std::string header = "N,C(N),C(N)/N,gauss_lower,lambda1_upper,status\n";
    f << header;
    if (!opts.quiet) out << header;
    for (int n = cfg.cn.n_min; n <= cfg.cn.n_max; ++n) {
      const double lower = c_of_mu(gaussian_mu(n));
      const double upper = 1.0 / (lambda_min(n) * (n - 1.0));
      std::string row = std::to_string(n) + ',';
      try {
        const double c = c_of_n(n, co).value;
        row += fmt17(c) + ',' + fmt17(c / n) + ',' + fmt17(lower) + ',' + fmt17(upper) + ",ok\n";
      } catch (const NumericalFailure& e) {
        err << "N = " << n << ": " << e.what() << '\n';
        row += "nan,nan," + fmt17(lower) + ',' + fmt17(upper) + ",failed\n";
      }
      f << row;
      if (!opts.quiet) out << row;
    }
    res.written.push_back(path);
    return res;
  });
}

CommandResult cmd_converge(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out,
                           std::ostream& err) {
  return guarded(err, [&] {
    if (!cfg.gamma) throw ConfigError(cfg.source, 0, "problem.gamma", "required");
    if (!cfg.mass) throw ConfigError(cfg.source, 0, "problem.mass", "required");
    const auto* d = cfg.init ? std::get_if<DensityInit>(&*cfg.init) : nullptr;
    if (!d) throw ConfigError(cfg.source, 0, "init.density", "converge needs a density init");
    DensitySpec spec = d->density;
    spec.mass = *cfg.mass;
    const std::vector<ConvergenceRow> rows = convergence_report(spec, *cfg.gamma, cfg.converge.n_list);

    CommandResult res;
    const auto path = opts.out_dir / "convergence.csv";
    auto f = open_output(path, "output");
    const std::string header =
        "N,h,discrete_moment,continuous_moment,moment_ratio,discrete_threshold_w,"
        "continuous_threshold_w,threshold_w_ratio,cn,discrete_threshold_c,"
        "continuous_threshold_e,threshold_c_ratio,discrete_entropy,continuous_entropy,"
        "entropy_ratio,discrete_interaction,continuous_half_interaction,interaction_ratio,"
        "status\n";
    f << header;
    if (!opts.quiet) out << header;
    for (const ConvergenceRow& r : rows) {
      std::string row = std::to_string(r.n);
      for (double v : {r.h, r.discrete_moment, r.continuous_moment, r.moment_ratio,
                       r.discrete_threshold_w, r.continuous_threshold_w, r.threshold_w_ratio,
                       r.cn, r.discrete_threshold_c, r.continuous_threshold_e,
                       r.threshold_c_ratio, r.discrete_entropy, r.continuous_entropy,
                       r.entropy_ratio, r.discrete_interaction, r.continuous_half_interaction,
                       r.interaction_ratio}) {
        row += ',' + fmt17(v);
      }
      row += r.cn_ok ? ",ok\n" : ",cn_failed\n";
      if (!r.cn_ok) err << "N = " << r.n << ": C(N) optimizer failed\n";
      f << row;
      if (!opts.quiet) out << row;
    }
    res.written.push_back(path);
    return res;
  });
}

CommandResult cmd_critical_point(const RunConfig& cfg, const CommandOptions& opts,
                                 std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const Params p = cfg.params();
    if (p.log_kernel()) throw ConfigError(cfg.source, 0, "problem.gamma", "needs gamma > 0");
    CriticalPoint cp;
    if (cfg.init) {
      cp = newton_critical_point(recenter(cfg.initial_state()), p);
    } else if (p.n() == 3) {
      cp = symmetric_critical_point(p);
    } else {
      throw ConfigError(cfg.source, 0, "init", "N > 3 needs an init block as Newton start");
    }

    json j;
    j["n"] = p.n();
    j["state"] = std::vector<double>(cp.state.x.data(), cp.state.x.data() + cp.state.x.size());
    j["grad_norm"] = cp.grad_norm;
    j["hessian_eigenvalues"] =
        std::vector<double>(cp.hessian_eigs.data(), cp.hessian_eigs.data() + cp.hessian_eigs.size());
    j["kind"] = to_string(cp.kind);
    j["iterations"] = cp.iterations;
    j["gamma_w"] = p.gamma() * interaction_w(cp.state, p);
    j["h_times_n_minus_1"] = p.h() * (p.n() - 1.0);
    if (p.n() == 3) {
      const ReducedPoint r = state_to_reduced(cp.state);
      j["u"] = r.u;
      j["v"] = r.v;
      const Eigen::EigenSolver<Eigen::Matrix2d> es(reduced_jacobian(r, p));
      json eig = json::array();
      for (int k = 0; k < 2; ++k) {
        eig.push_back({{"re", es.eigenvalues()[k].real()}, {"im", es.eigenvalues()[k].imag()}});
      }
      j["reduced_flow_eigenvalues"] = eig;
    }

    CommandResult res;
    const auto path = opts.out_dir / "critical_point.json";
    {
      auto f = open_output(path, "output");
      f << j.dump(2) << '\n';
    }
    res.written.push_back(path);
    if (!opts.quiet) out << j.dump(2) << '\n';
    return res;
  });
}

std::string_view to_string(TimeScaling s) {
  return s == TimeScaling::PaperConvention ? "PaperConvention" : "Uniform";
}

std::string_view to_string(Method m) {
  return m == Method::AdaptiveRK45 ? "AdaptiveRK45" : "ImplicitEuler";
}

}  // namespace collapse
