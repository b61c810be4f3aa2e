#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "collapse_lab/io.hpp"

using namespace collapse;

namespace {

// "a:b" or a single N.
bool parse_range(const std::string& s, int& lo, int& hi) {
  const auto colon = s.find(':');
  try {
    std::size_t used = 0;
    lo = std::stoi(s.substr(0, colon), &used);
    if (used != (colon == std::string::npos ? s.size() : colon)) return false;
    if (colon == std::string::npos) {
      hi = lo;
    } else {
      const std::string rest = s.substr(colon + 1);
      hi = std::stoi(rest, &used);
      if (used != rest.size()) return false;
    }
  } catch (const std::exception&) {
    return false;
  }
  return lo >= 3 && lo <= hi;
}

int default_jobs() {
  if (const char* env = std::getenv("COLLAPSE_LAB_JOBS")) {
    char* end = nullptr;
    const long j = std::strtol(env, &end, 10);
    if (*env != '\0' && *end == '\0' && j >= 1) return static_cast<int>(j);
    std::cerr << "warning: ignoring COLLAPSE_LAB_JOBS='" << env << "'\n";
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle simulations of 1D aggregation-diffusion with singular kernels"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = ".";
  long long seed = -1;
  int jobs = default_jobs();
  bool quiet = false;
  std::string range;

  app.add_option("--config", config_path, "Run configuration file");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--seed", seed, "Override the config seed")->check(CLI::NonNegativeNumber);
  app.add_option("--jobs", jobs, "Worker threads (default: COLLAPSE_LAB_JOBS or all cores)")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", quiet, "Only write files and errors");

  auto* sim = app.add_subcommand("simulate", "Integrate one trajectory; writes CSV and summary");
  auto* crit = app.add_subcommand("criteria", "Evaluate the certification predicates");
  auto* phase = app.add_subcommand("phase-plane", "Three-particle basin sweep with curves");
  auto* cn = app.add_subcommand("cn", "Table of C(N) with its bracket");
  cn->add_option("--range", range, "N range as a:b");
  auto* conv = app.add_subcommand("converge", "Discrete to continuum convergence table");
  auto* cp = app.add_subcommand("critical-point", "Critical point of the discrete energy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalidConfig;
  }

  RunConfig cfg;
  const bool needs_config = !cn->parsed();
  if (config_path.empty() && needs_config) {
    std::cerr << "error: --config is required\n";
    return kExitInvalidConfig;
  }
  try {
    if (!config_path.empty()) cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalidConfig;
  }
  if (cn->parsed() && !range.empty()) {
    if (!parse_range(range, cfg.cn.n_min, cfg.cn.n_max)) {
      std::cerr << "error: --range expects a:b with 3 <= a <= b\n";
      return kExitInvalidConfig;
    }
  }

  CommandOptions opts;
  opts.out_dir = out_dir;
  if (seed >= 0) opts.seed = static_cast<std::uint64_t>(seed);
  opts.jobs = jobs;
  opts.quiet = quiet;

  CommandResult r;
  if (sim->parsed()) {
    r = cmd_simulate(cfg, opts, std::cout, std::cerr);
  } else if (crit->parsed()) {
    r = cmd_criteria(cfg, opts, std::cout, std::cerr);
  } else if (phase->parsed()) {
    r = cmd_phase_plane(cfg, opts, std::cout, std::cerr);
  } else if (cn->parsed()) {
    r = cmd_cn(cfg, opts, std::cout, std::cerr);
  } else if (conv->parsed()) {
    r = cmd_converge(cfg, opts, std::cout, std::cerr);
  } else if (cp->parsed()) {
    r = cmd_critical_point(cfg, opts, std::cout, std::cerr);
  }
  if (!quiet) {
    for (const auto& path : r.written) std::cout << "wrote " << path.string() << '\n';
  }
  return r.exit_code;
}
