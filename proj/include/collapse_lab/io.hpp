#pragma once

// Run configuration, trajectory CSV, summary records, and the subcommands
// behind the command-line tool.
//
// Config files are flat `key = value` lines; `#` starts a comment. Unknown
// keys, duplicates and malformed values are errors that name the line.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "collapse_lab/analysis.hpp"
#include "collapse_lab/criteria.hpp"
#include "collapse_lab/density.hpp"
#include "collapse_lab/dynamics.hpp"
#include "collapse_lab/model.hpp"

namespace collapse {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalidConfig = 2;
inline constexpr int kExitNumericalFailure = 3;

class ConfigError : public std::runtime_error {
 public:
  /// line 0 means the problem is not tied to a single line (e.g. a missing key).
  ConfigError(const std::string& source, int line, const std::string& key,
              const std::string& message);
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  int line_;
  std::string key_;
};

struct ExplicitInit {
  std::vector<double> positions;
};
struct DensityInit {
  DensitySpec density;  // mass is taken from problem.mass
};
struct ReducedInit {
  ReducedPoint point;
};
using InitSpec = std::variant<ExplicitInit, DensityInit, ReducedInit>;

struct OutputSpec {
  std::string trajectory_csv = "trajectory.csv";
  std::string summary_json = "summary.json";
  std::string gnuplot;  // phase-plane script name; empty selects figure.gp
};

struct PhaseSpec {
  Window window;
  int nu = 64;
  int nv = 64;
  double t_max = 100.0;
  double sample_every = 1.0;
  int curve_samples = 512;
  bool curves = true;
};

struct CnSpec {
  int n_min = 3;
  int n_max = 40;
  double tol = 1e-10;
  int random_starts = 8;
};

struct ConvergeSpec {
  std::vector<int> n_list{10, 30, 100, 300, 1000};
};

struct RunConfig {
  std::optional<double> gamma;
  std::optional<double> mass;
  std::optional<int> n;
  TimeScaling time_scaling = TimeScaling::PaperConvention;
  std::optional<InitSpec> init;
  IntegratorConfig integrator;
  OutputSpec output;
  std::uint64_t seed = 20240229;
  PhaseSpec phase;
  CnSpec cn;
  ConvergeSpec converge;

  std::string source = "<config>";
  std::map<std::string, int> key_lines;  // for diagnostics after parsing

  /// Particle count implied by the init block, or problem.n.
  std::optional<int> particle_count() const;
  /// Throws ConfigError when problem.gamma or problem.mass is missing or
  /// the values are out of range.
  Params params() const;
  /// Throws ConfigError when no init block is present or the state is not
  /// strictly increasing.
  ParticleState initial_state() const;
};

RunConfig parse_config(std::istream& in, const std::string& source = "<config>");
RunConfig parse_config_string(const std::string& text, const std::string& source = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Flat key/value echo of a configuration; parse_config on the result gives
/// back the same settings.
std::map<std::string, std::string> config_echo(const RunConfig& cfg);
std::string to_config_text(const RunConfig& cfg);

/// Trajectory CSV: t,x_1..x_N,G,U,W,phi,I2,com,min_gap,virial_residual.
/// Values use 17 significant digits so reading back is exact.
void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& record);
std::vector<TrajectorySample> read_trajectory_csv(std::istream& in);

struct SummaryRecord {
  RunConfig config;
  Certificate certificate;
  std::string outcome;
  RunClass classification = RunClass::Undetermined;
  std::optional<double> t_star;
  std::optional<double> t_star_error;
  std::optional<int> collision_pair;
  double t_final = 0.0;
  Diagnostics terminal;
  long steps = 0;
  long rejected_steps = 0;
  bool energy_monotone = true;
  double max_energy_increase = 0.0;
  double max_com_drift = 0.0;
  double wall_time = 0.0;  // seconds
  // Set when a GE-certified run ends BlowupObserved. Never expected.
  bool consistency_violation = false;
};

std::string summary_to_json(const SummaryRecord& s);

struct CommandOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::uint64_t> seed;  // overrides the config seed
  int jobs = 1;
  bool quiet = false;
};

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::filesystem::path> written;
};

/// Each command reports to `out`, diagnostics to `err`, and maps
/// ConfigError / DomainError / PreconditionError to exit 2 and
/// NumericalFailure to exit 3.
CommandResult cmd_simulate(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out,
                           std::ostream& err);
CommandResult cmd_criteria(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out,
                           std::ostream& err);
CommandResult cmd_phase_plane(const RunConfig& cfg, const CommandOptions& opts,
                              std::ostream& out, std::ostream& err);
CommandResult cmd_cn(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out,
                     std::ostream& err);
CommandResult cmd_converge(const RunConfig& cfg, const CommandOptions& opts, std::ostream& out,
                           std::ostream& err);
CommandResult cmd_critical_point(const RunConfig& cfg, const CommandOptions& opts,
                                 std::ostream& out, std::ostream& err);

/// gnuplot script drawing the six panels (each curve over the basin grid,
/// then all curves together) from the phase-plane CSVs in the same directory.
std::string phase_plane_gnuplot(const PhasePortrait& portrait);

std::string_view to_string(TimeScaling s);
std::string_view to_string(Method m);

}  // namespace collapse
