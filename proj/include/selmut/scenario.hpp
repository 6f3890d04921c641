// =============================================================================
// scenario.hpp: JSON scenario files and the runners behind the command line.
//
// A scenario fixes a strategy space, a rate model, a mutation kernel, an
// initial measure, integrator settings and a list of analysis requests. The
// whole document is validated before any numeric work; every problem found is
// reported at once through ValidationError. See docs/scenario_schema.md.
// =============================================================================
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "selmut/analysis.hpp"
#include "selmut/dynamics.hpp"
#include "selmut/kernel.hpp"
#include "selmut/measure.hpp"
#include "selmut/report.hpp"
#include "selmut/vitals.hpp"

namespace selmut {

inline constexpr int kScenarioSchema = 1;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;

namespace request {
struct Permanence {};
struct Persistence {
  IndexSet E;
  double eps;
};
struct Lyapunov {
  LyapunovKind kind;
  std::optional<std::size_t> target;
  std::optional<double> c;
};
struct Ass {
  double tol = 1e-3;
};
struct Ratio {
  IndexSet U;
  IndexSet V;
  double xi;
};
struct Equilibrium {
  double newton_tol = 1e-10;
  std::optional<std::vector<double>> x_init;
};
struct Continuation {
  std::vector<double> eps;
  MutationKernel base;
  MutationKernel target;
  double newton_tol = 1e-10;
  std::optional<std::vector<double>> x_init;
};
struct IntegralRepresentation {};
struct Ess {
  double tol = 0.0;
};
struct Superiority {
  std::size_t grid = 100;
};
}  // namespace request

using AnalysisRequest =
    std::variant<request::Permanence, request::Persistence, request::Lyapunov, request::Ass, request::Ratio,
                 request::Equilibrium, request::Continuation, request::IntegralRepresentation, request::Ess,
                 request::Superiority>;

struct Scenario {
  std::string name;
  StrategySpace space;
  RateModel model;
  MutationKernel kernel;
  std::string kernel_description;
  AtomicMeasure initial;
  IntegratorConfig integrator;
  double varpi = 0.0;
  std::vector<AnalysisRequest> analyses;
};

/// Validates and builds a scenario. Relative file paths inside the document
/// resolve against `base_dir`; `seed` drives random initial measures only.
Scenario parse_scenario(const Json& doc, const std::filesystem::path& base_dir = ".",
                        std::uint64_t seed = 0);

/// Reads and parses a scenario file; JSON syntax errors become ValidationError.
Json read_scenario_json(const std::filesystem::path& path);
Scenario load_scenario(const std::filesystem::path& path, std::uint64_t seed = 0);

enum class Command { Simulate, Analyze, Equilibrium };

struct RunOutcome {
  int exit_code = kExitOk;
  Json report;
  std::vector<std::filesystem::path> files;
  std::string message;
};

/// Runs one scenario and writes report.json plus CSV artifacts into `out_dir`.
/// Numeric failures yield exit code 3 with whatever artifacts were produced.
RunOutcome run_scenario(const Scenario& scenario, Command command, const std::filesystem::path& out_dir);

/// File-level entry point: validation problems map to exit code 2.
RunOutcome run_scenario_file(const std::filesystem::path& path, Command command,
                             const std::filesystem::path& out_dir, std::uint64_t seed = 0);

struct SweepOutcome {
  int exit_code = kExitOk;
  Json report;
  std::string message;
};

/// Parameters accepted by sweep(): kernel.eps (blend kernels), initial.total,
/// and any numeric scalar field of the model (model.theta, ...).
SweepOutcome sweep(const std::filesystem::path& path, const std::string& parameter,
                   const std::vector<double>& values, Command command, const std::filesystem::path& out_dir,
                   std::uint64_t seed = 0);

}  // namespace selmut
