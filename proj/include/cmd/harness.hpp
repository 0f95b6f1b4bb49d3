#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cmd/games.hpp"
#include "cmd/rng.hpp"
#include "cmd/solvers.hpp"
#include "cmd/trace.hpp"

namespace cmd {

std::string method_name(Method m);
/// Throws ConfigError listing the valid ids on an unknown name.
Method parse_method(const std::string& name);

const std::vector<std::string>& problem_ids();
const std::vector<std::string>& method_names();

/// Builtin problem selection plus its parameters (unused fields ignored).
struct ProblemSpec {
  std::string id;
  double alpha = 1.0;         // bilinear_positive gain
  Index rows = 50;            // robust_regression
  Index cols = 500;           //   (desk-scale defaults; the original experiment uses 50x5000)
  std::uint64_t seed = 0;
  Index dim = 10;             // constrained_qp
  std::optional<Vec> c;       // constrained_qp explicit target
};

/// Fully validated run description. Solver fields live in `solver`;
/// initial/reference points refer to the players' primal variables
/// (multiplier blocks are initialized to their defaults: 1 for positive
/// blocks, 0 for free ones).
struct RunConfig {
  ProblemSpec problem;
  SolverConfig solver;
  std::optional<Vec> initial_x, initial_y;
  std::optional<Vec> ref_x, ref_y;
  bool use_registry_reference = true;
  double stop_dist = 0.0;
  std::string out_path;
  long trace_stride = 1;
};

/// Parses and validates a JSON config file. Unknown fields, unknown ids and
/// malformed values raise ConfigError naming the offender.
RunConfig load_config(const std::string& path);
/// Same, from an in-memory JSON document.
RunConfig parse_config_text(const std::string& text,
                            const std::string& context = "config");

/// A builtin problem instantiated and, when constrained, passed through the
/// Lagrangian transform.
struct ProblemBundle {
  TwoPlayerGame game;
  Index base_dim_x = 0, base_dim_y = 0;  // primal dims before the transform
  Vec default_primal_x, default_primal_y;
  std::optional<Vec> ref_x, ref_y;  // registered equilibrium, primal coords
  std::function<double(const Vec&, const Vec&)> report_f;  // null: eval_f
};

ProblemBundle build_problem(const ProblemSpec& spec);

/// Builds the problem, assembles the initial point, runs the solver and
/// returns the trace. The reported objective for robust_regression is the
/// objective of the normalized iterate x / 1'x. `on_state`, when given,
/// observes every iterate.
RunTrace run_experiment(const RunConfig& config,
                        const std::function<void(const IterateState&)>&
                            on_state = {});

/// CSV with header
///   iter,f,g,grad_norm,dist_ref,krylov_iters,grad_calls,hvp_calls,wall_s,status
/// floats at 17 significant digits, one trailing newline.
void write_trace(const RunTrace& trace, const std::string& path);
/// Parses a file written by write_trace (terminal status is not stored in
/// the CSV and defaults to MaxIters).
RunTrace read_trace(const std::string& path);

/// CLI entry point (subcommands: run, check-grad, list, sweep). Returns the
/// process exit code: 0 success, 2 diverged run, 64 usage error, 65 config
/// error.
int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err);

}  // namespace cmd
