#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cmd/errors.hpp"
#include "cmd/harness.hpp"

namespace cmd {

namespace {

using json = nlohmann::ordered_json;

/// Relative output paths are placed under $CMDSOLVE_OUT_DIR when it is set.
std::string resolve_out(const std::string& path) {
  if (path.empty() || path.front() == '/') return path;
  const char* dir = std::getenv("CMDSOLVE_OUT_DIR");
  if (!dir || !*dir) return path;
  return std::string(dir) + "/" + path;
}

std::string fmt_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string summary_line(const RunTrace& tr, const std::string& trace_path) {
  const TraceRecord& last = tr.records.back();
  std::ostringstream ss;
  ss << "status=" << run_status_name(tr.terminal) << " iters=" << last.iter
     << " f=" << last.f << " grad_norm=" << last.grad_norm;
  if (std::isfinite(last.dist_ref)) ss << " dist_ref=" << last.dist_ref;
  ss << " grad_calls=" << last.grad_calls << " hvp_calls=" << last.hvp_calls;
  if (!trace_path.empty()) ss << " trace=" << trace_path;
  return ss.str();
}

int do_run(const std::string& config_path, const std::string& out_override,
           std::ostream& out) {
  RunConfig cfg = load_config(config_path);
  if (!out_override.empty()) cfg.out_path = out_override;
  if (cfg.out_path.empty()) cfg.out_path = "trace.csv";
  const std::string path = resolve_out(cfg.out_path);
  const RunTrace tr = run_experiment(cfg);
  write_trace(tr, path);
  out << summary_line(tr, path) << "\n";
  return tr.terminal == RunStatus::Diverged ? 2 : 0;
}

int do_check_grad(const std::string& problem_id, const std::string& point_str,
                  double tol, std::ostream& out) {
  ProblemSpec spec;
  spec.id = problem_id;
  const ProblemBundle b = build_problem(spec);

  Vec primal_x = b.default_primal_x;
  Vec primal_y = b.default_primal_y;
  if (!point_str.empty()) {
    std::vector<double> vals;
    std::stringstream ss(point_str);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        vals.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("--point: '" + tok + "' is not a number");
      }
    }
    if (static_cast<Index>(vals.size()) != b.base_dim_x + b.base_dim_y) {
      throw ConfigError("--point: expected " +
                        std::to_string(b.base_dim_x + b.base_dim_y) +
                        " comma-separated values (x then y)");
    }
    primal_x = Eigen::Map<const Vec>(vals.data(), b.base_dim_x);
    primal_y = Eigen::Map<const Vec>(vals.data() + b.base_dim_x, b.base_dim_y);
  }

  // multipliers (when present) sit at their default interior values
  Vec x0(b.game.layout_x->dim());
  x0.head(b.base_dim_x) = primal_x;
  Vec y0(b.game.layout_y->dim());
  y0.head(b.base_dim_y) = primal_y;
  for (const Block& blk : b.game.layout_x->blocks()) {
    if (blk.offset >= b.base_dim_x) {
      x0.segment(blk.offset, blk.size) = Vec::Constant(
          blk.size, blk.tag == DomainTag::StrictlyPositive ? 1.0 : 0.0);
    }
  }
  for (const Block& blk : b.game.layout_y->blocks()) {
    if (blk.offset >= b.base_dim_y) {
      y0.segment(blk.offset, blk.size) = Vec::Constant(
          blk.size, blk.tag == DomainTag::StrictlyPositive ? 1.0 : 0.0);
    }
  }

  const OracleCheckReport rep =
      check_first_order_oracles(b.game, x0, y0, tol);
  for (const OracleCheck& c : rep.checks) {
    out << (c.pass ? "PASS" : "FAIL") << "  " << c.name
        << "  max_rel_error=" << c.max_rel_error << "\n";
  }
  out << (rep.all_pass ? "all oracles consistent" : "oracle check FAILED")
      << "\n";
  return rep.all_pass ? 0 : 1;
}

int do_list(std::ostream& out) {
  out << "problems:";
  for (const auto& id : problem_ids()) out << " " << id;
  out << "\nmethods:";
  for (const auto& m : method_names()) out << " " << m;
  out << "\n";
  return 0;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

int do_sweep(const std::string& config_path, const std::string& grid_path,
             const std::string& out_override, std::ostream& out) {
  const json base = load_json_file(config_path);
  const json grid = load_json_file(grid_path);
  if (!grid.is_object() || grid.empty()) {
    throw ConfigError(grid_path + ": grid must be a non-empty JSON object");
  }
  std::vector<std::string> fields;
  std::vector<std::vector<double>> values;
  for (const auto& item : grid.items()) {
    if (!item.value().is_array() || item.value().empty()) {
      throw ConfigError("grid field '" + item.key() +
                        "': expected a non-empty array of numbers");
    }
    std::vector<double> vals;
    for (const auto& v : item.value()) {
      if (!v.is_number()) {
        throw ConfigError("grid field '" + item.key() + "': expected numbers");
      }
      vals.push_back(v.get<double>());
    }
    fields.push_back(item.key());
    values.push_back(std::move(vals));
  }

  std::string out_base = out_override;
  if (out_base.empty() && base.contains("out") && base["out"].is_string()) {
    out_base = base["out"].get<std::string>();
  }
  if (out_base.empty()) out_base = "sweep.csv";
  std::string stem = out_base;
  std::string ext = ".csv";
  if (const auto pos = out_base.rfind(".csv"); pos != std::string::npos) {
    stem = out_base.substr(0, pos);
  }

  std::vector<std::size_t> idx(fields.size(), 0);
  int failures = 0;
  while (true) {
    json cell = base;
    std::string suffix;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      const double v = values[f][idx[f]];
      const std::string& field = fields[f];
      if (field.rfind("problem.", 0) == 0) {
        const std::string sub = field.substr(8);
        if (!cell.contains("problem")) {
          throw ConfigError("grid field '" + field +
                            "': config has no 'problem'");
        }
        if (cell["problem"].is_string()) {
          json obj;
          obj["id"] = cell["problem"];
          cell["problem"] = obj;
        }
        cell["problem"][sub] = v;
        suffix += "_" + sub + fmt_value(v);
      } else {
        cell[field] = v;
        suffix += "_" + field + fmt_value(v);
      }
    }
    RunConfig cfg = parse_config_text(cell.dump(), config_path + suffix);
    cfg.out_path = stem + suffix + ext;
    const std::string path = resolve_out(cfg.out_path);
    const RunTrace tr = run_experiment(cfg);
    write_trace(tr, path);
    out << "cell" << suffix << ": " << summary_line(tr, path) << "\n";
    if (tr.terminal == RunStatus::Diverged) ++failures;

    std::size_t f = 0;
    for (; f < fields.size(); ++f) {
      if (++idx[f] < values[f].size()) break;
      idx[f] = 0;
    }
    if (f == fields.size()) break;
  }
  out << "sweep complete (" << failures << " diverged cells)\n";
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{
      "Constrained competitive optimization: mirror-descent and "
      "extragradient solvers with a config-driven experiment harness"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  auto* run = app.add_subcommand(
      "run",
      "Run one experiment from a JSON config and write a CSV trace.\n"
      "Config defaults: alpha=beta=1, potential=shannon, krylov.tol=1e-8,\n"
      "krylov.max_iter=10*dim, warm_start=true, alternating=false,\n"
      "max_iters=1000, stop_grad_norm=0 (off), divergence_cap=1e8,\n"
      "trace_stride=1. Exit code 2 when the run diverged.");
  run->add_option("config", run_config, "JSON config file")->required();
  run->add_option("--out", run_out, "trace CSV path (overrides config 'out')");

  std::string cg_problem, cg_point;
  double cg_tol = 1e-5;
  auto* check = app.add_subcommand(
      "check-grad",
      "Verify a builtin problem's gradient and Hessian-vector oracles "
      "against finite differences. Exit code 0 iff all oracles pass.");
  check->add_option("problem", cg_problem, "builtin problem id")->required();
  check->add_option("--point", cg_point,
                    "comma-separated primal evaluation point (x then y)");
  check->add_option("--tol", cg_tol, "relative tolerance (default 1e-5)");

  app.add_subcommand("list", "Print the builtin problem and method ids.");

  std::string sw_config, sw_grid, sw_out;
  auto* sweep = app.add_subcommand(
      "sweep",
      "Run the cartesian grid from --grid (JSON object field -> values, "
      "fields are config keys or problem.<param>) over a base config, one "
      "trace per cell, filenames suffixed by the grid values.");
  sweep->add_option("config", sw_config, "base JSON config file")->required();
  sweep->add_option("--grid", sw_grid, "JSON grid file")->required();
  sweep->add_option("--out", sw_out, "base trace path for cell outputs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return 64;
  }

  try {
    if (run->parsed()) return do_run(run_config, run_out, out);
    if (check->parsed()) return do_check_grad(cg_problem, cg_point, cg_tol, out);
    if (sweep->parsed()) return do_sweep(sw_config, sw_grid, sw_out, out);
    return do_list(out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 65;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cmd
