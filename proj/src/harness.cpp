#include "cmd/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cmd/errors.hpp"

namespace cmd {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Ids
// ---------------------------------------------------------------------------

std::string method_name(Method m) {
  switch (m) {
    case Method::CMD:
      return "CMD";
    case Method::CMW:
      return "CMW";
    case Method::PCGD:
      return "PCGD";
    case Method::PX:
      return "PX";
    case Method::PXM:
      return "PXM";
    case Method::MD:
      return "MD";
  }
  return "?";
}

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"CMD", "CMW", "PCGD",
                                                 "PX",  "PXM", "MD"};
  return names;
}

const std::vector<std::string>& problem_ids() {
  static const std::vector<std::string> ids = {
      "bilinear_positive", "empty_threats", "robust_regression",
      "constrained_qp"};
  return ids;
}

namespace {

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += v[i];
  }
  return out;
}

}  // namespace

Method parse_method(const std::string& name) {
  if (name == "CMD") return Method::CMD;
  if (name == "CMW") return Method::CMW;
  if (name == "PCGD") return Method::PCGD;
  if (name == "PX") return Method::PX;
  if (name == "PXM") return Method::PXM;
  if (name == "MD") return Method::MD;
  throw ConfigError("unknown method '" + name +
                    "'; valid methods: " + join(method_names()));
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& where) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const auto& k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError(where + ": unknown field '" + item.key() + "'");
    }
  }
}

Vec parse_vec(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  Vec v(j.size());
  Index i = 0;
  for (const auto& e : j) {
    if (!e.is_number()) throw ConfigError(where + ": expected numbers");
    v[i++] = e.get<double>();
  }
  return v;
}

double get_number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

PotentialKind parse_potential_kind(const std::string& s,
                                   const std::string& where) {
  if (s == "shannon") return PotentialKind::Shannon;
  if (s == "burg") return PotentialKind::Burg;
  if (s == "quadratic") return PotentialKind::Quadratic;
  throw ConfigError(where + ": unknown potential '" + s +
                    "'; valid: shannon, burg, quadratic");
}

ProblemSpec parse_problem(const json& j) {
  ProblemSpec spec;
  if (j.is_string()) {
    spec.id = j.get<std::string>();
  } else if (j.is_object()) {
    check_keys(j, {"id", "alpha", "rows", "cols", "seed", "dim", "c"},
               "problem");
    if (!j.contains("id") || !j["id"].is_string()) {
      throw ConfigError("problem: missing string field 'id'");
    }
    spec.id = j["id"].get<std::string>();
    if (j.contains("alpha")) spec.alpha = get_number(j["alpha"], "problem.alpha");
    if (j.contains("rows"))
      spec.rows = static_cast<Index>(get_number(j["rows"], "problem.rows"));
    if (j.contains("cols"))
      spec.cols = static_cast<Index>(get_number(j["cols"], "problem.cols"));
    if (j.contains("seed"))
      spec.seed =
          static_cast<std::uint64_t>(get_number(j["seed"], "problem.seed"));
    if (j.contains("dim"))
      spec.dim = static_cast<Index>(get_number(j["dim"], "problem.dim"));
    if (j.contains("c")) spec.c = parse_vec(j["c"], "problem.c");
  } else {
    throw ConfigError("problem: expected a string id or an object");
  }

  bool known = false;
  for (const auto& id : problem_ids()) known = known || id == spec.id;
  if (!known) {
    throw ConfigError("unknown problem '" + spec.id +
                      "'; valid problems: " + join(problem_ids()));
  }
  return spec;
}

RunConfig parse_config_json(const json& j, const std::string& context) {
  if (!j.is_object()) throw ConfigError(context + ": expected a JSON object");
  check_keys(j,
             {"problem", "method", "alpha", "beta", "eta", "potential",
              "krylov", "warm_start", "alternating", "max_iters",
              "stop_grad_norm", "divergence_cap", "initial", "reference",
              "stop_dist_ref", "out", "trace_stride", "seed"},
             context);

  RunConfig cfg;
  if (!j.contains("problem")) throw ConfigError(context + ": missing 'problem'");
  cfg.problem = parse_problem(j["problem"]);
  if (j.contains("seed")) {
    cfg.problem.seed =
        static_cast<std::uint64_t>(get_number(j["seed"], "seed"));
  }

  if (!j.contains("method") || !j["method"].is_string()) {
    throw ConfigError(context + ": missing string field 'method'");
  }
  cfg.solver.method = parse_method(j["method"].get<std::string>());

  const bool has_eta = j.contains("eta");
  if (has_eta && (j.contains("alpha") || j.contains("beta"))) {
    throw ConfigError(context + ": give either 'eta' or 'alpha'/'beta'");
  }
  if (has_eta) {
    const double eta = get_number(j["eta"], "eta");
    if (!(eta > 0.0)) throw ConfigError("eta: must be positive");
    cfg.solver.inv_step_x = 1.0 / eta;
    cfg.solver.inv_step_y = 1.0 / eta;
  }
  if (j.contains("alpha")) {
    cfg.solver.inv_step_x = get_number(j["alpha"], "alpha");
  }
  if (j.contains("beta")) {
    cfg.solver.inv_step_y = get_number(j["beta"], "beta");
  }
  if (!(cfg.solver.inv_step_x > 0.0) || !(cfg.solver.inv_step_y > 0.0)) {
    throw ConfigError("alpha/beta: inverse step sizes must be positive");
  }

  if (j.contains("potential")) {
    if (!j["potential"].is_string()) {
      throw ConfigError("potential: expected a string");
    }
    const PotentialKind k =
        parse_potential_kind(j["potential"].get<std::string>(), "potential");
    cfg.solver.cone_potential_x = k;
    cfg.solver.cone_potential_y = k;
  }

  if (j.contains("krylov")) {
    const json& kj = j["krylov"];
    check_keys(kj, {"tol", "max_iter"}, "krylov");
    if (kj.contains("tol")) {
      cfg.solver.krylov.tol = get_number(kj["tol"], "krylov.tol");
      if (!(cfg.solver.krylov.tol > 0.0)) {
        throw ConfigError("krylov.tol: must be positive");
      }
    }
    if (kj.contains("max_iter")) {
      cfg.solver.krylov.max_iter =
          static_cast<int>(get_number(kj["max_iter"], "krylov.max_iter"));
    }
  }
  if (j.contains("warm_start")) {
    if (!j["warm_start"].is_boolean()) {
      throw ConfigError("warm_start: expected a boolean");
    }
    cfg.solver.warm_start = j["warm_start"].get<bool>();
  }
  if (j.contains("alternating")) {
    if (!j["alternating"].is_boolean()) {
      throw ConfigError("alternating: expected a boolean");
    }
    cfg.solver.alternating = j["alternating"].get<bool>();
  }
  if (j.contains("max_iters")) {
    cfg.solver.max_iters =
        static_cast<long>(get_number(j["max_iters"], "max_iters"));
    if (cfg.solver.max_iters < 0) {
      throw ConfigError("max_iters: must be >= 0");
    }
  }
  if (j.contains("stop_grad_norm")) {
    cfg.solver.stop_grad_norm =
        get_number(j["stop_grad_norm"], "stop_grad_norm");
  }
  if (j.contains("divergence_cap")) {
    cfg.solver.divergence_cap =
        get_number(j["divergence_cap"], "divergence_cap");
    if (!(cfg.solver.divergence_cap > 0.0)) {
      throw ConfigError("divergence_cap: must be positive");
    }
  }

  if (j.contains("initial")) {
    const json& ij = j["initial"];
    check_keys(ij, {"x", "y"}, "initial");
    if (ij.contains("x")) cfg.initial_x = parse_vec(ij["x"], "initial.x");
    if (ij.contains("y")) cfg.initial_y = parse_vec(ij["y"], "initial.y");
  }
  if (j.contains("reference")) {
    const json& rj = j["reference"];
    if (rj.is_boolean() && !rj.get<bool>()) {
      cfg.use_registry_reference = false;
    } else if (rj.is_object()) {
      check_keys(rj, {"x", "y"}, "reference");
      if (rj.contains("x")) cfg.ref_x = parse_vec(rj["x"], "reference.x");
      if (rj.contains("y")) cfg.ref_y = parse_vec(rj["y"], "reference.y");
    } else {
      throw ConfigError("reference: expected an object or false");
    }
  }
  if (j.contains("stop_dist_ref")) {
    cfg.stop_dist = get_number(j["stop_dist_ref"], "stop_dist_ref");
    if (cfg.stop_dist < 0.0) throw ConfigError("stop_dist_ref: must be >= 0");
  }
  if (j.contains("out")) {
    if (!j["out"].is_string()) throw ConfigError("out: expected a string");
    cfg.out_path = j["out"].get<std::string>();
  }
  if (j.contains("trace_stride")) {
    cfg.trace_stride =
        static_cast<long>(get_number(j["trace_stride"], "trace_stride"));
    if (cfg.trace_stride < 1) throw ConfigError("trace_stride: must be >= 1");
  }
  return cfg;
}

}  // namespace

RunConfig parse_config_text(const std::string& text,
                            const std::string& context) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(context + ": " + e.what());
  }
  return parse_config_json(j, context);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

// ---------------------------------------------------------------------------
// Problem construction
// ---------------------------------------------------------------------------

ProblemBundle build_problem(const ProblemSpec& spec) {
  ProblemBundle b;
  if (spec.id == "bilinear_positive") {
    b.game = make_bilinear_positive(spec.alpha);
    b.base_dim_x = b.base_dim_y = 1;
    b.default_primal_x = Vec::Ones(1);
    b.default_primal_y = Vec::Ones(1);
    b.ref_x = Vec::Constant(1, 0.1);
    b.ref_y = Vec::Constant(1, 0.1);
    return b;
  }
  if (spec.id == "empty_threats") {
    b.game = make_empty_threats();
    b.base_dim_x = b.base_dim_y = 1;
    b.default_primal_x = Vec::Ones(1);
    b.default_primal_y = Vec::Ones(1);
    b.ref_x = Vec::Zero(1);
    b.ref_y = Vec::Ones(1);
    return b;
  }
  if (spec.id == "robust_regression") {
    RobustRegression rr =
        make_robust_regression(spec.rows, spec.cols, spec.seed);
    const Index cols = spec.cols;
    b.base_dim_x = cols;
    b.base_dim_y = 0;
    b.game = lagrangian_transform(rr.problem).game;
    b.default_primal_x = Vec::Constant(cols, 1.0 / static_cast<double>(cols));
    b.default_primal_y = Vec(0);
    const auto a = rr.a;
    const Vec rhs = rr.b;
    b.report_f = [a, rhs, cols](const Vec& xh, const Vec&) {
      const Vec x = xh.head(cols);
      const double s = x.sum();
      return (*a * (x / s) - rhs).squaredNorm();
    };
    return b;
  }
  if (spec.id == "constrained_qp") {
    Vec c = spec.c ? *spec.c : gaussian(spec.seed, spec.dim);
    ConstrainedProblem p = make_constrained_qp(c);
    b.base_dim_x = c.size();
    b.base_dim_y = 0;
    b.game = lagrangian_transform(p).game;
    b.default_primal_x =
        Vec::Constant(c.size(), 1.0 / static_cast<double>(c.size()));
    b.default_primal_y = Vec(0);
    b.ref_x = constrained_qp_solution(c);
    return b;
  }
  throw ConfigError("unknown problem '" + spec.id +
                    "'; valid problems: " + join(problem_ids()));
}

namespace {

// primal override (when given) plus default multiplier values: 1 on
// StrictlyPositive multiplier blocks, 0 on free ones
Vec assemble_start(const BlockLayout& layout, Index base_dim,
                   const std::optional<Vec>& primal_override,
                   const Vec& default_primal, const char* player) {
  Vec full(layout.dim());
  const Vec& primal = primal_override ? *primal_override : default_primal;
  if (primal.size() != base_dim) {
    throw ConfigError(std::string("initial.") + player + ": expected length " +
                      std::to_string(base_dim) + ", got " +
                      std::to_string(primal.size()));
  }
  full.head(base_dim) = primal;
  for (const Block& blk : layout.blocks()) {
    if (blk.offset >= base_dim) {
      full.segment(blk.offset, blk.size) =
          Vec::Constant(blk.size, blk.tag == DomainTag::StrictlyPositive
                                      ? 1.0
                                      : 0.0);
    }
  }
  return full;
}

}  // namespace

RunTrace run_experiment(const RunConfig& config,
                        const std::function<void(const IterateState&)>&
                            on_state) {
  try {
    ProblemBundle b = build_problem(config.problem);
    const Vec x0 = assemble_start(*b.game.layout_x, b.base_dim_x,
                                  config.initial_x, b.default_primal_x, "x");
    const Vec y0 = assemble_start(*b.game.layout_y, b.base_dim_y,
                                  config.initial_y, b.default_primal_y, "y");

    std::optional<Vec> ref_x = config.ref_x;
    std::optional<Vec> ref_y = config.ref_y;
    if (!ref_x && !ref_y && config.use_registry_reference) {
      ref_x = b.ref_x;
      ref_y = b.ref_y;
    }
    if (ref_x && ref_x->size() != b.base_dim_x) {
      throw ConfigError("reference.x: expected length " +
                        std::to_string(b.base_dim_x));
    }
    if (ref_y && ref_y->size() != b.base_dim_y) {
      throw ConfigError("reference.y: expected length " +
                        std::to_string(b.base_dim_y));
    }

    TraceOptions topt;
    topt.stride = config.trace_stride;
    topt.report_f = b.report_f;
    if (ref_x || ref_y) {
      const Index bdx = b.base_dim_x;
      const Index bdy = b.base_dim_y;
      topt.dist_ref = [ref_x, ref_y, bdx, bdy](const Vec& x, const Vec& y) {
        double d2 = 0.0;
        if (ref_x) d2 += (x.head(bdx) - *ref_x).squaredNorm();
        if (ref_y) d2 += (y.head(bdy) - *ref_y).squaredNorm();
        return std::sqrt(d2);
      };
      topt.stop_dist = config.stop_dist;
    }
    topt.on_state = on_state;
    return run_solver(b.game, x0, y0, config.solver, topt);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StepError("run '" + config.problem.id + "' + " +
                    method_name(config.solver.method) + " failed: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Trace CSV
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kTraceHeader =
    "iter,f,g,grad_norm,dist_ref,krylov_iters,grad_calls,hvp_calls,wall_s,"
    "status";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_trace(const RunTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << kTraceHeader << "\n";
  for (const TraceRecord& r : trace.records) {
    out << r.iter << ',' << fmt17(r.f) << ',' << fmt17(r.g) << ','
        << fmt17(r.grad_norm) << ',' << fmt17(r.dist_ref) << ','
        << r.krylov_iters << ',' << r.grad_calls << ',' << r.hvp_calls << ','
        << fmt17(r.wall_s) << ',' << r.status << "\n";
  }
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

RunTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw ConfigError("'" + path + "': missing or malformed trace header");
  }
  RunTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 10) {
      throw ConfigError("'" + path + "': malformed row '" + line + "'");
    }
    TraceRecord r;
    r.iter = std::stol(fields[0]);
    r.f = std::strtod(fields[1].c_str(), nullptr);
    r.g = std::strtod(fields[2].c_str(), nullptr);
    r.grad_norm = std::strtod(fields[3].c_str(), nullptr);
    r.dist_ref = std::strtod(fields[4].c_str(), nullptr);
    r.krylov_iters = std::stol(fields[5]);
    r.grad_calls = std::stol(fields[6]);
    r.hvp_calls = std::stol(fields[7]);
    r.wall_s = std::strtod(fields[8].c_str(), nullptr);
    r.status = fields[9];
    trace.records.push_back(std::move(r));
  }
  return trace;
}

}  // namespace cmd
