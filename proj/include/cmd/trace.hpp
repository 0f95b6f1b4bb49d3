#pragma once

#include <string>
#include <vector>

namespace cmd {

enum class RunStatus { Converged, MaxIters, Diverged };

const char* run_status_name(RunStatus s);

/// One recorded iteration. Counters are cumulative; krylov_iters is the HVP
/// pair count of the step that produced this iterate (0 for the initial row
/// and for Krylov-free methods).
struct TraceRecord {
  long iter = 0;
  double f = 0.0;
  double g = 0.0;
  double grad_norm = 0.0;
  double dist_ref = 0.0;  // NaN when no reference is configured
  long krylov_iters = 0;
  long grad_calls = 0;
  long hvp_calls = 0;
  double wall_s = 0.0;
  std::string status;  // "ok", "clamp", or "diverged"
};

struct RunTrace {
  std::vector<TraceRecord> records;
  RunStatus terminal = RunStatus::MaxIters;
};

}  // namespace cmd
