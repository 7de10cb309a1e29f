#pragma once

#include <optional>
#include <vector>

#include "fcco/config.hpp"

namespace fcco {

struct TraceRow {
  std::size_t iter = 0;  // completed iterations
  double objective = 0.0;
  double step_norm = 0.0;
  std::optional<double> est_error;
  std::optional<double> moreau_grad;
};

struct RunTrace {
  std::vector<TraceRow> rows;
  std::size_t trace_every = 1;
  SolverConfig config;
  double wall_seconds = 0.0;
  // Running mean of squared Moreau gradient norms over probed rows.
  std::optional<double> moreau_sq_mean;
};

}  // namespace fcco
