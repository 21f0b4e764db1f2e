#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace qmp {

// One row of the long-format results table. se_v_hat_x stays NaN for solvers
// without an attached prediction; residual_samples is filled only when a run
// requests microscopic snapshots (one normalized residual per coordinate).
struct IterationRecord {
  std::string solver;
  std::uint64_t seed = 0;
  int iter = 0;
  double mse = 0.0;
  double mse_db = 0.0;
  double se_v_hat_x = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> residual_samples;
};

}  // namespace qmp
