#pragma once

#include <vector>

#include "jsce/measurement.hpp"
#include "jsce/scene.hpp"

namespace jsce {

/// Greedy residual-correlation selection with per-block budgets and a
/// least-squares refit on the selected support.
struct OmpResult {
  VecC x;                    // full-length estimate (model column units)
  std::vector<int> support;  // selected columns (global indices)
};

OmpResult omp(const Observation& y, const MeasurementModel& m,
              const std::array<int, kNumBlocks>& budget);

/// Classical evidence-maximization SBL with per-coefficient precisions, EM
/// precision updates and pruning. Operates on internally normalized columns.
struct SblConfig {
  int max_iter = 200;
  double prune_threshold = 1e8;
  double tol = 1e-6;
};

struct SblResult {
  VecC x;                        // full-length posterior mean (model units)
  std::vector<int> support;      // surviving columns
  MatC Sigma_support;            // posterior covariance on the support (model units)
  std::vector<double> evidence;  // log evidence per iteration
};

SblResult sbl(const Observation& y, const MeasurementModel& m, double sigma2,
              const SblConfig& cfg = {});

/// ||x_hat - x||^2 / ||x||^2; throws DomainError when ||x|| = 0.
double nmse(const VecC& x_hat, const VecC& x_true);

/// Minimum-cost one-to-one assignment (Hungarian algorithm) on a square cost
/// matrix; returns the column assigned to each row.
std::vector<int> hungarian(const MatR& cost);

/// Position RMSE with exact assignment matching per class; unmatched truths
/// are penalized at miss_penalty meters.
double rmse(const std::vector<Vec2>& det_targets, const std::vector<Vec2>& det_scatterers,
            const Vec2& det_user, const GroundTruth& truth, double miss_penalty);

/// Assignment-matched mean distance for a single class.
double matched_sq_error_sum(const std::vector<Vec2>& detected, const std::vector<Vec2>& truth,
                            double miss_penalty);

}  // namespace jsce
