#pragma once

#include <string>
#include <vector>

#include "jsce/trial.hpp"

namespace jsce {

struct SweepTask {
  Scheme scheme = Scheme::ASTVBI;
  std::string axis = "power";
  double value = 0.0;  // requested sweep value (dBm, gamma_o, or Np)
  uint64_t seed = 0;
  TrialOverrides overrides;
};

/// Runs tasks on a worker pool; the result order matches the task order so
/// output files are byte-identical across runs.
std::vector<TrialResult> run_trials(const ExperimentConfig& cfg, const std::vector<SweepTask>& tasks,
                                    int threads);

/// Task list for the configured sweep axis.
std::vector<SweepTask> build_tasks(const ExperimentConfig& cfg);

/// Maps a requested overlap ratio to the nearest integer overlap count for
/// the given totals.
int overlap_count_for_ratio(double gamma, int K, int L);

struct SweepOutcome {
  int failures = 0;
  std::vector<TrialResult> rows;
};

/// Full sweep: trials, results.csv, summary.json and (optionally) the
/// per-figure plot CSVs under cfg.out_dir.
SweepOutcome run_sweep(const ExperimentConfig& cfg);

void write_results_csv(const std::string& path, const std::vector<TrialResult>& rows);

}  // namespace jsce
