#pragma once

#include <optional>
#include <string>

#include "jsce/config.hpp"
#include "jsce/crb.hpp"
#include "jsce/trial_support.hpp"

namespace jsce {

enum class Scheme { ASTVBI, TPOMP, TPSBL, SPTVBI, GENIE };

std::string scheme_name(Scheme s);
std::optional<Scheme> scheme_from_name(const std::string& name);

struct TrialResult {
  uint64_t seed = 0;
  std::string scheme;
  std::string axis = "power";
  double sweep_value = 0.0;
  std::array<double, kNumBlocks> nmse_block{};
  double nmse_sensing = 0.0;
  double nmse_comm = 0.0;
  double rmse = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
  bool failed = false;
  std::string error;
};

struct TrialTraces {
  std::vector<MStepTraceRow> em_trace;
  std::vector<double> rcg_trace;
};

struct TrialOverrides {
  double pt_dbm = 5.0;
  int O = -1;   // -1 keeps the config value
  int Np = -1;
  int K_B = -1, L_B = -1;
  std::optional<MStepRule> rule;  // M-step rule override (DDG/GA comparisons)
};

/// One full two-phase trial of the given scheme; all randomness is derived
/// from (seed, stream) so reruns are bit-identical.
TrialResult run_two_phase(const ExperimentConfig& cfg, Scheme scheme, uint64_t seed,
                          const TrialOverrides& ovr, TrialTraces* traces = nullptr);

}  // namespace jsce
