#pragma once

#include <functional>
#include <vector>

#include "jsce/estep.hpp"

namespace jsce {

/// BS- and IRS-related parts of the surrogate gradient w.r.t. the position
/// offsets; rows outside the candidate set stay zero.
struct SurrogateGradients {
  MatR g_bs_r, g_irs_r;  // Q x 2
  MatR g_bs_z, g_irs_z;  // P x 2
};

enum class MStepRule { DDG, GradientAscent };

struct MStepConfig {
  MStepRule rule = MStepRule::DDG;
  double step_init_frac = 1.0 / 8.0;    // of the grid spacing
  double step_floor_frac = 1.0 / 256.0;
  double shrink = 0.5;
  int N_out = 50;
  double eps_out = 1e-3;  // relative to sum of block mean norms
  double cand_threshold = 0.5;
  int cand_topk = 0;  // energy fallback size (K + L)
};

/// Rebuilds the measurement model for candidate offsets.
using ModelBuilder = std::function<MeasurementModel(const OffsetState&)>;

/// Pluggable E step (the TVBI module or a baseline estimator).
using EStepFn = std::function<PosteriorState(const Observation&, const MeasurementModel&)>;

/// EM surrogate evaluated against an already-assembled model.
double surrogate_core(const MeasurementModel& m, const PosteriorState& st, const Observation& y,
                      double sigma2);

/// EM surrogate at candidate offsets (rebuilds F through the builder).
double surrogate_Q(const OffsetState& offsets, const PosteriorState& st, const Observation& y,
                   const ModelBuilder& builder, double sigma2);

/// Analytic gradients of the surrogate, split into the BS-angle and
/// IRS-angle chains. Offsets must match the model's dictionaries.
SurrogateGradients gradients(const MeasurementModel& m, const PosteriorState& st,
                             const Observation& y, const SceneConfig& scene, const GridSpec& grids,
                             const OffsetState& offsets, double sigma2,
                             const std::vector<int>& candidates_r);

/// Double-direction rule: move only when both gradient sources agree in
/// sign, stepping by the sign of the BS component; clamped to half spacing.
OffsetState ddg_update(const OffsetState& offsets, const SurrogateGradients& g,
                       const GridSpec& grids, double step_r, double step_z,
                       const std::vector<int>& candidates_r);

/// Gradient-ascent baseline: per-grid-normalized full gradient direction.
OffsetState gradient_ascent_update(const OffsetState& offsets, const SurrogateGradients& g,
                                   const GridSpec& grids, double step_r, double step_z,
                                   const std::vector<int>& candidates_r);

/// Candidate grids: support posterior above threshold, or among the top-k
/// total energies.
std::vector<int> select_candidates(const PosteriorState& st, int topk, double prob_threshold);

struct MStepTraceRow {
  int iter = 0;
  double surrogate = 0.0;
  double mu_change = 0.0;
  double step_r = 0.0;
};

struct ASTVBIResult {
  PosteriorState posterior;
  OffsetState offsets;
  int iterations = 0;
  double final_surrogate = 0.0;
  std::vector<MStepTraceRow> trace;
};

/// Outer EM loop: alternates the E step with offset refinement until the
/// block means settle or N_out is reached.
ASTVBIResult run_as_tvbi(const Observation& y, const ModelBuilder& builder, const EStepFn& estep,
                         const SceneConfig& scene, const GridSpec& grids, double sigma2,
                         const MStepConfig& cfg);

}  // namespace jsce
