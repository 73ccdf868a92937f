#pragma once

#include <optional>
#include <vector>

#include "jsce/measurement.hpp"
#include "jsce/priors.hpp"

namespace jsce {

/// Variational posterior: per-block Gaussians, gamma precision factors and
/// Bernoulli support factors.
struct PosteriorState {
  std::array<VecC, kNumBlocks> mu;
  std::array<MatC, kNumBlocks> Sigma;
  std::array<VecR, kNumBlocks> a_t, b_t;  // gamma posterior (a~, b~)
  VecR pit_T, pit_NL;  // Q
  VecR pit_L;          // P

  VecR precision_mean(int b) const { return a_t[b].array() / b_t[b].array(); }
};

/// Extrinsic messages exchanged between Module A and Module B.
struct TurboMessages {
  VecR gamma_T, gamma_NL;  // B -> A activity probabilities
  VecR piB_T, piB_NL;      // A -> B extrinsic activity probabilities
};

struct EStepConfig {
  int max_turbo = 10;
  double turbo_tol = 1e-4;
  int inner_max = 30;
  double inner_tol = 1e-6;
  int bp_sweeps = 10;
  double bp_damping = 0.0;
};

/// Cached per-section cross-Gramians F_b^H F_b' and projected data F_b^H y;
/// the coordinate updates run entirely on these small matrices.
struct GramCache {
  std::array<std::array<MatC, kNumBlocks>, kNumBlocks> G;
  std::array<VecC, kNumBlocks> Fy;

  static GramCache build(const MeasurementModel& m, const Observation& y);
};

/// Module A initialization: support factors from the incoming messages,
/// mixture-weighted gamma means, and a joint linear-Gaussian solve per
/// section with per-block diagonal extraction.
PosteriorState init_posteriors(const Observation& y, const MeasurementModel& m,
                               const GramCache& cache, const GammaHyper& hyper, const VecR& pi_T,
                               const VecR& pi_NL, const VecR& pi_L, double sigma2);

/// One coordinate sweep of the per-block Gaussian factors.
void update_x(PosteriorState& st, const GramCache& cache, double sigma2);

/// Gamma factor refresh from the current Gaussian moments and supports.
void update_rho(PosteriorState& st, const GammaHyper& hyper);

/// Support posterior refresh from the gamma moments and incoming priors.
void update_s(PosteriorState& st, const GammaHyper& hyper, const VecR& pi_T, const VecR& pi_NL,
              const VecR& pi_L);

/// Extrinsic information pi~(1-g) / [pi~(1-g) + (1-pi~)g]; 0/0 gives 0.5.
VecR extrinsic(const VecR& pit, const VecR& gamma);

/// Messages of one loopy-BP pass over the union MRF.
struct ModuleBResult {
  VecR gamma_T, gamma_NL;  // outgoing g^A activity probabilities
  VecR union_belief;       // posterior activity of s_U (diagnostics/tests)
};

ModuleBResult module_b_pass(const VecR& piB_T, const VecR& piB_NL, const SupportProbs& probs,
                            const MRFParams& mrf, int sweeps, double damping = 0.0);

/// Evidence lower bound of the Module-A factorization under the incoming
/// support priors (used for the monotonicity property and trace dumps).
double elbo(const PosteriorState& st, const Observation& y, const MeasurementModel& m,
            const GramCache& cache, const GammaHyper& hyper, const VecR& pi_T, const VecR& pi_NL,
            const VecR& pi_L, double sigma2);

struct EStepTraceRow {
  int turbo_iter = 0;
  double elbo = 0.0;
  double support_change = 0.0;
};

/// Full E step: Module A coordinate ascent and Module B message passing in a
/// turbo loop until the support posteriors settle.
PosteriorState run_estep(const Observation& y, const MeasurementModel& m, const GammaHyper& hyper,
                         const SupportProbs& probs, const MRFParams& mrf, double sigma2,
                         const EStepConfig& cfg = {}, std::vector<EStepTraceRow>* trace = nullptr);

}  // namespace jsce
