#pragma once

#include <array>

#include "jsce/measurement.hpp"
#include "jsce/rng.hpp"
#include "jsce/scene.hpp"

namespace jsce {

/// +/-1 support vectors for the three channel families and their union.
/// The coupled prior enforces the one-directional delta constraint: no
/// target/scatterer support may be active where the union is inactive.
struct SupportState {
  VecI s_T, s_NL;  // Q
  VecI s_L;        // P
  VecI s_U;        // Q

  bool union_consistent() const {
    for (int q = 0; q < s_U.size(); ++q)
      if (s_U(q) == -1 && (s_T(q) == 1 || s_NL(q) == 1)) return false;
    return true;
  }
};

/// Gamma shape/rate pairs for the active and inactive precision mixtures,
/// per block and grid index.
struct GammaHyper {
  std::array<VecR, kNumBlocks> a, b, a_bar, b_bar;
};

/// Ising prior on the union support of a 4-connected lattice stored
/// column-major with per-column stride ny (top/bottom neighbors are q -+ 1,
/// left/right neighbors q -+ ny).
struct MRFParams {
  double alpha = 0.3;
  double beta = 0.5;
  int nx = 0;
  int ny = 0;

  int size() const { return nx * ny; }
};

/// Conditional activity probabilities of the coupled support prior.
struct SupportProbs {
  double p_T = 0.5;   // K / (K + L - O)
  double p_NL = 0.5;  // L / (K + L - O)
  double p_L = 0.5;   // 1 / P

  static SupportProbs from_counts(int K, int L, int O, int P) {
    if (K + L - O <= 0 || P <= 0) throw ConfigError("invalid support counts");
    SupportProbs pr;
    pr.p_T = static_cast<double>(K) / (K + L - O);
    pr.p_NL = static_cast<double>(L) / (K + L - O);
    pr.p_L = 1.0 / P;
    return pr;
  }
};

/// Unnormalized Ising log-probability; each undirected edge counted once per
/// endpoint with weight beta/2.
double ising_unnorm_logprob(const VecI& s_U, const MRFParams& mrf);

/// Log of the joint support prior p(s_L) p(s_U) p(s_T|s_U) p(s_NL|s_U) up to
/// the Ising normalization constant; -inf when the delta constraint is
/// violated.
double coupled_support_logprior(const SupportState& s, const SupportProbs& probs,
                                const MRFParams& mrf);

/// Truth-free nominal gain magnitude per block and grid, from the sensing
/// path-loss formulas at the grid centers and the communication distance law
/// (user taken at the center of soi_Ru).
std::array<VecR, kNumBlocks> nominal_gains(const SceneConfig& scene, const GridSpec& grids,
                                           int K, int L, double kappa, const CommPathLoss& pl = {});

/// Gamma hyperparameters with exponential shapes: active mean a/b = 1/G^2,
/// inactive mean a_bar/b_bar = inactive_mean.
GammaHyper hyperparams_from_nominal(const std::array<VecR, kNumBlocks>& gains,
                                    double inactive_mean = 1e4);

/// Generative draw from the support prior (Gibbs over the Ising union, then
/// the conditionals); used by prior-model tests only.
SupportState sample_support(const SupportProbs& probs, const MRFParams& mrf, int P, Rng& rng,
                            int gibbs_sweeps = 50);

/// Digamma function (asymptotic series with upward recurrence).
double digamma(double x);

}  // namespace jsce
