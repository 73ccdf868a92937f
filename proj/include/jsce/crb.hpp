#pragma once

#include <vector>

#include "jsce/estep.hpp"
#include "jsce/measurement.hpp"

namespace jsce {

/// One detected physical object with its estimated path gains. Sensing gains
/// are used when the object acts as a target, comm gains when it acts as a
/// scatterer (the user carries comm gains only).
struct DetectedObject {
  Vec2 pos{0.0, 0.0};
  cxd g_its{0.0, 0.0}, g_cts{0.0, 0.0}, g_itb{0.0, 0.0}, g_ctb{0.0, 0.0};
  cxd g_bs{0.0, 0.0}, g_irs{0.0, 0.0};
};

/// Estimated scene partitioned into the four parameter classes of the
/// position vector [pure targets; overlaps; pure scatterers; user].
struct DetectedScene {
  std::vector<DetectedObject> pure_targets;
  std::vector<DetectedObject> overlaps;
  std::vector<DetectedObject> pure_scatterers;
  DetectedObject user;

  int n_params() const {
    return 2 * static_cast<int>(pure_targets.size() + overlaps.size() + pure_scatterers.size() + 1);
  }
};

/// Everything the FIM needs: the estimated scene, geometry, static channels
/// and both phases' reflection schedules at the effective noise power.
struct FimInput {
  DetectedScene det;
  SceneConfig scene;
  ArraySpec arrays;
  VecC h_CI;
  MatC H_IB;
  MatC phi_r_I, phi_c_I;    // phase-I schedules (fixed)
  MatC phi_r_II, phi_c_II;  // phase-II schedules
  double sigma2 = 1.0;
};

/// Position FIM over both phases with the printed block-sparsity pattern
/// (cross blocks between sensing-only, comm-only and user classes zeroed).
MatR fim(const FimInput& in);

/// tr(J^-1); adds a small trace jitter when singular and reports +inf for
/// degenerate geometry.
double crb_trace(const MatR& J);

/// Quadratic form of one diagonal FIM entry in the vectorized phase-II
/// schedules: J_nn = (2/sigma2) (phi_r^T A_r phi_r^* + 2 Re{phi_r^T b_r}
///                              + phi_c^T A_c phi_c^* + 2 Re{phi_c^T b_c}) + C.
struct QuadCoeff {
  MatC A_r, A_c;  // Np*T3 and Np*T4 block-diagonal Hermitian (empty if unused)
  VecC b_r, b_c;
  double C = 0.0;
};

struct FimCoeffs {
  std::vector<QuadCoeff> per_param;
  double sigma2 = 1.0;
  int Np = 0, T3 = 0, T4 = 0;

  int dim() const { return Np * (T3 + T4); }
};

/// Coefficients making each diagonal FIM entry an explicit function of the
/// phase-II schedules; phase-I contributions fold into the constants.
FimCoeffs approx_fim_coeffs(const FimInput& in, int T3, int T4);

/// Diagonal entry evaluated from the coefficients at a given phase-II point.
double eval_diag(const QuadCoeff& qc, const VecC& phi_r, const VecC& phi_c, double sigma2);

/// Classifies grids from the support posteriors (threshold 0.5, energy
/// fallback to the expected counts) and reads the detected objects' refined
/// positions and unscaled gains out of the posterior.
DetectedScene detect_scene(const PosteriorState& st, const MeasurementModel& m,
                           const GridSpec& grids, const OffsetState& offsets, int K, int L);

/// Ground-truth scene for the genie-aided variant.
DetectedScene genie_scene(const GroundTruth& truth, const ChannelSet& ch);

}  // namespace jsce
