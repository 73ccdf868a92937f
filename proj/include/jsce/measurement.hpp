#pragma once

#include <array>

#include "jsce/channel.hpp"
#include "jsce/scene.hpp"

namespace jsce {

/// Sparse channel blocks in stacking order; first six have Q entries, the
/// last two have P entries.
enum Block : int { ITS = 0, CTS, ITB, CTB, BNL, INL, BL, IL, kNumBlocks };

/// Observation sections: sensor echoes, BS echoes, uplink pilots.
enum Section : int { SR = 0, BR, C, kNumSections };

inline constexpr std::array<int, kNumBlocks> kBlockSection = {SR, SR, BR, BR, C, C, C, C};
inline constexpr std::array<const char*, kNumBlocks> kBlockName = {"its", "cts", "itb", "ctb",
                                                                   "bnl", "inl", "bl",  "il"};

enum class Phase { I, II };

/// Unit-modulus IRS reflection vectors, one column per pilot.
struct ReflectionSchedule {
  MatC phi_r;  // Np x Ts (sensing pilots)
  MatC phi_c;  // Np x Tc (CE pilots)
  Phase phase = Phase::I;

  int Ts() const { return static_cast<int>(phi_r.cols()); }
  int Tc() const { return static_cast<int>(phi_c.cols()); }
};

/// T quadratic-phase sector beams whose main lobes partition [theta_lo,
/// theta_hi] in cos-angle space at codebook layer log2(T). T must be a power
/// of two.
MatC scanning_codebook(int Np, int T, double theta_lo, double theta_hi);

/// Steering dictionaries over the location grids at the given offsets,
/// together with the per-grid angles they were evaluated at.
struct SparseDictionaries {
  MatC As_r, AI_r, AB_r;  // Ns x Q, Np x Q, M x Q
  MatC As_z, AI_z, AB_z;  // Ns x P, Np x P, M x P
  VecR th_I_r, th_B_r;    // Q
  VecR th_I_z, th_B_z;    // P

  int Q() const { return static_cast<int>(As_r.cols()); }
  int P() const { return static_cast<int>(As_z.cols()); }
};

SparseDictionaries build_dictionaries(const SceneConfig& scene, const GridSpec& grids,
                                      const OffsetState& offsets, const ArraySpec& arrays);

/// Block measurement model y = F x + n with F = blkdiag(F_sr, F_Br, F_c).
/// Per-block factors are stored against their section's row space; optional
/// per-block scales fold column scaling into F (x_j is then x_phys / scale_j).
struct MeasurementModel {
  std::array<MatC, kNumBlocks> F;
  std::array<double, kNumBlocks> scale{1, 1, 1, 1, 1, 1, 1, 1};
  SparseDictionaries dicts;  // at the offsets this model was assembled with
  MatC phi_tilde;            // diag(h_CI) * phi_r (Np x Ts)
  MatC R;                    // stacked H_IB diag(phi_c(t)) (M*Tc x Np)
  int Q = 0, P = 0, Ns = 0, M = 0, Np = 0, Ts = 0, Tc = 0;

  int block_size(int b) const { return b < BL ? Q : P; }
  int section_rows(int s) const {
    switch (s) {
      case SR: return Ns * Ts;
      case BR: return M * Ts;
      default: return (Ns + M) * Tc;
    }
  }
  int total_rows() const { return section_rows(SR) + section_rows(BR) + section_rows(C); }
  int total_cols() const { return 6 * Q + 2 * P; }
  int col_offset(int b) const { return b < BL ? b * Q : 6 * Q + (b - BL) * P; }

  /// Full block-diagonal F, mostly for oracles and regression dumps.
  MatC dense() const;
};

MeasurementModel assemble_F(const SparseDictionaries& dicts, const ReflectionSchedule& sched,
                            const VecC& h_CI, const MatC& H_IB,
                            const std::array<double, kNumBlocks>& scale = {1, 1, 1, 1, 1, 1, 1, 1});

/// Stacked noisy observations for one schedule. y_c = [sensor pilots; BS pilots].
struct Observation {
  VecC y_sr, y_Br, y_c;
  Phase phase = Phase::I;

  const VecC& section(int s) const { return s == SR ? y_sr : (s == BR ? y_Br : y_c); }
  VecC& section(int s) { return s == SR ? y_sr : (s == BR ? y_Br : y_c); }
};

/// Per-symbol synthesis of the received pilots from the physical channels.
/// Pilot symbols are 1 scaled by the given transmit amplitudes; the known
/// IRS->BS feedthrough is added and then canceled at the BS. sigma2 = 0 gives
/// the noiseless mean.
Observation synthesize_observation(const ChannelSet& ch, const ReflectionSchedule& sched,
                                   const SceneConfig& scene, const ArraySpec& arrays, Rng& rng,
                                   double amp_ctrl = 1.0, double amp_user = 1.0,
                                   double sigma2_override = -1.0);

/// Ground-truth sparse coefficient vector in the 6Q+2P block layout.
VecC sparse_ground_truth(const ChannelSet& ch, const GridSpec& grids, const IndexMap& map);

/// Per-phase concatenation: schedules side by side, observations interleaved
/// so the result matches the stacked-schedule model's row order.
ReflectionSchedule stack_schedules(const ReflectionSchedule& s1, const ReflectionSchedule& s2);
Observation stack_observations(const Observation& o1, const Observation& o2, int Ns, int M);

}  // namespace jsce
