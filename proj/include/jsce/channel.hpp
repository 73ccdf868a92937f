#pragma once

#include <vector>

#include "jsce/rng.hpp"
#include "jsce/scene.hpp"
#include "jsce/types.hpp"

namespace jsce {

/// Half-wavelength ULA sizes: M BS antennas, Np reflecting elements, Ns sensors.
struct ArraySpec {
  int M = 32;
  int Np = 48;
  int Ns = 32;

  void validate() const {
    if (M < 1 || Np < 1 || Ns < 1) throw ConfigError("array sizes must be >= 1");
  }
};

enum class PathLossLink { IrsTargetSensor, CtrlTargetSensor, CtrlTargetBs, IrsTargetBs };

/// Large-scale model for the communication (SV) path gains. The paper defers
/// these constants to an external reference; defaults are ordinary 28 GHz
/// exponents and are config-level, not paper values.
struct CommPathLoss {
  double exp_los = 2.2;
  double exp_nlos = 2.8;
  double nlos_extra = 0.1;  // extra NLoS cluster loss (linear amplitude^2)
};

/// All physical channels of one realization. Communication path index 0 is
/// the user LoS path; 1..L are the scatterer paths (truth order).
struct ChannelSet {
  VecR theta_IT, theta_BT;          // per-target AoAs (K)
  VecC a_ITS, a_CTS, a_ITB, a_CTB;  // per-target complex path gains (K)

  VecR theta_IU, theta_BU;  // L+1 communication AoAs
  VecC alpha_IU, alpha_BU;  // L+1 communication path gains
  double sv_norm = 1.0;     // 1/sqrt(L+1)

  VecC h_CI;  // controller -> reflecting elements, near field (Np)
  MatC H_IB;  // IRS -> BS LoS (M x Np)
  VecC h_CB;  // controller -> BS LoS (M)

  VecC h_IU, h_BU, h_SU;  // materialized user channels (Np, M, Ns)

  int K() const { return static_cast<int>(theta_IT.size()); }
  int L() const { return static_cast<int>(theta_IU.size()) - 1; }
};

/// ULA response [1, e^{-j pi cos t}, ..., e^{-j pi (n-1) cos t}].
VecC steering(int n, double theta);

/// d/dtheta of steering: entry i is j*pi*i*sin(theta)*e^{-j pi i cos(theta)}.
VecC steering_deriv(int n, double theta);

/// Reflecting element positions: ULA centered on p_I along orientation
/// theta_I with lambda/2 spacing.
std::vector<Vec2> element_positions(const SceneConfig& scene, int Np);

/// Near-field controller->elements channel, |h_n| = lambda/(4 pi d_n).
VecC near_field_hci(const Vec2& p_c, const std::vector<Vec2>& elem_pos, double lambda);

/// Sensing large-scale amplitude G for the four echo links.
double path_loss(PathLossLink link, const SceneConfig& scene, const Vec2& target, double kappa);

/// Synthesizes every channel of the model. Small-scale gains are CN(0,1)
/// draws from rng; freeze_beta pins them to 1 for closed-form checks.
ChannelSet generate_channels(const SceneConfig& scene, const GroundTruth& truth,
                             const ArraySpec& arrays, Rng& rng,
                             const CommPathLoss& pl = {}, bool freeze_beta = false);

/// Rank-1 per-target echo matrices (materialized on demand).
MatC H_ITkS(const ChannelSet& ch, int k, const ArraySpec& arrays);
MatC H_ITkB(const ChannelSet& ch, int k, const ArraySpec& arrays);

}  // namespace jsce
