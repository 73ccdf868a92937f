#include "jsce/channel.hpp"

#include <cmath>

namespace jsce {

VecC steering(int n, double theta) {
  if (n < 1) throw ConfigError("steering: element count must be >= 1");
  VecC a(n);
  const double c = std::cos(theta);
  for (int i = 0; i < n; ++i) a(i) = std::polar(1.0, -kPi * i * c);
  return a;
}

VecC steering_deriv(int n, double theta) {
  VecC d(n);
  const double c = std::cos(theta), s = std::sin(theta);
  for (int i = 0; i < n; ++i) d(i) = cxd(0.0, kPi * i * s) * std::polar(1.0, -kPi * i * c);
  return d;
}

std::vector<Vec2> element_positions(const SceneConfig& scene, int Np) {
  const Vec2 dir(std::cos(scene.theta_I), std::sin(scene.theta_I));
  const double spacing = 0.5 * scene.lambda;
  std::vector<Vec2> pos(Np);
  for (int n = 0; n < Np; ++n) pos[n] = scene.p_I + (n - 0.5 * (Np - 1)) * spacing * dir;
  return pos;
}

VecC near_field_hci(const Vec2& p_c, const std::vector<Vec2>& elem_pos, double lambda) {
  VecC h(static_cast<Eigen::Index>(elem_pos.size()));
  for (size_t n = 0; n < elem_pos.size(); ++n) {
    const double d = (p_c - elem_pos[n]).norm();
    if (d < 1e-12) throw DomainError("near_field_hci: controller coincides with an element");
    h(static_cast<Eigen::Index>(n)) = (lambda / (4.0 * kPi * d)) * std::polar(1.0, -2.0 * kPi * d / lambda);
  }
  return h;
}

double path_loss(PathLossLink link, const SceneConfig& scene, const Vec2& target, double kappa) {
  if (kappa <= 0.0) throw DomainError("path_loss: RCS must be positive");
  const double dI = (scene.p_I - target).norm();
  const double dc = (scene.p_c - target).norm();
  const double dB = (scene.p_B - target).norm();
  if (dI < 1e-9 || dc < 1e-9 || dB < 1e-9) throw DomainError("path_loss: zero distance");
  const double num = scene.lambda * scene.lambda * kappa;
  const double den = 64.0 * kPi * kPi * kPi;
  switch (link) {
    case PathLossLink::IrsTargetSensor: return std::sqrt(num / (den * dI * dI * dI * dI));
    case PathLossLink::CtrlTargetSensor: return std::sqrt(num / (den * dc * dc * dI * dI));
    case PathLossLink::CtrlTargetBs: return std::sqrt(num / (den * dc * dc * dB * dB));
    case PathLossLink::IrsTargetBs: return std::sqrt(num / (den * dI * dI * dB * dB));
  }
  throw ConfigError("path_loss: unknown link");
}

namespace {

cxd los_gain(double lambda, double d) {
  return (lambda / (4.0 * kPi * d)) * std::polar(1.0, -2.0 * kPi * d / lambda);
}

}  // namespace

ChannelSet generate_channels(const SceneConfig& scene, const GroundTruth& truth,
                             const ArraySpec& arrays, Rng& rng,
                             const CommPathLoss& pl, bool freeze_beta) {
  arrays.validate();
  const int K = truth.K(), L = truth.L();
  auto beta = [&]() { return freeze_beta ? cxd(1.0, 0.0) : rng.cnormal(); };

  ChannelSet ch;
  ch.theta_IT.resize(K);
  ch.theta_BT.resize(K);
  ch.a_ITS.resize(K);
  ch.a_CTS.resize(K);
  ch.a_ITB.resize(K);
  ch.a_CTB.resize(K);
  for (int k = 0; k < K; ++k) {
    const Vec2& p = truth.targets[k];
    const double kap = truth.rcs.empty() ? 1.0 : truth.rcs[k];
    ch.theta_IT(k) = angle_to(scene.p_I, scene.theta_I, p, AngleConvention::IRS);
    ch.theta_BT(k) = angle_to(scene.p_B, scene.theta_B, p, AngleConvention::BS);
    ch.a_ITS(k) = beta() * path_loss(PathLossLink::IrsTargetSensor, scene, p, kap);
    ch.a_CTS(k) = beta() * path_loss(PathLossLink::CtrlTargetSensor, scene, p, kap);
    ch.a_ITB(k) = beta() * path_loss(PathLossLink::IrsTargetBs, scene, p, kap);
    ch.a_CTB(k) = beta() * path_loss(PathLossLink::CtrlTargetBs, scene, p, kap);
  }

  // communication paths; index 0 = user LoS, 1..L = scatterers
  ch.theta_IU.resize(L + 1);
  ch.theta_BU.resize(L + 1);
  ch.alpha_IU.resize(L + 1);
  ch.alpha_BU.resize(L + 1);
  ch.sv_norm = 1.0 / std::sqrt(static_cast<double>(L + 1));
  const double ref = scene.lambda / (4.0 * kPi);
  {
    ch.theta_IU(0) = angle_to(scene.p_I, scene.theta_I, truth.user, AngleConvention::IRS);
    ch.theta_BU(0) = angle_to(scene.p_B, scene.theta_B, truth.user, AngleConvention::BS);
    const double dIu = (scene.p_I - truth.user).norm();
    const double dBu = (scene.p_B - truth.user).norm();
    ch.alpha_IU(0) = beta() * ref * std::pow(dIu, -0.5 * pl.exp_los);
    ch.alpha_BU(0) = beta() * ref * std::pow(dBu, -0.5 * pl.exp_los);
  }
  for (int l = 1; l <= L; ++l) {
    const Vec2& ps = truth.scatterers[l - 1];
    ch.theta_IU(l) = angle_to(scene.p_I, scene.theta_I, ps, AngleConvention::IRS);
    ch.theta_BU(l) = angle_to(scene.p_B, scene.theta_B, ps, AngleConvention::BS);
    const double du = (truth.user - ps).norm();
    if (du < 1e-9) throw SceneError("scatterer coincides with the user");
    const double dI = du + (scene.p_I - ps).norm();
    const double dB = du + (scene.p_B - ps).norm();
    const double amp = std::sqrt(pl.nlos_extra) * ref;
    ch.alpha_IU(l) = beta() * amp * std::pow(dI, -0.5 * pl.exp_nlos);
    ch.alpha_BU(l) = beta() * amp * std::pow(dB, -0.5 * pl.exp_nlos);
  }

  ch.h_CI = near_field_hci(scene.p_c, element_positions(scene, arrays.Np), scene.lambda);

  // deterministic LoS infrastructure links
  {
    const double dIB = (scene.p_I - scene.p_B).norm();
    const double dcB = (scene.p_c - scene.p_B).norm();
    const double th_B_of_I = angle_to(scene.p_B, scene.theta_B, scene.p_I, AngleConvention::BS);
    const double th_I_of_B = angle_to(scene.p_I, scene.theta_I, scene.p_B, AngleConvention::IRS);
    ch.H_IB = los_gain(scene.lambda, dIB) * steering(arrays.M, th_B_of_I) *
              steering(arrays.Np, th_I_of_B).adjoint();
    const double th_B_of_c = angle_to(scene.p_B, scene.theta_B, scene.p_c, AngleConvention::BS);
    ch.h_CB = los_gain(scene.lambda, dcB) * steering(arrays.M, th_B_of_c);
  }

  // SV-form user channels; h_SU shares the h_IU path gains and AoAs
  ch.h_IU = VecC::Zero(arrays.Np);
  ch.h_BU = VecC::Zero(arrays.M);
  ch.h_SU = VecC::Zero(arrays.Ns);
  for (int l = 0; l <= L; ++l) {
    ch.h_IU += ch.sv_norm * ch.alpha_IU(l) * steering(arrays.Np, ch.theta_IU(l));
    ch.h_SU += ch.sv_norm * ch.alpha_IU(l) * steering(arrays.Ns, ch.theta_IU(l));
    ch.h_BU += ch.sv_norm * ch.alpha_BU(l) * steering(arrays.M, ch.theta_BU(l));
  }
  return ch;
}

MatC H_ITkS(const ChannelSet& ch, int k, const ArraySpec& arrays) {
  return ch.a_ITS(k) * steering(arrays.Ns, ch.theta_IT(k)) * steering(arrays.Np, ch.theta_IT(k)).adjoint();
}

MatC H_ITkB(const ChannelSet& ch, int k, const ArraySpec& arrays) {
  return ch.a_ITB(k) * steering(arrays.M, ch.theta_BT(k)) * steering(arrays.Np, ch.theta_IT(k)).adjoint();
}

}  // namespace jsce
