#include "jsce/priors.hpp"

#include <cmath>
#include <limits>

namespace jsce {

namespace {

// neighbor indices of q on the column-major lattice, or -1
inline int left_of(int q, const MRFParams& m) { return q >= m.ny ? q - m.ny : -1; }
inline int right_of(int q, const MRFParams& m) { return q + m.ny < m.size() ? q + m.ny : -1; }
inline int top_of(int q, const MRFParams& m) { return q % m.ny != 0 ? q - 1 : -1; }
inline int bottom_of(int q, const MRFParams& m) { return (q + 1) % m.ny != 0 ? q + 1 : -1; }

}  // namespace

double ising_unnorm_logprob(const VecI& s_U, const MRFParams& mrf) {
  if (s_U.size() != mrf.size()) throw ConfigError("ising: lattice size mismatch");
  double lp = 0.0;
  for (int q = 0; q < s_U.size(); ++q) {
    lp += -mrf.alpha * s_U(q);
    for (int nb : {left_of(q, mrf), right_of(q, mrf), top_of(q, mrf), bottom_of(q, mrf)})
      if (nb >= 0) lp += 0.5 * mrf.beta * s_U(q) * s_U(nb);
  }
  return lp;
}

double coupled_support_logprior(const SupportState& s, const SupportProbs& probs,
                                const MRFParams& mrf) {
  const double neg_inf = -std::numeric_limits<double>::infinity();
  double lp = ising_unnorm_logprob(s.s_U, mrf);
  for (int q = 0; q < s.s_U.size(); ++q) {
    if (s.s_U(q) == -1) {
      if (s.s_T(q) == 1 || s.s_NL(q) == 1) return neg_inf;
    } else {
      lp += s.s_T(q) == 1 ? std::log(probs.p_T) : std::log1p(-probs.p_T);
      lp += s.s_NL(q) == 1 ? std::log(probs.p_NL) : std::log1p(-probs.p_NL);
    }
  }
  for (int p = 0; p < s.s_L.size(); ++p)
    lp += s.s_L(p) == 1 ? std::log(probs.p_L) : std::log1p(-probs.p_L);
  return lp;
}

std::array<VecR, kNumBlocks> nominal_gains(const SceneConfig& scene, const GridSpec& grids,
                                           int K, int L, double kappa, const CommPathLoss& pl) {
  (void)K;
  const int Q = grids.r.size(), P = grids.z.size();
  std::array<VecR, kNumBlocks> g;
  for (int b = 0; b < kNumBlocks; ++b) g[b].resize(b < BL ? Q : P);

  for (int q = 0; q < Q; ++q) {
    const Vec2& p = grids.r.pts[q];
    g[ITS](q) = path_loss(PathLossLink::IrsTargetSensor, scene, p, kappa);
    g[CTS](q) = path_loss(PathLossLink::CtrlTargetSensor, scene, p, kappa);
    g[ITB](q) = path_loss(PathLossLink::IrsTargetBs, scene, p, kappa);
    g[CTB](q) = path_loss(PathLossLink::CtrlTargetBs, scene, p, kappa);
  }

  const double sv = 1.0 / std::sqrt(static_cast<double>(L + 1));
  const double ref = scene.lambda / (4.0 * kPi);
  const Vec2 u_nom = scene.soi_Ru.center;
  for (int q = 0; q < Q; ++q) {
    const Vec2& ps = grids.r.pts[q];
    const double du = (u_nom - ps).norm();
    const double amp = std::sqrt(pl.nlos_extra) * ref;
    g[BNL](q) = sv * amp * std::pow(du + (scene.p_B - ps).norm(), -0.5 * pl.exp_nlos);
    g[INL](q) = sv * amp * std::pow(du + (scene.p_I - ps).norm(), -0.5 * pl.exp_nlos);
  }
  for (int p = 0; p < P; ++p) {
    const Vec2& pz = grids.z.pts[p];
    g[BL](p) = sv * ref * std::pow((scene.p_B - pz).norm(), -0.5 * pl.exp_los);
    g[IL](p) = sv * ref * std::pow((scene.p_I - pz).norm(), -0.5 * pl.exp_los);
  }
  return g;
}

GammaHyper hyperparams_from_nominal(const std::array<VecR, kNumBlocks>& gains,
                                    double inactive_mean) {
  GammaHyper h;
  for (int b = 0; b < kNumBlocks; ++b) {
    const auto& g = gains[b];
    h.a[b] = VecR::Ones(g.size());
    h.b[b] = g.array().square();
    h.a_bar[b] = VecR::Ones(g.size());
    h.b_bar[b] = VecR::Constant(g.size(), 1.0 / inactive_mean);
  }
  return h;
}

SupportState sample_support(const SupportProbs& probs, const MRFParams& mrf, int P, Rng& rng,
                            int gibbs_sweeps) {
  const int Q = mrf.size();
  SupportState s;
  s.s_U.resize(Q);
  for (int q = 0; q < Q; ++q) s.s_U(q) = rng.uniform() < 0.5 ? 1 : -1;
  for (int sweep = 0; sweep < gibbs_sweeps; ++sweep) {
    for (int q = 0; q < Q; ++q) {
      double nb_sum = 0.0;
      for (int nb : {left_of(q, mrf), right_of(q, mrf), top_of(q, mrf), bottom_of(q, mrf)})
        if (nb >= 0) nb_sum += s.s_U(nb);
      const double logit = -2.0 * mrf.alpha + 2.0 * mrf.beta * nb_sum;
      s.s_U(q) = rng.uniform() < 1.0 / (1.0 + std::exp(-logit)) ? 1 : -1;
    }
  }
  s.s_T.resize(Q);
  s.s_NL.resize(Q);
  for (int q = 0; q < Q; ++q) {
    if (s.s_U(q) == -1) {
      s.s_T(q) = -1;
      s.s_NL(q) = -1;
    } else {
      s.s_T(q) = rng.uniform() < probs.p_T ? 1 : -1;
      s.s_NL(q) = rng.uniform() < probs.p_NL ? 1 : -1;
    }
  }
  s.s_L.resize(P);
  for (int p = 0; p < P; ++p) s.s_L(p) = rng.uniform() < probs.p_L ? 1 : -1;
  return s;
}

double digamma(double x) {
  if (x <= 0.0 && x == std::floor(x)) throw DomainError("digamma: non-positive integer");
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x, inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
  return result;
}

}  // namespace jsce
