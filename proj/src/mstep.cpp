#include "jsce/mstep.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace jsce {

namespace {

const std::array<std::vector<int>, kNumSections> kSectionBlocks = {
    std::vector<int>{ITS, CTS}, std::vector<int>{ITB, CTB}, std::vector<int>{BNL, INL, BL, IL}};

bool empty_sigma(const MatC& S) { return S.size() == 0; }

}  // namespace

double surrogate_core(const MeasurementModel& m, const PosteriorState& st, const Observation& y,
                      double sigma2) {
  double acc = 0.0;
  for (int s = 0; s < kNumSections; ++s) {
    VecC resid = y.section(s);
    for (int b : kSectionBlocks[s]) resid -= m.F[b] * st.mu[b];
    acc += resid.squaredNorm();
    for (int b : kSectionBlocks[s]) {
      if (empty_sigma(st.Sigma[b])) continue;
      acc += (m.F[b] * st.Sigma[b]).cwiseProduct(m.F[b].conjugate()).sum().real();
    }
  }
  return -acc / sigma2;
}

double surrogate_Q(const OffsetState& offsets, const PosteriorState& st, const Observation& y,
                   const ModelBuilder& builder, double sigma2) {
  return surrogate_core(builder(offsets), st, y, sigma2);
}

namespace {

struct SectionWork {
  VecC resid;  // y - F mu
};

// accumulates Re{w^H dF_col} with w = conj(mu_q) r - F Sigma.col(q)
struct ColumnSensitivity {
  VecC w;
  explicit ColumnSensitivity(const MeasurementModel& m, const PosteriorState& st,
                             const SectionWork& sec, int b, int q) {
    w = std::conj(st.mu[b](q)) * sec.resid;
    if (!empty_sigma(st.Sigma[b])) w.noalias() -= m.F[b] * st.Sigma[b].col(q);
  }
  double dot(const VecC& dcol) const { return (w.dot(dcol)).real(); }
};

VecC tile(const VecC& v, int T) {
  VecC out(v.size() * T);
  for (int t = 0; t < T; ++t) out.segment(t * v.size(), v.size()) = v;
  return out;
}

VecC kron_schedule(const VecC& proj_weights, const VecC& a) {
  // proj_weights: one scalar per pilot; rows grouped pilot-major
  VecC out(proj_weights.size() * a.size());
  for (int t = 0; t < proj_weights.size(); ++t)
    out.segment(t * a.size(), a.size()) = proj_weights(t) * a;
  return out;
}

}  // namespace

SurrogateGradients gradients(const MeasurementModel& m, const PosteriorState& st,
                             const Observation& y, const SceneConfig& scene, const GridSpec& grids,
                             const OffsetState& offsets, double sigma2,
                             const std::vector<int>& candidates_r) {
  SurrogateGradients g;
  g.g_bs_r = MatR::Zero(m.Q, 2);
  g.g_irs_r = MatR::Zero(m.Q, 2);
  g.g_bs_z = MatR::Zero(m.P, 2);
  g.g_irs_z = MatR::Zero(m.P, 2);

  std::array<SectionWork, kNumSections> sec;
  for (int s = 0; s < kNumSections; ++s) {
    sec[s].resid = y.section(s);
    for (int b : kSectionBlocks[s]) sec[s].resid -= m.F[b] * st.mu[b];
  }
  const int topC = m.Ns * m.Tc;
  const double pref = 2.0 / sigma2;
  const auto& d = m.dicts;

  // d(theta)/d(offset) chain factors for a point p seen from an anchor
  auto chain = [](const Vec2& p, const Vec2& anchor) {
    const Vec2 dv = p - anchor;
    const double d2 = dv.squaredNorm();
    return Vec2(-dv.y() / d2, dv.x() / d2);
  };

  for (int q : candidates_r) {
    const Vec2 pos = grids.r.pts[q] + offsets.dr.row(q).transpose();
    const VecC aI = d.AI_r.col(q), as = d.As_r.col(q), aB = d.AB_r.col(q);
    const VecC daI = steering_deriv(m.Np, d.th_I_r(q));
    const VecC das = steering_deriv(m.Ns, d.th_I_r(q));
    const VecC daB = steering_deriv(m.M, d.th_B_r(q));
    const VecC proj = m.phi_tilde.transpose() * aI.conjugate();    // Ts
    const VecC dproj = m.phi_tilde.transpose() * daI.conjugate();  // Ts

    // IRS-side angle: blocks ITS, CTS, ITB (a_I factor), INL
    double dQ_I = 0.0;
    {
      ColumnSensitivity its(m, st, sec[SR], ITS, q);
      dQ_I += m.scale[ITS] * (its.dot(kron_schedule(dproj, as)) + its.dot(kron_schedule(proj, das)));
      ColumnSensitivity cts(m, st, sec[SR], CTS, q);
      dQ_I += m.scale[CTS] * cts.dot(tile(das, m.Ts));
      ColumnSensitivity itb(m, st, sec[BR], ITB, q);
      dQ_I += m.scale[ITB] * itb.dot(kron_schedule(dproj, aB));
      ColumnSensitivity inl(m, st, sec[C], INL, q);
      VecC dcol(m.section_rows(C));
      dcol.head(topC) = tile(das, m.Tc);
      dcol.tail(m.M * m.Tc).noalias() = m.R * daI;
      dQ_I += m.scale[INL] * inl.dot(dcol);
    }
    // BS-side angle: blocks ITB (a_B factor), CTB, BNL
    double dQ_B = 0.0;
    {
      ColumnSensitivity itb(m, st, sec[BR], ITB, q);
      dQ_B += m.scale[ITB] * itb.dot(kron_schedule(proj, daB));
      ColumnSensitivity ctb(m, st, sec[BR], CTB, q);
      dQ_B += m.scale[CTB] * ctb.dot(tile(daB, m.Ts));
      ColumnSensitivity bnl(m, st, sec[C], BNL, q);
      VecC dcol = VecC::Zero(m.section_rows(C));
      dcol.tail(m.M * m.Tc) = tile(daB, m.Tc);
      dQ_B += m.scale[BNL] * bnl.dot(dcol);
    }
    g.g_irs_r.row(q) = pref * dQ_I * chain(pos, scene.p_I).transpose();
    g.g_bs_r.row(q) = pref * dQ_B * chain(pos, scene.p_B).transpose();
  }

  // z grids: IL carries the IRS-side angle, BL the BS-side angle
  for (int p = 0; p < m.P; ++p) {
    const Vec2 pos = grids.z.pts[p] + offsets.dz.row(p).transpose();
    const VecC das = steering_deriv(m.Ns, d.th_I_z(p));
    const VecC daI = steering_deriv(m.Np, d.th_I_z(p));
    const VecC daB = steering_deriv(m.M, d.th_B_z(p));
    {
      ColumnSensitivity il(m, st, sec[C], IL, p);
      VecC dcol(m.section_rows(C));
      dcol.head(topC) = tile(das, m.Tc);
      dcol.tail(m.M * m.Tc).noalias() = m.R * daI;
      g.g_irs_z.row(p) =
          pref * m.scale[IL] * il.dot(dcol) * chain(pos, scene.p_I).transpose();
    }
    {
      ColumnSensitivity bl(m, st, sec[C], BL, p);
      VecC dcol = VecC::Zero(m.section_rows(C));
      dcol.tail(m.M * m.Tc) = tile(daB, m.Tc);
      g.g_bs_z.row(p) =
          pref * m.scale[BL] * bl.dot(dcol) * chain(pos, scene.p_B).transpose();
    }
  }
  return g;
}

namespace {

double clamp_abs(double v, double lim) { return std::max(-lim, std::min(lim, v)); }

void apply_direction(MatR& off, int row, const Vec2& dir, double step, double lim_x, double lim_y) {
  off(row, 0) = clamp_abs(off(row, 0) + step * dir.x(), lim_x);
  off(row, 1) = clamp_abs(off(row, 1) + step * dir.y(), lim_y);
}

Vec2 ddg_direction(const Vec2& g_bs, const Vec2& g_irs) {
  Vec2 dir(0.0, 0.0);
  for (int ax = 0; ax < 2; ++ax) {
    if (g_bs(ax) * g_irs(ax) <= 0.0) continue;
    dir(ax) = g_bs(ax) > 0.0 ? 1.0 : -1.0;
  }
  return dir;
}

Vec2 ga_direction(const Vec2& g_bs, const Vec2& g_irs) {
  const Vec2 g = g_bs + g_irs;
  const double n = g.norm();
  return n > 0.0 ? Vec2(g / n) : Vec2(0.0, 0.0);
}

}  // namespace

OffsetState ddg_update(const OffsetState& offsets, const SurrogateGradients& g,
                       const GridSpec& grids, double step_r, double step_z,
                       const std::vector<int>& candidates_r) {
  OffsetState out = offsets;
  for (int q : candidates_r)
    apply_direction(out.dr, q, ddg_direction(g.g_bs_r.row(q), g.g_irs_r.row(q)), step_r,
                    0.5 * grids.r.dx, 0.5 * grids.r.dy);
  for (int p = 0; p < out.dz.rows(); ++p)
    apply_direction(out.dz, p, ddg_direction(g.g_bs_z.row(p), g.g_irs_z.row(p)), step_z,
                    0.5 * grids.z.dx, 0.5 * grids.z.dy);
  return out;
}

OffsetState gradient_ascent_update(const OffsetState& offsets, const SurrogateGradients& g,
                                   const GridSpec& grids, double step_r, double step_z,
                                   const std::vector<int>& candidates_r) {
  OffsetState out = offsets;
  for (int q : candidates_r)
    apply_direction(out.dr, q, ga_direction(g.g_bs_r.row(q), g.g_irs_r.row(q)), step_r,
                    0.5 * grids.r.dx, 0.5 * grids.r.dy);
  for (int p = 0; p < out.dz.rows(); ++p)
    apply_direction(out.dz, p, ga_direction(g.g_bs_z.row(p), g.g_irs_z.row(p)), step_z,
                    0.5 * grids.z.dx, 0.5 * grids.z.dy);
  return out;
}

std::vector<int> select_candidates(const PosteriorState& st, int topk, double prob_threshold) {
  const int Q = static_cast<int>(st.pit_T.size());
  std::vector<int> out;
  VecR energy = VecR::Zero(Q);
  for (int b = ITS; b <= INL; ++b)
    if (st.mu[b].size() == Q) energy += st.mu[b].cwiseAbs2().real();
  for (int q = 0; q < Q; ++q)
    if (std::max(st.pit_T(q), st.pit_NL(q)) > prob_threshold) out.push_back(q);

  std::vector<int> order(Q);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return energy(a) > energy(b); });
  for (int i = 0; i < std::min(topk, Q); ++i)
    if (std::find(out.begin(), out.end(), order[i]) == out.end()) out.push_back(order[i]);
  std::sort(out.begin(), out.end());
  return out;
}

ASTVBIResult run_as_tvbi(const Observation& y, const ModelBuilder& builder, const EStepFn& estep,
                         const SceneConfig& scene, const GridSpec& grids, double sigma2,
                         const MStepConfig& cfg) {
  ASTVBIResult res;
  res.offsets = OffsetState::zeros(grids.r.size(), grids.z.size());
  double step_r = cfg.step_init_frac * std::min(grids.r.dx, grids.r.dy);
  double step_z = cfg.step_init_frac * std::min(grids.z.dx, grids.z.dy);
  const double floor_r = cfg.step_floor_frac * std::min(grids.r.dx, grids.r.dy);
  const double floor_z = cfg.step_floor_frac * std::min(grids.z.dx, grids.z.dy);

  std::array<VecC, kNumBlocks> mu_prev;
  bool have_prev = false;
  double current_Q = 0.0;

  for (int n = 1; n <= cfg.N_out; ++n) {
    MeasurementModel model = builder(res.offsets);
    res.posterior = estep(y, model);
    res.iterations = n;

    double mu_change = 0.0, mu_norm = 0.0;
    for (int b = 0; b < kNumBlocks; ++b) {
      mu_norm += res.posterior.mu[b].norm();
      if (have_prev) mu_change += (res.posterior.mu[b] - mu_prev[b]).norm();
    }
    mu_prev = res.posterior.mu;

    current_Q = surrogate_core(model, res.posterior, y, sigma2);
    res.trace.push_back({n, current_Q, have_prev ? mu_change : 0.0, step_r});
    if (have_prev && mu_change < cfg.eps_out * std::max(mu_norm, 1e-300)) break;
    have_prev = true;

    const auto cands = select_candidates(res.posterior, cfg.cand_topk, cfg.cand_threshold);
    const SurrogateGradients g =
        gradients(model, res.posterior, y, scene, grids, res.offsets, sigma2, cands);
    const OffsetState proposal =
        cfg.rule == MStepRule::DDG
            ? ddg_update(res.offsets, g, grids, step_r, step_z, cands)
            : gradient_ascent_update(res.offsets, g, grids, step_r, step_z, cands);
    const double Q_new = surrogate_Q(proposal, res.posterior, y, builder, sigma2);
    if (Q_new < current_Q) {
      // shrink-on-decrease: roll the move back and halve the steps
      step_r = std::max(floor_r, cfg.shrink * step_r);
      step_z = std::max(floor_z, cfg.shrink * step_z);
    } else {
      res.offsets = proposal;
      current_Q = Q_new;
    }
  }
  res.final_surrogate = current_Q;
  return res;
}

}  // namespace jsce
