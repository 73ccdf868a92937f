#include "jsce/measurement.hpp"

#include <cmath>

namespace jsce {

MatC scanning_codebook(int Np, int T, double theta_lo, double theta_hi) {
  if (Np < 1) throw ConfigError("scanning_codebook: Np must be >= 1");
  if (T < 1 || (T & (T - 1)) != 0) throw ConfigError("scanning_codebook: T must be a power of 2");
  const double u1 = std::min(std::cos(theta_lo), std::cos(theta_hi));
  const double u2 = std::max(std::cos(theta_lo), std::cos(theta_hi));
  const double width = (u2 - u1) / T;
  MatC W(Np, T);
  for (int t = 0; t < T; ++t) {
    const double u_start = u1 + t * width;
    // quadratic phase sweeps the instantaneous spatial frequency across the
    // sector [u_start, u_start + width]
    const double chirp = Np > 1 ? width / (Np - 1) : 0.0;
    for (int n = 0; n < Np; ++n)
      W(n, t) = std::polar(1.0, -kPi * (u_start * n + 0.5 * chirp * n * n));
  }
  return W;
}

SparseDictionaries build_dictionaries(const SceneConfig& scene, const GridSpec& grids,
                                      const OffsetState& offsets, const ArraySpec& arrays) {
  const int Q = grids.r.size(), P = grids.z.size();
  SparseDictionaries d;
  d.As_r.resize(arrays.Ns, Q);
  d.AI_r.resize(arrays.Np, Q);
  d.AB_r.resize(arrays.M, Q);
  d.th_I_r.resize(Q);
  d.th_B_r.resize(Q);
  for (int q = 0; q < Q; ++q) {
    const Vec2 p = grids.r.pts[q] + offsets.dr.row(q).transpose();
    d.th_I_r(q) = angle_to(scene.p_I, scene.theta_I, p, AngleConvention::IRS);
    d.th_B_r(q) = angle_to(scene.p_B, scene.theta_B, p, AngleConvention::BS);
    d.As_r.col(q) = steering(arrays.Ns, d.th_I_r(q));
    d.AI_r.col(q) = steering(arrays.Np, d.th_I_r(q));
    d.AB_r.col(q) = steering(arrays.M, d.th_B_r(q));
  }
  d.As_z.resize(arrays.Ns, P);
  d.AI_z.resize(arrays.Np, P);
  d.AB_z.resize(arrays.M, P);
  d.th_I_z.resize(P);
  d.th_B_z.resize(P);
  for (int p = 0; p < P; ++p) {
    const Vec2 pp = grids.z.pts[p] + offsets.dz.row(p).transpose();
    d.th_I_z(p) = angle_to(scene.p_I, scene.theta_I, pp, AngleConvention::IRS);
    d.th_B_z(p) = angle_to(scene.p_B, scene.theta_B, pp, AngleConvention::BS);
    d.As_z.col(p) = steering(arrays.Ns, d.th_I_z(p));
    d.AI_z.col(p) = steering(arrays.Np, d.th_I_z(p));
    d.AB_z.col(p) = steering(arrays.M, d.th_B_z(p));
  }
  return d;
}

namespace {

// column q of the stacked reflected-path block: kron(proj_col, a_col) with
// pilot-major row blocks
void set_kron_col(MatC& F, int q, const VecC& proj_col, const VecC& a_col) {
  const int n = static_cast<int>(a_col.size());
  for (int t = 0; t < proj_col.size(); ++t) F.block(t * n, q, n, 1) = proj_col(t) * a_col;
}

MatC replicate_rows(const MatC& A, int T) {
  MatC out(A.rows() * T, A.cols());
  for (int t = 0; t < T; ++t) out.middleRows(t * A.rows(), A.rows()) = A;
  return out;
}

}  // namespace

MeasurementModel assemble_F(const SparseDictionaries& dicts, const ReflectionSchedule& sched,
                            const VecC& h_CI, const MatC& H_IB,
                            const std::array<double, kNumBlocks>& scale) {
  MeasurementModel m;
  m.dicts = dicts;
  m.scale = scale;
  m.Q = dicts.Q();
  m.P = dicts.P();
  m.Ns = static_cast<int>(dicts.As_r.rows());
  m.Np = static_cast<int>(dicts.AI_r.rows());
  m.M = static_cast<int>(dicts.AB_r.rows());
  m.Ts = sched.Ts();
  m.Tc = sched.Tc();
  if (sched.phi_r.rows() != m.Np || sched.phi_c.rows() != m.Np)
    throw ConfigError("assemble_F: schedule row count does not match Np");
  if (h_CI.size() != m.Np || H_IB.rows() != m.M || H_IB.cols() != m.Np)
    throw ConfigError("assemble_F: channel dimensions do not match dictionaries");

  m.phi_tilde = h_CI.asDiagonal() * sched.phi_r;

  // proj(t, q) = phi_tilde(:,t)^T conj(a_I(theta_q))
  const MatC proj_r = m.phi_tilde.transpose() * dicts.AI_r.conjugate();

  m.F[ITS].setZero(m.Ns * m.Ts, m.Q);
  m.F[ITB].setZero(m.M * m.Ts, m.Q);
  for (int q = 0; q < m.Q; ++q) {
    set_kron_col(m.F[ITS], q, proj_r.col(q), dicts.As_r.col(q));
    set_kron_col(m.F[ITB], q, proj_r.col(q), dicts.AB_r.col(q));
  }
  m.F[CTS] = replicate_rows(dicts.As_r, m.Ts);
  m.F[CTB] = replicate_rows(dicts.AB_r, m.Ts);

  // R(t) = H_IB diag(phi_c(t)), stacked over pilots
  m.R.resize(m.M * m.Tc, m.Np);
  for (int t = 0; t < m.Tc; ++t)
    m.R.middleRows(t * m.M, m.M) =
        H_IB.array().rowwise() * sched.phi_c.col(t).transpose().array();

  const int topC = m.Ns * m.Tc, botC = m.M * m.Tc;
  auto comm_block = [&](const MatC& top, const MatC& bot) {
    MatC F(topC + botC, top.cols());
    F.topRows(topC) = top;
    F.bottomRows(botC) = bot;
    return F;
  };
  m.F[BNL] = comm_block(MatC::Zero(topC, m.Q), replicate_rows(dicts.AB_r, m.Tc));
  m.F[INL] = comm_block(replicate_rows(dicts.As_r, m.Tc), m.R * dicts.AI_r);
  m.F[BL] = comm_block(MatC::Zero(topC, m.P), replicate_rows(dicts.AB_z, m.Tc));
  m.F[IL] = comm_block(replicate_rows(dicts.As_z, m.Tc), m.R * dicts.AI_z);

  for (int b = 0; b < kNumBlocks; ++b)
    if (scale[b] != 1.0) m.F[b] *= scale[b];
  return m;
}

MatC MeasurementModel::dense() const {
  MatC Fd = MatC::Zero(total_rows(), total_cols());
  const std::array<int, kNumSections> row0 = {0, section_rows(SR), section_rows(SR) + section_rows(BR)};
  for (int b = 0; b < kNumBlocks; ++b)
    Fd.block(row0[kBlockSection[b]], col_offset(b), F[b].rows(), F[b].cols()) = F[b];
  return Fd;
}

Observation synthesize_observation(const ChannelSet& ch, const ReflectionSchedule& sched,
                                   const SceneConfig& scene, const ArraySpec& arrays, Rng& rng,
                                   double amp_ctrl, double amp_user, double sigma2_override) {
  const int K = ch.K();
  const double sigma2 = sigma2_override >= 0.0 ? sigma2_override : scene.sigma2;
  const double ns = std::sqrt(sigma2);
  auto noise = [&](int n) {
    VecC v(n);
    for (int i = 0; i < n; ++i) v(i) = ns * rng.cnormal();
    return v;
  };

  Observation obs;
  obs.phase = sched.phase;
  const int Ts = sched.Ts(), Tc = sched.Tc();
  obs.y_sr.resize(arrays.Ns * Ts);
  obs.y_Br.resize(arrays.M * Ts);
  obs.y_c.resize((arrays.Ns + arrays.M) * Tc);

  std::vector<VecC> as(K), aB(K), aI(K);
  for (int k = 0; k < K; ++k) {
    as[k] = steering(arrays.Ns, ch.theta_IT(k));
    aB[k] = steering(arrays.M, ch.theta_BT(k));
    aI[k] = steering(arrays.Np, ch.theta_IT(k));
  }

  for (int t = 0; t < Ts; ++t) {
    const VecC illum = ch.h_CI.cwiseProduct(sched.phi_r.col(t));  // Theta_r(t) h_CI
    VecC ys = VecC::Zero(arrays.Ns), yB = VecC::Zero(arrays.M);
    for (int k = 0; k < K; ++k) {
      const cxd refl = aI[k].dot(illum);  // a_I^H Theta h_CI
      ys += (ch.a_ITS(k) * refl) * as[k] + ch.a_CTS(k) * as[k];
      yB += (ch.a_ITB(k) * refl) * aB[k] + ch.a_CTB(k) * aB[k];
    }
    // BS feedthrough is known and canceled after reception
    const VecC feed = ch.H_IB * illum + ch.h_CB;
    yB += feed;
    yB -= feed;
    obs.y_sr.segment(t * arrays.Ns, arrays.Ns) = amp_ctrl * ys + noise(arrays.Ns);
    obs.y_Br.segment(t * arrays.M, arrays.M) = amp_ctrl * yB + noise(arrays.M);
  }
  for (int t = 0; t < Tc; ++t)
    obs.y_c.segment(t * arrays.Ns, arrays.Ns) = amp_user * ch.h_SU + noise(arrays.Ns);
  const int topC = arrays.Ns * Tc;
  for (int t = 0; t < Tc; ++t) {
    const VecC yB = ch.h_BU + ch.H_IB * sched.phi_c.col(t).cwiseProduct(ch.h_IU);
    obs.y_c.segment(topC + t * arrays.M, arrays.M) = amp_user * yB + noise(arrays.M);
  }
  return obs;
}

VecC sparse_ground_truth(const ChannelSet& ch, const GridSpec& grids, const IndexMap& map) {
  const int Q = grids.r.size(), P = grids.z.size();
  VecC x = VecC::Zero(6 * Q + 2 * P);
  for (int k = 0; k < ch.K(); ++k) {
    const int q = map.q_T[k];
    x(ITS * Q + q) += ch.a_ITS(k);
    x(CTS * Q + q) += ch.a_CTS(k);
    x(ITB * Q + q) += ch.a_ITB(k);
    x(CTB * Q + q) += ch.a_CTB(k);
  }
  for (int l = 0; l < ch.L(); ++l) {
    const int q = map.q_S[l];
    x(BNL * Q + q) += ch.sv_norm * ch.alpha_BU(l + 1);
    x(INL * Q + q) += ch.sv_norm * ch.alpha_IU(l + 1);
  }
  x(6 * Q + map.p_u) = ch.sv_norm * ch.alpha_BU(0);       // BL
  x(6 * Q + P + map.p_u) = ch.sv_norm * ch.alpha_IU(0);   // IL
  return x;
}

ReflectionSchedule stack_schedules(const ReflectionSchedule& s1, const ReflectionSchedule& s2) {
  ReflectionSchedule s;
  s.phase = Phase::II;
  s.phi_r.resize(s1.phi_r.rows(), s1.Ts() + s2.Ts());
  s.phi_r << s1.phi_r, s2.phi_r;
  s.phi_c.resize(s1.phi_c.rows(), s1.Tc() + s2.Tc());
  s.phi_c << s1.phi_c, s2.phi_c;
  return s;
}

Observation stack_observations(const Observation& o1, const Observation& o2, int Ns, int M) {
  Observation o;
  o.phase = Phase::II;
  o.y_sr.resize(o1.y_sr.size() + o2.y_sr.size());
  o.y_sr << o1.y_sr, o2.y_sr;
  o.y_Br.resize(o1.y_Br.size() + o2.y_Br.size());
  o.y_Br << o1.y_Br, o2.y_Br;
  // section C keeps [all sensor pilots; all BS pilots]
  const int top1 = static_cast<int>(o1.y_c.size()) * Ns / (Ns + M);
  const int top2 = static_cast<int>(o2.y_c.size()) * Ns / (Ns + M);
  o.y_c.resize(o1.y_c.size() + o2.y_c.size());
  o.y_c << o1.y_c.head(top1), o2.y_c.head(top2), o1.y_c.tail(o1.y_c.size() - top1),
      o2.y_c.tail(o2.y_c.size() - top2);
  return o;
}

}  // namespace jsce
