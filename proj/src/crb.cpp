#include "jsce/crb.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace jsce {

namespace {

enum Cls { kPureTarget = 0, kOverlap, kPureScatterer, kUser };

struct ObjView {
  const DetectedObject* obj = nullptr;
  int cls = 0;
  int col = 0;  // first of the two parameter columns (x, y)
  double th_I = 0.0, th_B = 0.0;
  Vec2 cI{0, 0}, cB{0, 0};  // d(theta)/d(x,y) chains
  VecC a_s, a_I, a_B, da_s, da_I, da_B;

  bool senses() const { return cls == kPureTarget || cls == kOverlap; }
  bool communicates() const { return cls != kPureTarget; }
};

Vec2 chain(const Vec2& p, const Vec2& anchor) {
  const Vec2 d = p - anchor;
  const double d2 = d.squaredNorm();
  return Vec2(-d.y() / d2, d.x() / d2);
}

std::vector<ObjView> make_views(const FimInput& in) {
  std::vector<ObjView> views;
  auto add = [&](const DetectedObject& o, int cls) {
    ObjView v;
    v.obj = &o;
    v.cls = cls;
    v.col = 2 * static_cast<int>(views.size());
    v.th_I = angle_to(in.scene.p_I, in.scene.theta_I, o.pos, AngleConvention::IRS);
    v.th_B = angle_to(in.scene.p_B, in.scene.theta_B, o.pos, AngleConvention::BS);
    v.cI = chain(o.pos, in.scene.p_I);
    v.cB = chain(o.pos, in.scene.p_B);
    v.a_s = steering(in.arrays.Ns, v.th_I);
    v.a_I = steering(in.arrays.Np, v.th_I);
    v.a_B = steering(in.arrays.M, v.th_B);
    v.da_s = steering_deriv(in.arrays.Ns, v.th_I);
    v.da_I = steering_deriv(in.arrays.Np, v.th_I);
    v.da_B = steering_deriv(in.arrays.M, v.th_B);
    views.push_back(std::move(v));
  };
  for (const auto& o : in.det.pure_targets) add(o, kPureTarget);
  for (const auto& o : in.det.overlaps) add(o, kOverlap);
  for (const auto& o : in.det.pure_scatterers) add(o, kPureScatterer);
  add(in.det.user, kUser);
  return views;
}

// Jacobians of the noiseless group means w.r.t. the position parameters.
MatC jac_sr(const std::vector<ObjView>& vs, const VecC& illum, int Ns, int n_params) {
  MatC D = MatC::Zero(Ns, n_params);
  for (const auto& v : vs) {
    if (!v.senses()) continue;
    const cxd refl = v.a_I.dot(illum);    // a_I^H Theta h_CI
    const cxd drefl = v.da_I.dot(illum);  // (da_I)^H Theta h_CI
    const VecC dth_I = v.obj->g_its * (v.da_s * refl + v.a_s * drefl) + v.obj->g_cts * v.da_s;
    D.col(v.col) += dth_I * v.cI.x();
    D.col(v.col + 1) += dth_I * v.cI.y();
  }
  return D;
}

MatC jac_Br(const std::vector<ObjView>& vs, const VecC& illum, int M, int n_params) {
  MatC D = MatC::Zero(M, n_params);
  for (const auto& v : vs) {
    if (!v.senses()) continue;
    const cxd refl = v.a_I.dot(illum);
    const cxd drefl = v.da_I.dot(illum);
    const VecC dth_I = v.obj->g_itb * v.a_B * drefl;
    const VecC dth_B = v.obj->g_itb * v.da_B * refl + v.obj->g_ctb * v.da_B;
    D.col(v.col) += dth_I * v.cI.x() + dth_B * v.cB.x();
    D.col(v.col + 1) += dth_I * v.cI.y() + dth_B * v.cB.y();
  }
  return D;
}

MatC jac_sc(const std::vector<ObjView>& vs, int Ns, int n_params) {
  MatC D = MatC::Zero(Ns, n_params);
  for (const auto& v : vs) {
    if (!v.communicates()) continue;
    const VecC dth_I = v.obj->g_irs * v.da_s;
    D.col(v.col) += dth_I * v.cI.x();
    D.col(v.col + 1) += dth_I * v.cI.y();
  }
  return D;
}

MatC jac_Bc(const std::vector<ObjView>& vs, const MatC& H_IB, const VecC& phi_c, int M,
            int n_params) {
  MatC D = MatC::Zero(M, n_params);
  for (const auto& v : vs) {
    if (!v.communicates()) continue;
    const VecC dth_I = v.obj->g_irs * (H_IB * phi_c.cwiseProduct(v.da_I));
    const VecC dth_B = v.obj->g_bs * v.da_B;
    D.col(v.col) += dth_I * v.cI.x() + dth_B * v.cB.x();
    D.col(v.col + 1) += dth_I * v.cI.y() + dth_B * v.cB.y();
  }
  return D;
}

void accumulate(MatR& J, const MatC& D, double w) { J += w * (D.adjoint() * D).real(); }

}  // namespace

MatR fim(const FimInput& in) {
  const auto views = make_views(in);
  const int n = in.det.n_params();
  MatR J = MatR::Zero(n, n);
  const double pref = 2.0 / in.sigma2;

  for (const MatC* phi_r : {&in.phi_r_I, &in.phi_r_II}) {
    for (int t = 0; t < phi_r->cols(); ++t) {
      const VecC illum = in.h_CI.cwiseProduct(phi_r->col(t));
      accumulate(J, jac_sr(views, illum, in.arrays.Ns, n), pref);
      accumulate(J, jac_Br(views, illum, in.arrays.M, n), pref);
    }
  }
  const MatC D_sc = jac_sc(views, in.arrays.Ns, n);
  const double Tc_total = static_cast<double>(in.phi_c_I.cols() + in.phi_c_II.cols());
  accumulate(J, D_sc, pref * Tc_total);
  for (const MatC* phi_c : {&in.phi_c_I, &in.phi_c_II})
    for (int t = 0; t < phi_c->cols(); ++t)
      accumulate(J, jac_Bc(views, in.H_IB, phi_c->col(t), in.arrays.M, n), pref);

  // printed block-sparsity: sensing-only classes decouple from comm-only
  // classes, and the user decouples from everything but itself
  auto zero_cross = [&](int cls_a, int cls_b) {
    for (const auto& va : views)
      for (const auto& vb : views) {
        if (!((va.cls == cls_a && vb.cls == cls_b) || (va.cls == cls_b && vb.cls == cls_a)))
          continue;
        J.block(va.col, vb.col, 2, 2).setZero();
      }
  };
  zero_cross(kPureTarget, kPureScatterer);
  zero_cross(kPureTarget, kUser);
  zero_cross(kOverlap, kUser);
  zero_cross(kPureScatterer, kUser);
  return 0.5 * (J + J.transpose());
}

double crb_trace(const MatR& J) {
  const int n = static_cast<int>(J.rows());
  Eigen::LDLT<MatR> ldlt(J);
  auto usable = [&](const Eigen::LDLT<MatR>& f) {
    const VecR d = f.vectorD();
    return f.info() == Eigen::Success && d.minCoeff() > 0.0 &&
           d.minCoeff() > d.maxCoeff() * 1e-150;
  };
  if (!usable(ldlt)) {
    MatR Jj = J;
    Jj.diagonal().array() += 1e-9 * std::max(J.trace(), 0.0) / n;
    ldlt.compute(Jj);
    if (!usable(ldlt)) return std::numeric_limits<double>::infinity();
  }
  return ldlt.solve(MatR::Identity(n, n)).trace();
}

namespace {

struct PilotQuad {
  MatC A;   // Np x Np
  VecC b;   // Np
  double c = 0.0;
  bool any = false;
};

void rank1_update(PilotQuad& q, const VecC& d, cxd e) {
  q.A.noalias() += d * d.adjoint();
  q.b.noalias() += std::conj(e) * d;
  q.c += std::norm(e);
  q.any = true;
}

double eval_pilot(const PilotQuad& q, const VecC& phi) {
  if (!q.any) return 0.0;
  const cxd quad = phi.transpose() * q.A * phi.conjugate();
  const cxd lin = phi.transpose() * q.b;
  return quad.real() + 2.0 * lin.real();
}

}  // namespace

double eval_diag(const QuadCoeff& qc, const VecC& phi_r, const VecC& phi_c, double sigma2) {
  double v = 0.0;
  if (qc.A_r.size() > 0) {
    const cxd quad = phi_r.transpose() * qc.A_r * phi_r.conjugate();
    const cxd lin = phi_r.transpose() * qc.b_r;
    v += quad.real() + 2.0 * lin.real();
  }
  if (qc.A_c.size() > 0) {
    const cxd quad = phi_c.transpose() * qc.A_c * phi_c.conjugate();
    const cxd lin = phi_c.transpose() * qc.b_c;
    v += quad.real() + 2.0 * lin.real();
  }
  return (2.0 / sigma2) * v + qc.C;
}

FimCoeffs approx_fim_coeffs(const FimInput& in, int T3, int T4) {
  const auto views = make_views(in);
  const int Np = in.arrays.Np;
  FimCoeffs out;
  out.sigma2 = in.sigma2;
  out.Np = Np;
  out.T3 = T3;
  out.T4 = T4;
  const double pref = 2.0 / in.sigma2;

  for (const auto& v : views) {
    for (int axis = 0; axis < 2; ++axis) {
      const double cI = axis == 0 ? v.cI.x() : v.cI.y();
      const double cB = axis == 0 ? v.cB.x() : v.cB.y();
      PilotQuad qs{MatC::Zero(Np, Np), VecC::Zero(Np), 0.0, false};
      PilotQuad qc{MatC::Zero(Np, Np), VecC::Zero(Np), 0.0, false};
      double c_sensor_comm = 0.0;

      if (v.senses()) {
        // reflected rows carry conj(a_I) .* h_CI through the schedule
        const VecC w = v.a_I.conjugate().cwiseProduct(in.h_CI);
        const VecC dw = v.da_I.conjugate().cwiseProduct(in.h_CI);
        for (int ns = 0; ns < in.arrays.Ns; ++ns) {
          const VecC d = v.obj->g_its * cI * (v.da_s(ns) * w + v.a_s(ns) * dw);
          rank1_update(qs, d, v.obj->g_cts * v.da_s(ns) * cI);
        }
        for (int mm = 0; mm < in.arrays.M; ++mm) {
          const VecC d = v.obj->g_itb * (v.a_B(mm) * cI * dw + v.da_B(mm) * cB * w);
          rank1_update(qs, d, v.obj->g_ctb * v.da_B(mm) * cB);
        }
      }
      if (v.communicates()) {
        for (int mm = 0; mm < in.arrays.M; ++mm) {
          const VecC d =
              v.obj->g_irs * cI * in.H_IB.row(mm).transpose().cwiseProduct(v.da_I);
          rank1_update(qc, d, v.obj->g_bs * v.da_B(mm) * cB);
        }
        c_sensor_comm = std::norm(v.obj->g_irs * cI) * v.da_s.squaredNorm();
      }

      QuadCoeff coeff;
      double C = 0.0;
      if (qs.any) {
        coeff.A_r = MatC::Zero(Np * T3, Np * T3);
        coeff.b_r = VecC::Zero(Np * T3);
        for (int t = 0; t < T3; ++t) {
          coeff.A_r.block(t * Np, t * Np, Np, Np) = qs.A;
          coeff.b_r.segment(t * Np, Np) = qs.b;
        }
        for (int t = 0; t < in.phi_r_I.cols(); ++t) C += pref * eval_pilot(qs, in.phi_r_I.col(t));
        C += pref * (in.phi_r_I.cols() + T3) * qs.c;
      }
      if (qc.any) {
        coeff.A_c = MatC::Zero(Np * T4, Np * T4);
        coeff.b_c = VecC::Zero(Np * T4);
        for (int t = 0; t < T4; ++t) {
          coeff.A_c.block(t * Np, t * Np, Np, Np) = qc.A;
          coeff.b_c.segment(t * Np, Np) = qc.b;
        }
        for (int t = 0; t < in.phi_c_I.cols(); ++t) C += pref * eval_pilot(qc, in.phi_c_I.col(t));
        C += pref * (in.phi_c_I.cols() + T4) * qc.c;
        C += pref * (in.phi_c_I.cols() + T4) * c_sensor_comm;
      }
      coeff.C = C;
      out.per_param.push_back(std::move(coeff));
    }
  }
  return out;
}

DetectedScene detect_scene(const PosteriorState& st, const MeasurementModel& m,
                           const GridSpec& grids, const OffsetState& offsets, int K, int L) {
  const int Q = m.Q;
  auto top_by_prob = [&](const VecR& pi, int cap) {
    std::vector<int> sel;
    for (int q = 0; q < Q; ++q)
      if (pi(q) > 0.5) sel.push_back(q);
    if (static_cast<int>(sel.size()) > cap) {
      std::stable_sort(sel.begin(), sel.end(), [&](int a, int b) { return pi(a) > pi(b); });
      sel.resize(cap);
      std::sort(sel.begin(), sel.end());
    }
    return sel;
  };
  const auto t_set = top_by_prob(st.pit_T, K);
  const auto nl_set = top_by_prob(st.pit_NL, L);

  auto make_obj = [&](int q) {
    DetectedObject o;
    o.pos = grids.r.pts[q] + offsets.dr.row(q).transpose();
    o.g_its = m.scale[ITS] * st.mu[ITS](q);
    o.g_cts = m.scale[CTS] * st.mu[CTS](q);
    o.g_itb = m.scale[ITB] * st.mu[ITB](q);
    o.g_ctb = m.scale[CTB] * st.mu[CTB](q);
    o.g_bs = m.scale[BNL] * st.mu[BNL](q);
    o.g_irs = m.scale[INL] * st.mu[INL](q);
    return o;
  };

  DetectedScene det;
  for (int q : t_set) {
    const bool also_nl = std::find(nl_set.begin(), nl_set.end(), q) != nl_set.end();
    (also_nl ? det.overlaps : det.pure_targets).push_back(make_obj(q));
  }
  for (int q : nl_set)
    if (std::find(t_set.begin(), t_set.end(), q) == t_set.end())
      det.pure_scatterers.push_back(make_obj(q));

  int pu = 0;
  st.pit_L.maxCoeff(&pu);
  det.user.pos = grids.z.pts[pu] + offsets.dz.row(pu).transpose();
  det.user.g_bs = m.scale[BL] * st.mu[BL](pu);
  det.user.g_irs = m.scale[IL] * st.mu[IL](pu);
  return det;
}

DetectedScene genie_scene(const GroundTruth& truth, const ChannelSet& ch) {
  DetectedScene det;
  const int O = truth.overlap_count;
  for (int k = 0; k < truth.K(); ++k) {
    DetectedObject o;
    o.pos = truth.targets[k];
    o.g_its = ch.a_ITS(k);
    o.g_cts = ch.a_CTS(k);
    o.g_itb = ch.a_ITB(k);
    o.g_ctb = ch.a_CTB(k);
    if (k < O) {
      // overlap twins share the index in both lists
      o.g_bs = ch.sv_norm * ch.alpha_BU(k + 1);
      o.g_irs = ch.sv_norm * ch.alpha_IU(k + 1);
      det.overlaps.push_back(o);
    } else {
      det.pure_targets.push_back(o);
    }
  }
  for (int l = O; l < truth.L(); ++l) {
    DetectedObject o;
    o.pos = truth.scatterers[l];
    o.g_bs = ch.sv_norm * ch.alpha_BU(l + 1);
    o.g_irs = ch.sv_norm * ch.alpha_IU(l + 1);
    det.pure_scatterers.push_back(o);
  }
  det.user.pos = truth.user;
  det.user.g_bs = ch.sv_norm * ch.alpha_BU(0);
  det.user.g_irs = ch.sv_norm * ch.alpha_IU(0);
  return det;
}

}  // namespace jsce
