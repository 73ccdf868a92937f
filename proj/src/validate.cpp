#include "jsce/validate.hpp"

#include <cmath>
#include <sstream>

#include "jsce/baselines.hpp"
#include "jsce/priors.hpp"
#include "jsce/trial_support.hpp"

namespace jsce {
namespace validate {

namespace {

// small randomized world shared by the gradient and posterior oracles
struct Fixture {
  SceneConfig scene;
  ArraySpec arrays{8, 12, 8};
  GridSpec grids;
  ReflectionSchedule sched;
  VecC h_CI;
  MatC H_IB;

  Fixture(Rng& rng, int Q = 9, int P = 4, int Ts = 2, int Tc = 2) {
    scene.sigma2 = 1.0;
    scene.soi_R = Rect{{rng.uniform(-3.0, 3.0), 25.0 + rng.uniform(-3.0, 3.0)}, 30.0, 30.0};
    scene.soi_Ru = Rect{{rng.uniform(-2.0, 2.0), 10.0 + rng.uniform(-2.0, 2.0)}, 9.0, 9.0};
    grids = build_grids(scene.soi_R, scene.soi_Ru, Q, P);
    sched.phi_r.resize(arrays.Np, Ts);
    sched.phi_c.resize(arrays.Np, Tc);
    for (int n = 0; n < arrays.Np; ++n) {
      for (int t = 0; t < Ts; ++t) sched.phi_r(n, t) = std::polar(1.0, rng.uniform(0.0, 2 * kPi));
      for (int t = 0; t < Tc; ++t) sched.phi_c(n, t) = std::polar(1.0, rng.uniform(0.0, 2 * kPi));
    }
    // unit-magnitude stand-ins keep every term O(1)
    h_CI.resize(arrays.Np);
    for (int n = 0; n < arrays.Np; ++n) h_CI(n) = std::polar(1.0, rng.uniform(0.0, 2 * kPi));
    H_IB.resize(arrays.M, arrays.Np);
    for (int m = 0; m < arrays.M; ++m)
      for (int n = 0; n < arrays.Np; ++n)
        H_IB(m, n) = std::polar(1.0 / std::sqrt(arrays.Np), rng.uniform(0.0, 2 * kPi));
  }

  ModelBuilder builder() const {
    const SceneConfig sc = scene;
    const GridSpec g = grids;
    const ArraySpec ar = arrays;
    const ReflectionSchedule sd = sched;
    const VecC h = h_CI;
    const MatC H = H_IB;
    return [=](const OffsetState& off) {
      return assemble_F(build_dictionaries(sc, g, off, ar), sd, h, H);
    };
  }

  OffsetState random_offsets(Rng& rng) const {
    OffsetState off = OffsetState::zeros(grids.r.size(), grids.z.size());
    for (int q = 0; q < off.dr.rows(); ++q) {
      off.dr(q, 0) = rng.uniform(-0.25, 0.25) * grids.r.dx;
      off.dr(q, 1) = rng.uniform(-0.25, 0.25) * grids.r.dy;
    }
    for (int p = 0; p < off.dz.rows(); ++p) {
      off.dz(p, 0) = rng.uniform(-0.25, 0.25) * grids.z.dx;
      off.dz(p, 1) = rng.uniform(-0.25, 0.25) * grids.z.dy;
    }
    return off;
  }
};

PosteriorState random_posterior(const MeasurementModel& m, Rng& rng) {
  PosteriorState st;
  for (int b = 0; b < kNumBlocks; ++b) {
    const int n = m.block_size(b);
    st.mu[b].resize(n);
    for (int i = 0; i < n; ++i) st.mu[b](i) = rng.cnormal();
    MatC A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = rng.cnormal();
    st.Sigma[b] = (A * A.adjoint()) / n + 0.1 * MatC::Identity(n, n);
    st.a_t[b] = VecR::Ones(n);
    st.b_t[b] = VecR::Ones(n);
  }
  st.pit_T = VecR::Constant(m.Q, 0.5);
  st.pit_NL = VecR::Constant(m.Q, 0.5);
  st.pit_L = VecR::Constant(m.P, 0.5);
  return st;
}

Observation random_observation(const MeasurementModel& m, Rng& rng) {
  Observation y;
  auto fill = [&](VecC& v, int n) {
    v.resize(n);
    for (int i = 0; i < n; ++i) v(i) = rng.cnormal();
  };
  fill(y.y_sr, m.section_rows(SR));
  fill(y.y_Br, m.section_rows(BR));
  fill(y.y_c, m.section_rows(C));
  return y;
}

}  // namespace

SurrogateGradients fd_gradients(const OffsetState& offsets, const PosteriorState& st,
                                const Observation& y, const ModelBuilder& builder, double sigma2,
                                double h) {
  SurrogateGradients g;
  g.g_bs_r = MatR::Zero(offsets.dr.rows(), 2);
  g.g_irs_r = MatR::Zero(offsets.dr.rows(), 2);
  g.g_bs_z = MatR::Zero(offsets.dz.rows(), 2);
  g.g_irs_z = MatR::Zero(offsets.dz.rows(), 2);
  auto central = [&](bool r_grid, int row, int axis) {
    OffsetState plus = offsets, minus = offsets;
    MatR& pt = r_grid ? plus.dr : plus.dz;
    MatR& mt = r_grid ? minus.dr : minus.dz;
    pt(row, axis) += h;
    mt(row, axis) -= h;
    return (surrogate_Q(plus, st, y, builder, sigma2) -
            surrogate_Q(minus, st, y, builder, sigma2)) /
           (2.0 * h);
  };
  // the finite difference sees the total gradient; report it in g_bs
  for (int q = 0; q < offsets.dr.rows(); ++q)
    for (int ax = 0; ax < 2; ++ax) g.g_bs_r(q, ax) = central(true, q, ax);
  for (int p = 0; p < offsets.dz.rows(); ++p)
    for (int ax = 0; ax < 2; ++ax) g.g_bs_z(p, ax) = central(false, p, ax);
  return g;
}

ValidationReport validate_gradients(int n_cases, uint64_t seed) {
  ValidationReport rep;
  rep.suite = "gradients";
  rep.tolerance = 1e-5;
  double worst = 0.0;
  for (int c = 0; c < n_cases; ++c) {
    Rng rng(seed, 100 + c);
    Fixture fx(rng);
    const OffsetState off = fx.random_offsets(rng);
    const ModelBuilder builder = fx.builder();
    const MeasurementModel model = builder(off);
    const PosteriorState st = random_posterior(model, rng);
    const Observation y = random_observation(model, rng);

    std::vector<int> cands(fx.grids.r.size());
    for (size_t i = 0; i < cands.size(); ++i) cands[i] = static_cast<int>(i);
    const SurrogateGradients ga =
        gradients(model, st, y, fx.scene, fx.grids, off, fx.scene.sigma2, cands);
    const SurrogateGradients gf = fd_gradients(off, st, y, builder, fx.scene.sigma2);

    const MatR an_r = ga.g_bs_r + ga.g_irs_r;
    const MatR an_z = ga.g_bs_z + ga.g_irs_z;
    const double num = (an_r - gf.g_bs_r).norm() + (an_z - gf.g_bs_z).norm();
    const double den = gf.g_bs_r.norm() + gf.g_bs_z.norm();
    worst = std::max(worst, num / den);
  }
  rep.worst = worst;
  rep.pass = worst < rep.tolerance;
  std::ostringstream os;
  os << n_cases << " random scene/offset pairs, worst relative error " << worst;
  rep.detail = os.str();
  return rep;
}

VecC fim_noiseless_mean(const FimInput& in) {
  struct View {
    const DetectedObject* o;
    bool senses, comms;
    double th_I, th_B;
  };
  std::vector<View> vs;
  for (const auto& o : in.det.pure_targets) vs.push_back({&o, true, false, 0, 0});
  for (const auto& o : in.det.overlaps) vs.push_back({&o, true, true, 0, 0});
  for (const auto& o : in.det.pure_scatterers) vs.push_back({&o, false, true, 0, 0});
  vs.push_back({&in.det.user, false, true, 0, 0});
  for (auto& v : vs) {
    v.th_I = angle_to(in.scene.p_I, in.scene.theta_I, v.o->pos, AngleConvention::IRS);
    v.th_B = angle_to(in.scene.p_B, in.scene.theta_B, v.o->pos, AngleConvention::BS);
  }

  std::vector<VecC> parts;
  for (const MatC* phi_r : {&in.phi_r_I, &in.phi_r_II}) {
    for (int t = 0; t < phi_r->cols(); ++t) {
      const VecC illum = in.h_CI.cwiseProduct(phi_r->col(t));
      VecC ysr = VecC::Zero(in.arrays.Ns), yBr = VecC::Zero(in.arrays.M);
      for (const auto& v : vs) {
        if (!v.senses) continue;
        const cxd refl = steering(in.arrays.Np, v.th_I).dot(illum);
        ysr += (v.o->g_its * refl + v.o->g_cts) * steering(in.arrays.Ns, v.th_I);
        yBr += (v.o->g_itb * refl + v.o->g_ctb) * steering(in.arrays.M, v.th_B);
      }
      parts.push_back(ysr);
      parts.push_back(yBr);
    }
  }
  VecC ysc = VecC::Zero(in.arrays.Ns);
  for (const auto& v : vs)
    if (v.comms) ysc += v.o->g_irs * steering(in.arrays.Ns, v.th_I);
  for (const MatC* phi_c : {&in.phi_c_I, &in.phi_c_II}) {
    for (int t = 0; t < phi_c->cols(); ++t) {
      parts.push_back(ysc);
      VecC yBc = VecC::Zero(in.arrays.M);
      for (const auto& v : vs) {
        if (!v.comms) continue;
        yBc += v.o->g_bs * steering(in.arrays.M, v.th_B);
        yBc += v.o->g_irs * (in.H_IB * phi_c->col(t).cwiseProduct(steering(in.arrays.Np, v.th_I)));
      }
      parts.push_back(yBc);
    }
  }
  int total = 0;
  for (const auto& p : parts) total += static_cast<int>(p.size());
  VecC mean(total);
  int off = 0;
  for (const auto& p : parts) {
    mean.segment(off, p.size()) = p;
    off += static_cast<int>(p.size());
  }
  return mean;
}

MatR fd_fim(const FimInput& in, double h) {
  const int n = in.det.n_params();
  auto perturbed = [&](int param, double delta) {
    FimInput cp = in;
    int idx = param;
    auto bump = [&](std::vector<DetectedObject>& objs) -> bool {
      if (idx < 2 * static_cast<int>(objs.size())) {
        objs[idx / 2].pos(idx % 2) += delta;
        return true;
      }
      idx -= 2 * static_cast<int>(objs.size());
      return false;
    };
    if (!bump(cp.det.pure_targets) && !bump(cp.det.overlaps) && !bump(cp.det.pure_scatterers))
      cp.det.user.pos(idx % 2) += delta;
    return cp;
  };
  MatC D(fim_noiseless_mean(in).size(), n);
  for (int p = 0; p < n; ++p) {
    const VecC mp = fim_noiseless_mean(perturbed(p, h));
    const VecC mm = fim_noiseless_mean(perturbed(p, -h));
    D.col(p) = (mp - mm) / (2.0 * h);
  }
  return (2.0 / in.sigma2) * (D.adjoint() * D).real();
}

namespace {

DetectedObject random_object(Rng& rng, const Rect& region, bool sensing, bool comm) {
  DetectedObject o;
  o.pos = Vec2(rng.uniform(region.xmin(), region.xmax()), rng.uniform(region.ymin(), region.ymax()));
  if (sensing) {
    o.g_its = rng.cnormal();
    o.g_cts = rng.cnormal();
    o.g_itb = rng.cnormal();
    o.g_ctb = rng.cnormal();
  }
  if (comm) {
    o.g_bs = rng.cnormal();
    o.g_irs = rng.cnormal();
  }
  return o;
}

FimInput random_fim_input(Rng& rng, bool mixed) {
  Fixture fx(rng);
  FimInput in;
  in.scene = fx.scene;
  in.arrays = fx.arrays;
  in.h_CI = fx.h_CI;
  in.H_IB = fx.H_IB;
  in.sigma2 = 1.0;
  in.phi_r_I = fx.sched.phi_r;
  in.phi_c_I = fx.sched.phi_c;
  // fresh random phase-II schedules
  in.phi_r_II.resize(fx.arrays.Np, 2);
  in.phi_c_II.resize(fx.arrays.Np, 2);
  for (int n = 0; n < fx.arrays.Np; ++n)
    for (int t = 0; t < 2; ++t) {
      in.phi_r_II(n, t) = std::polar(1.0, rng.uniform(0.0, 2 * kPi));
      in.phi_c_II(n, t) = std::polar(1.0, rng.uniform(0.0, 2 * kPi));
    }
  in.det.pure_targets.push_back(random_object(rng, fx.scene.soi_R, true, false));
  if (mixed) {
    in.det.overlaps.push_back(random_object(rng, fx.scene.soi_R, true, true));
    in.det.pure_scatterers.push_back(random_object(rng, fx.scene.soi_R, false, true));
  }
  in.det.user = random_object(rng, fx.scene.soi_Ru, false, true);
  return in;
}

// class extents in parameter indices: [pure T | O | S | user]
std::vector<std::pair<int, int>> class_ranges(const DetectedScene& det) {
  std::vector<std::pair<int, int>> r;
  int off = 0;
  for (int n : {static_cast<int>(det.pure_targets.size()), static_cast<int>(det.overlaps.size()),
                static_cast<int>(det.pure_scatterers.size()), 1}) {
    r.emplace_back(off, 2 * n);
    off += 2 * n;
  }
  return r;
}

bool printed_nonzero(int ca, int cb) {
  if (ca > cb) std::swap(ca, cb);
  if (ca == cb) return true;
  return (ca == 0 && cb == 1) || (ca == 1 && cb == 2);  // (T,O) and (O,S)
}

}  // namespace

ValidationReport validate_fim(int n_cases, uint64_t seed) {
  ValidationReport rep;
  rep.suite = "fim";
  rep.tolerance = 1e-4;
  double worst = 0.0, worst_coeff = 0.0;
  for (int c = 0; c < n_cases; ++c) {
    Rng rng(seed, 200 + c);
    const FimInput in = random_fim_input(rng, c % 2 == 1);
    const MatR J = fim(in);
    const MatR Jfd = fd_fim(in);
    const auto ranges = class_ranges(in.det);
    for (size_t a = 0; a < ranges.size(); ++a)
      for (size_t b = 0; b < ranges.size(); ++b) {
        if (ranges[a].second == 0 || ranges[b].second == 0) continue;
        const MatR Ja = J.block(ranges[a].first, ranges[b].first, ranges[a].second, ranges[b].second);
        const MatR Jf =
            Jfd.block(ranges[a].first, ranges[b].first, ranges[a].second, ranges[b].second);
        if (printed_nonzero(static_cast<int>(a), static_cast<int>(b))) {
          worst = std::max(worst, (Ja - Jf).norm() / std::max(Jf.norm(), 1e-300));
        } else if (Ja.norm() > 0.0) {
          worst = std::max(worst, 1.0);  // zero-pattern violation
        }
      }

    // coefficient-form diagonal must reproduce the direct assembly
    const FimCoeffs coeffs =
        approx_fim_coeffs(in, static_cast<int>(in.phi_r_II.cols()), static_cast<int>(in.phi_c_II.cols()));
    const VecC phi_r = in.phi_r_II.reshaped();
    const VecC phi_c = in.phi_c_II.reshaped();
    for (int p = 0; p < in.det.n_params(); ++p) {
      const double from_coeff = eval_diag(coeffs.per_param[p], phi_r, phi_c, coeffs.sigma2);
      worst_coeff = std::max(worst_coeff, std::abs(from_coeff - J(p, p)) / std::abs(J(p, p)));
    }
  }
  rep.worst = std::max(worst, worst_coeff);
  rep.pass = worst < rep.tolerance && worst_coeff < 1e-8;
  std::ostringstream os;
  os << "fd-block error " << worst << " (tol 1e-4), coefficient diag error " << worst_coeff
     << " (tol 1e-8)";
  rep.detail = os.str();
  return rep;
}

double path_input(double piB, double p) {
  const double num = piB * p + (1.0 - piB) * (1.0 - p);
  return num / (num + (1.0 - piB));
}

VecR enumerate_union_marginals(const VecR& pi_in, const MRFParams& mrf) {
  const int Q = mrf.size();
  if (Q > 20) throw ConfigError("enumeration limited to 20 nodes");
  VecR prob1 = VecR::Zero(Q);
  double total = 0.0;
  for (int mask = 0; mask < (1 << Q); ++mask) {
    VecI s(Q);
    for (int q = 0; q < Q; ++q) s(q) = (mask >> q) & 1 ? 1 : -1;
    double logw = ising_unnorm_logprob(s, mrf);
    for (int q = 0; q < Q; ++q)
      logw += std::log(s(q) == 1 ? pi_in(q) : 1.0 - pi_in(q));
    const double w = std::exp(logw);
    total += w;
    for (int q = 0; q < Q; ++q)
      if (s(q) == 1) prob1(q) += w;
  }
  return prob1 / total;
}

VecR enumerate_gamma(const VecR& in_T, const VecR& in_NL, const MRFParams& mrf, double p,
                     bool for_target_path) {
  const int Q = mrf.size();
  VecR gamma(Q);
  VecR fused(Q);
  for (int q = 0; q < Q; ++q) {
    const double num = in_T(q) * in_NL(q);
    fused(q) = num / (num + (1.0 - in_T(q)) * (1.0 - in_NL(q)));
  }
  for (int q = 0; q < Q; ++q) {
    // the outgoing message sees only the other family's input at node q
    VecR inputs = fused;
    inputs(q) = for_target_path ? in_NL(q) : in_T(q);
    const VecR marg = enumerate_union_marginals(inputs, mrf);
    gamma(q) = marg(q) * p;
  }
  return gamma;
}

ValidationReport validate_bp() {
  ValidationReport rep;
  rep.suite = "bp";
  rep.tolerance = 1e-10;
  Rng rng(7, 0);
  const SupportProbs probs = SupportProbs::from_counts(2, 3, 1, 4);
  double worst_tree = 0.0, worst_loop = 0.0;

  auto check = [&](const MRFParams& mrf, double& worst) {
    const int Q = mrf.size();
    VecR piB_T(Q), piB_NL(Q);
    for (int q = 0; q < Q; ++q) {
      piB_T(q) = rng.uniform(0.05, 0.95);
      piB_NL(q) = rng.uniform(0.05, 0.95);
    }
    const ModuleBResult out = module_b_pass(piB_T, piB_NL, probs, mrf, 50);
    VecR in_T(Q), in_NL(Q), fused(Q);
    for (int q = 0; q < Q; ++q) {
      in_T(q) = path_input(piB_T(q), probs.p_T);
      in_NL(q) = path_input(piB_NL(q), probs.p_NL);
      const double num = in_T(q) * in_NL(q);
      fused(q) = num / (num + (1.0 - in_T(q)) * (1.0 - in_NL(q)));
    }
    const VecR exact = enumerate_union_marginals(fused, mrf);
    const VecR exact_gT = enumerate_gamma(in_T, in_NL, mrf, probs.p_T, true);
    const VecR exact_gNL = enumerate_gamma(in_T, in_NL, mrf, probs.p_NL, false);
    worst = std::max({worst, (out.union_belief - exact).cwiseAbs().maxCoeff(),
                      (out.gamma_T - exact_gT).cwiseAbs().maxCoeff(),
                      (out.gamma_NL - exact_gNL).cwiseAbs().maxCoeff()});
  };

  for (int rep_i = 0; rep_i < 3; ++rep_i) {
    check(MRFParams{0.3, 0.5, 1, 3}, worst_tree);  // 1x3 chain
    check(MRFParams{0.3, 0.5, 1, 4}, worst_tree);  // 1x4 chain
    check(MRFParams{0.2, 0.4, 4, 1}, worst_tree);  // horizontal chain
    check(MRFParams{0.3, 0.5, 2, 2}, worst_loop);  // 2x2 loop
  }
  rep.worst = worst_tree;
  rep.pass = worst_tree < 1e-10 && worst_loop < 0.05;
  std::ostringstream os;
  os << "tree error " << worst_tree << " (tol 1e-10), 2x2 loop error " << worst_loop
     << " (tol 0.05)";
  rep.detail = os.str();
  return rep;
}

ValidationReport validate_posterior(int n_cases, uint64_t seed) {
  ValidationReport rep;
  rep.suite = "posterior";
  rep.tolerance = 1e-8;
  double worst = 0.0;
  for (int c = 0; c < n_cases; ++c) {
    Rng rng(seed, 300 + c);
    Fixture fx(rng, 16, 4);
    SceneContent content{1, 1, 1, 1.0};
    const GroundTruth truth = generate_truth(fx.scene, fx.grids, content, rng);
    const auto [off_true, imap] = assign_offsets(truth, fx.grids);

    const MeasurementModel m = fx.builder()(off_true);
    Observation y = random_observation(m, rng);
    const double sigma2 = 1.0;

    // supports clamped to the truth; precisions O(1) active, 1e4 inactive
    GammaHyper hyper;
    for (int b = 0; b < kNumBlocks; ++b) {
      const int n = m.block_size(b);
      hyper.a[b] = VecR::Ones(n);
      hyper.b[b] = VecR::Ones(n);
      hyper.a_bar[b] = VecR::Ones(n);
      hyper.b_bar[b] = VecR::Constant(n, 1e-4);
    }
    VecR pi_T = VecR::Zero(m.Q), pi_NL = VecR::Zero(m.Q), pi_L = VecR::Zero(m.P);
    for (int q : imap.q_T) pi_T(q) = 1.0;
    for (int q : imap.q_S) pi_NL(q) = 1.0;
    pi_L(imap.p_u) = 1.0;

    const GramCache cache = GramCache::build(m, y);
    PosteriorState st = init_posteriors(y, m, cache, hyper, pi_T, pi_NL, pi_L, sigma2);
    for (int it = 0; it < 4000; ++it) {
      const std::array<VecC, kNumBlocks> prev = st.mu;
      update_x(st, cache, sigma2);
      double ch = 0.0, nrm = 0.0;
      for (int b = 0; b < kNumBlocks; ++b) {
        ch += (st.mu[b] - prev[b]).norm();
        nrm += st.mu[b].norm();
      }
      if (ch < 1e-15 * std::max(nrm, 1e-300)) break;
    }

    // dense joint posterior per observation section
    const std::array<std::vector<int>, kNumSections> section_blocks = {
        std::vector<int>{ITS, CTS}, std::vector<int>{ITB, CTB}, std::vector<int>{BNL, INL, BL, IL}};
    for (int s = 0; s < kNumSections; ++s) {
      int n = 0;
      for (int b : section_blocks[s]) n += m.block_size(b);
      MatC Fsec(m.section_rows(s), n);
      VecR cdiag(n);
      VecC mu_blocks(n);
      int off = 0;
      for (int b : section_blocks[s]) {
        Fsec.middleCols(off, m.block_size(b)) = m.F[b];
        cdiag.segment(off, m.block_size(b)) = st.a_t[b].array() / st.b_t[b].array();
        mu_blocks.segment(off, m.block_size(b)) = st.mu[b];
        off += m.block_size(b);
      }
      MatC A = Fsec.adjoint() * Fsec / sigma2;
      A.diagonal() += cdiag.cast<cxd>();
      const VecC mu_dense = A.ldlt().solve(Fsec.adjoint() * y.section(s)) / sigma2;
      worst = std::max(worst, (mu_blocks - mu_dense).norm() / mu_dense.norm());
    }
  }
  rep.worst = worst;
  rep.pass = worst < rep.tolerance;
  std::ostringstream os;
  os << n_cases << " clamped scenes, worst relative mean error " << worst;
  rep.detail = os.str();
  return rep;
}

}  // namespace validate
}  // namespace jsce
