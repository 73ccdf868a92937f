#include "jsce/trial.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "jsce/baselines.hpp"
#include "jsce/rcg.hpp"

namespace jsce {

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::ASTVBI: return "as-tvbi";
    case Scheme::TPOMP: return "tp-omp";
    case Scheme::TPSBL: return "tp-sbl";
    case Scheme::SPTVBI: return "sp-tvbi";
    case Scheme::GENIE: return "genie";
  }
  return "?";
}

std::optional<Scheme> scheme_from_name(const std::string& name) {
  for (Scheme s : {Scheme::ASTVBI, Scheme::TPOMP, Scheme::TPSBL, Scheme::SPTVBI, Scheme::GENIE})
    if (scheme_name(s) == name) return s;
  return std::nullopt;
}

AngularSpan angular_span(const Rect& r, const Vec2& anchor, double orientation,
                         AngleConvention conv, double pad_frac) {
  AngularSpan span;
  span.lo = std::numeric_limits<double>::infinity();
  span.hi = -span.lo;
  for (double x : {r.xmin(), r.xmax()})
    for (double y : {r.ymin(), r.ymax()}) {
      const double th = angle_to(anchor, orientation, Vec2(x, y), conv);
      span.lo = std::min(span.lo, th);
      span.hi = std::max(span.hi, th);
    }
  const double pad = pad_frac * (span.hi - span.lo);
  span.lo -= pad;
  span.hi += pad;
  return span;
}

MatC compensate_sensing(const MatC& codebook, const VecC& h_CI) {
  MatC phi = codebook;
  for (int n = 0; n < phi.rows(); ++n) {
    const double mag = std::abs(h_CI(n));
    const cxd rot = mag > 0.0 ? std::conj(h_CI(n)) / mag : cxd(1.0, 0.0);
    phi.row(n) *= rot;
  }
  return phi;
}

MatC compensate_comm(const MatC& codebook, const VecC& a_IB) {
  MatC phi = codebook.conjugate();
  for (int n = 0; n < phi.rows(); ++n) phi.row(n) *= a_IB(n);
  return phi;
}

Observation scale_observation(const Observation& obs, double factor) {
  Observation out = obs;
  out.y_sr *= factor;
  out.y_Br *= factor;
  out.y_c *= factor;
  return out;
}

namespace {

// per-grid activity energy, each block normalized by its own peak
VecR family_energy(const PosteriorState& st, std::initializer_list<int> blocks, int n) {
  VecR e = VecR::Zero(n);
  for (int b : blocks) {
    const VecR eb = st.mu[b].cwiseAbs2().real();
    const double mx = eb.maxCoeff();
    if (mx > 0.0) e += eb / mx;
  }
  return e;
}

std::vector<int> top_indices(const VecR& prob, const VecR& energy, int k) {
  std::vector<int> order(prob.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (prob(a) != prob(b)) return prob(a) > prob(b);
    return energy(a) > energy(b);
  });
  order.resize(std::min<size_t>(order.size(), k));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace

PosteriorState posterior_from_point(const VecC& x, const std::vector<int>& support,
                                    const MatC& Sigma_support, const MeasurementModel& m) {
  PosteriorState st;
  for (int b = 0; b < kNumBlocks; ++b) {
    st.mu[b] = x.segment(m.col_offset(b), m.block_size(b));
    st.Sigma[b] = MatC();  // point estimate unless a covariance is scattered below
    st.a_t[b] = VecR::Ones(m.block_size(b));
    st.b_t[b] = VecR::Ones(m.block_size(b));
  }
  if (Sigma_support.size() > 0) {
    for (int b = 0; b < kNumBlocks; ++b) st.Sigma[b] = MatC::Zero(m.block_size(b), m.block_size(b));
    for (size_t i = 0; i < support.size(); ++i)
      for (size_t j = 0; j < support.size(); ++j) {
        const int bi = support[i] < 6 * m.Q ? support[i] / m.Q : BL + (support[i] - 6 * m.Q) / m.P;
        const int bj = support[j] < 6 * m.Q ? support[j] / m.Q : BL + (support[j] - 6 * m.Q) / m.P;
        if (bi != bj) continue;  // cross-block covariance is dropped
        st.Sigma[bi](support[i] - m.col_offset(bi), support[j] - m.col_offset(bj)) =
            Sigma_support(i, j);
      }
  }

  // support indicators, biased by energy so rankings stay informative
  st.pit_T = VecR::Zero(m.Q);
  st.pit_NL = VecR::Zero(m.Q);
  st.pit_L = VecR::Zero(m.P);
  const VecR e_T = family_energy(st, {ITS, CTS, ITB, CTB}, m.Q);
  const VecR e_NL = family_energy(st, {BNL, INL}, m.Q);
  const VecR e_L = family_energy(st, {BL, IL}, m.P);
  auto mark = [&](VecR& pit, const VecR& e, int idx) {
    const double mx = std::max(e.maxCoeff(), 1e-300);
    pit(idx) = std::max(pit(idx), 0.5 + 0.5 * e(idx) / mx);
  };
  for (int col : support) {
    if (col < 4 * m.Q) {
      mark(st.pit_T, e_T, col % m.Q);
    } else if (col < 6 * m.Q) {
      mark(st.pit_NL, e_NL, col % m.Q);
    } else {
      mark(st.pit_L, e_L, (col - 6 * m.Q) % m.P);
    }
  }
  return st;
}

Detections detect_positions(const PosteriorState& st, const GridSpec& grids,
                            const OffsetState& off, int K, int L) {
  Detections det;
  const int Q = grids.r.size();
  const VecR e_T = family_energy(st, {ITS, CTS, ITB, CTB}, Q);
  const VecR e_NL = family_energy(st, {BNL, INL}, Q);
  for (int q : top_indices(st.pit_T, e_T, K))
    det.targets.push_back(grids.r.pts[q] + off.dr.row(q).transpose());
  for (int q : top_indices(st.pit_NL, e_NL, L))
    det.scatterers.push_back(grids.r.pts[q] + off.dr.row(q).transpose());
  const VecR e_L = family_energy(st, {BL, IL}, grids.z.size());
  const auto pu = top_indices(st.pit_L, e_L, 1);
  det.user = grids.z.pts[pu[0]] + off.dz.row(pu[0]).transpose();
  return det;
}

namespace {

struct TrialSetup {
  ExperimentConfig cfg;
  Scheme scheme;
  GridSpec grids;
  GroundTruth truth;
  OffsetState off_true;
  IndexMap imap;
  ChannelSet ch;
  VecC x_true;
  double amp = 1.0;
  double sigma2_eff = 1.0;
  SupportProbs probs;
  MRFParams mrf;
  GammaHyper hyper;
  std::array<double, kNumBlocks> block_scale{1, 1, 1, 1, 1, 1, 1, 1};
  MStepConfig mstep;
  AngularSpan span_R, span_Ru;
  VecC a_IB;  // IRS-side steering toward the BS
};

ReflectionSchedule make_scanning_schedule(const TrialSetup& s, int Ts, int Tc, Phase phase) {
  ReflectionSchedule sched;
  sched.phase = phase;
  const MatC Wr = scanning_codebook(s.cfg.arrays.Np, Ts, s.span_R.lo, s.span_R.hi);
  const MatC Wc = scanning_codebook(s.cfg.arrays.Np, Tc, s.span_Ru.lo, s.span_Ru.hi);
  sched.phi_r = compensate_sensing(Wr, s.ch.h_CI);
  sched.phi_c = compensate_comm(Wc, s.a_IB);
  return sched;
}

EStepFn make_estep_fn(const TrialSetup& s) {
  switch (s.scheme) {
    case Scheme::TPOMP: {
      std::array<int, kNumBlocks> budget;
      const int K = s.truth.K(), L = s.truth.L();
      budget = {K, K, K, K, L, L, 1, 1};
      return [budget](const Observation& y, const MeasurementModel& m) {
        const OmpResult r = omp(y, m, budget);
        return posterior_from_point(r.x, r.support, MatC(), m);
      };
    }
    case Scheme::TPSBL: {
      const double sigma2 = s.sigma2_eff;
      const SblConfig cfg = s.cfg.sbl;
      return [sigma2, cfg](const Observation& y, const MeasurementModel& m) {
        const SblResult r = sbl(y, m, sigma2, cfg);
        return posterior_from_point(r.x, r.support, r.Sigma_support, m);
      };
    }
    default: {
      const GammaHyper hyper = s.hyper;
      const SupportProbs probs = s.probs;
      const MRFParams mrf = s.mrf;
      const double sigma2 = s.sigma2_eff;
      const EStepConfig cfg = s.cfg.estep;
      return [hyper, probs, mrf, sigma2, cfg](const Observation& y, const MeasurementModel& m) {
        return run_estep(y, m, hyper, probs, mrf, sigma2, cfg);
      };
    }
  }
}

ModelBuilder make_builder(const TrialSetup& s, const ReflectionSchedule& sched) {
  const SceneConfig scene = s.cfg.scene;
  const ArraySpec arrays = s.cfg.arrays;
  const GridSpec grids = s.grids;
  const VecC h_CI = s.ch.h_CI;
  const MatC H_IB = s.ch.H_IB;
  const auto scale = s.block_scale;
  return [=](const OffsetState& off) {
    return assemble_F(build_dictionaries(scene, grids, off, arrays), sched, h_CI, H_IB, scale);
  };
}

void finalize_metrics(TrialResult& res, const TrialSetup& s, const ASTVBIResult& est) {
  const int Q = s.grids.r.size(), P = s.grids.z.size();
  VecC x_hat(6 * Q + 2 * P);
  for (int b = 0; b < kNumBlocks; ++b) {
    const int off = b < BL ? b * Q : 6 * Q + (b - BL) * P;
    x_hat.segment(off, b < BL ? Q : P) = s.block_scale[b] * est.posterior.mu[b];
  }
  double num_s = 0.0, den_s = 0.0, num_c = 0.0, den_c = 0.0;
  for (int b = 0; b < kNumBlocks; ++b) {
    const int off = b < BL ? b * Q : 6 * Q + (b - BL) * P;
    const int n = b < BL ? Q : P;
    const double num = (x_hat.segment(off, n) - s.x_true.segment(off, n)).squaredNorm();
    const double den = s.x_true.segment(off, n).squaredNorm();
    res.nmse_block[b] = den > 0.0 ? num / den : std::numeric_limits<double>::quiet_NaN();
    (b <= CTB ? num_s : num_c) += num;
    (b <= CTB ? den_s : den_c) += den;
  }
  res.nmse_sensing = num_s / den_s;
  res.nmse_comm = num_c / den_c;

  const Detections det =
      detect_positions(est.posterior, s.grids, est.offsets, s.truth.K(), s.truth.L());
  const double miss = std::hypot(s.grids.r.dx, s.grids.r.dy);
  res.rmse = rmse(det.targets, det.scatterers, det.user, s.truth, miss);
  res.iterations = est.iterations;
}

}  // namespace

TrialResult run_two_phase(const ExperimentConfig& cfg_in, Scheme scheme, uint64_t seed,
                          const TrialOverrides& ovr, TrialTraces* traces) {
  TrialResult res;
  res.seed = seed;
  res.scheme = scheme_name(scheme);
  res.sweep_value = ovr.pt_dbm;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    TrialSetup s;
    s.cfg = cfg_in;
    s.scheme = scheme;
    if (ovr.O >= 0) s.cfg.content.O = ovr.O;
    if (ovr.Np > 0) s.cfg.arrays.Np = ovr.Np;
    if (ovr.K_B > 0) s.cfg.content.K_B = ovr.K_B;
    if (ovr.L_B > 0) s.cfg.content.L_B = ovr.L_B;
    if (ovr.rule) s.cfg.mstep.rule = *ovr.rule;
    int T1 = s.cfg.T1, T2 = s.cfg.T2;
    if (scheme == Scheme::SPTVBI) {
      // single-phase variant keeps the total pilot budget
      T1 += s.cfg.T3;
      T2 += s.cfg.T4;
    }

    const SceneConfig& scene = s.cfg.scene;
    const ArraySpec& arrays = s.cfg.arrays;
    s.grids = build_grids(scene.soi_R, scene.soi_Ru, s.cfg.Q, s.cfg.P);

    Rng rng_scene(seed, 0), rng_chan(seed, 1), rng_n1(seed, 2), rng_n2(seed, 3);
    s.truth = generate_truth(scene, s.grids, s.cfg.content, rng_scene);
    std::tie(s.off_true, s.imap) = assign_offsets(s.truth, s.grids);
    s.ch = generate_channels(scene, s.truth, arrays, rng_chan, s.cfg.comm_pl);
    s.x_true = sparse_ground_truth(s.ch, s.grids, s.imap);

    s.amp = std::sqrt(dbm_to_watts(ovr.pt_dbm));
    s.sigma2_eff = scene.sigma2 / (s.amp * s.amp);

    s.span_R = angular_span(scene.soi_R, scene.p_I, scene.theta_I, AngleConvention::IRS);
    s.span_Ru = angular_span(scene.soi_Ru, scene.p_I, scene.theta_I, AngleConvention::IRS);
    s.a_IB = steering(arrays.Np,
                      angle_to(scene.p_I, scene.theta_I, scene.p_B, AngleConvention::IRS));

    const int K = s.truth.K(), L = s.truth.L();
    s.probs = SupportProbs::from_counts(K, L, s.truth.overlap_count, s.cfg.P);
    if (s.cfg.p_T_override > 0) s.probs.p_T = s.cfg.p_T_override;
    if (s.cfg.p_NL_override > 0) s.probs.p_NL = s.cfg.p_NL_override;
    if (s.cfg.p_L_override > 0) s.probs.p_L = s.cfg.p_L_override;
    s.mrf = MRFParams{s.cfg.mrf_alpha, s.cfg.mrf_beta, s.grids.r.nx, s.grids.r.ny};

    const auto gains = nominal_gains(scene, s.grids, K, L, s.cfg.content.kappa, s.cfg.comm_pl);
    const bool tvbi = scheme != Scheme::TPOMP && scheme != Scheme::TPSBL;
    std::array<VecR, kNumBlocks> gains_scaled = gains;
    for (int b = 0; b < kNumBlocks; ++b) {
      // the estimator runs in per-block normalized units
      const double rms = std::sqrt(gains[b].squaredNorm() / gains[b].size());
      s.block_scale[b] = tvbi ? rms : 1.0;
      gains_scaled[b] /= s.block_scale[b];
    }
    s.hyper = hyperparams_from_nominal(gains_scaled);
    for (int b = 0; b < kNumBlocks; ++b) {
      s.hyper.a[b].setConstant(s.cfg.prior_a);
      s.hyper.b[b] *= s.cfg.prior_a * s.cfg.prior_b_scale;
      s.hyper.a_bar[b].setConstant(s.cfg.prior_a_bar);
      s.hyper.b_bar[b].setConstant(s.cfg.prior_b_bar);
    }
    s.mstep = s.cfg.mstep;
    s.mstep.cand_topk = K + L;

    const EStepFn estep_fn = make_estep_fn(s);

    // phase I: scanning schedule, observe, estimate
    TrialSetup& sr = s;
    ReflectionSchedule sched1 = make_scanning_schedule(sr, T1, T2, Phase::I);
    Observation obs1 =
        synthesize_observation(s.ch, sched1, scene, arrays, rng_n1, s.amp, s.amp);
    const Observation obs1_n = scale_observation(obs1, 1.0 / s.amp);
    const ModelBuilder builder1 = make_builder(s, sched1);

    ASTVBIResult r1;
    if (scheme != Scheme::GENIE)
      r1 = run_as_tvbi(obs1_n, builder1, estep_fn, scene, s.grids, s.sigma2_eff, s.mstep);

    if (scheme == Scheme::SPTVBI) {
      finalize_metrics(res, s, r1);
      if (traces) traces->em_trace = r1.trace;
      res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      return res;
    }

    // phase II: CRB-optimized reflections from the phase-I estimates
    DetectedScene det;
    if (scheme == Scheme::GENIE) {
      det = genie_scene(s.truth, s.ch);
    } else {
      det = detect_scene(r1.posterior, builder1(r1.offsets), s.grids, r1.offsets, K, L);
    }

    FimInput fin;
    fin.det = det;
    fin.scene = scene;
    fin.arrays = arrays;
    fin.h_CI = s.ch.h_CI;
    fin.H_IB = s.ch.H_IB;
    fin.phi_r_I = sched1.phi_r;
    fin.phi_c_I = sched1.phi_c;
    fin.phi_r_II = MatC::Zero(arrays.Np, 0);
    fin.phi_c_II = MatC::Zero(arrays.Np, 0);
    fin.sigma2 = s.sigma2_eff;

    ReflectionSchedule sched2 = make_scanning_schedule(s, s.cfg.T3, s.cfg.T4, Phase::II);
    try {
      const FimCoeffs coeffs = approx_fim_coeffs(fin, s.cfg.T3, s.cfg.T4);
      VecC phi0(arrays.Np * (s.cfg.T3 + s.cfg.T4));
      phi0 << sched2.phi_r.reshaped(), sched2.phi_c.reshaped();
      const RcgResult rr = optimize(coeffs, phi0, s.cfg.rcg);
      sched2.phi_r = rr.phi.head(arrays.Np * s.cfg.T3).reshaped(arrays.Np, s.cfg.T3);
      sched2.phi_c = rr.phi.tail(arrays.Np * s.cfg.T4).reshaped(arrays.Np, s.cfg.T4);
      if (traces) traces->rcg_trace = rr.trace;
    } catch (const DomainError&) {
      // degenerate phase-I detection: keep the scanning schedule for phase II
    }

    Observation obs2 =
        synthesize_observation(s.ch, sched2, scene, arrays, rng_n2, s.amp, s.amp);
    const Observation obs2_n = scale_observation(obs2, 1.0 / s.amp);
    const ReflectionSchedule sched12 = stack_schedules(sched1, sched2);
    const Observation obs12 = stack_observations(obs1_n, obs2_n, arrays.Ns, arrays.M);
    const ModelBuilder builder12 = make_builder(s, sched12);

    const ASTVBIResult r2 =
        run_as_tvbi(obs12, builder12, estep_fn, scene, s.grids, s.sigma2_eff, s.mstep);
    finalize_metrics(res, s, r2);
    if (traces) traces->em_trace = r2.trace;
  } catch (const std::exception& e) {
    res.failed = true;
    res.error = e.what();
  }
  res.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace jsce
