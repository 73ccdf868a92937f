#include "jsce/estep.hpp"

#include <cmath>

namespace jsce {

namespace {

constexpr double kProbEps = 1e-12;

double clamp_prob(double p) { return std::min(1.0 - kProbEps, std::max(kProbEps, p)); }

const std::array<std::vector<int>, kNumSections> kSectionBlocks = {
    std::vector<int>{ITS, CTS}, std::vector<int>{ITB, CTB}, std::vector<int>{BNL, INL, BL, IL}};

// support posterior attached to block b (grid index set matches block size)
const VecR& support_of(const PosteriorState& st, int b) {
  if (b <= CTB) return st.pit_T;
  if (b <= INL) return st.pit_NL;
  return st.pit_L;
}

// Hermitian solve with trace jitter on bad conditioning
MatC hermitian_inverse(MatC A) {
  const int n = static_cast<int>(A.rows());
  Eigen::LDLT<MatC> ldlt(A);
  const VecR d = ldlt.vectorD().real();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || !(d.minCoeff() > dmax * 1e-12)) {
    A.diagonal().array() += 1e-12 * A.real().trace();
    ldlt.compute(A);
    if (ldlt.info() != Eigen::Success) throw NumericalError("block covariance solve failed");
  }
  MatC inv = ldlt.solve(MatC::Identity(n, n));
  // keep the result exactly Hermitian
  return 0.5 * (inv + inv.adjoint());
}

}  // namespace

GramCache GramCache::build(const MeasurementModel& m, const Observation& y) {
  GramCache c;
  for (int s = 0; s < kNumSections; ++s) {
    const auto& blocks = kSectionBlocks[s];
    const VecC& ys = y.section(s);
    if (ys.size() != m.section_rows(s)) throw ConfigError("observation/model size mismatch");
    for (int b : blocks) {
      c.Fy[b] = m.F[b].adjoint() * ys;
      for (int b2 : blocks) c.G[b][b2] = m.F[b].adjoint() * m.F[b2];
    }
  }
  return c;
}

PosteriorState init_posteriors(const Observation& y, const MeasurementModel& m,
                               const GramCache& cache, const GammaHyper& hyper, const VecR& pi_T,
                               const VecR& pi_NL, const VecR& pi_L, double sigma2) {
  (void)cache;
  PosteriorState st;
  st.pit_T = pi_T;
  st.pit_NL = pi_NL;
  st.pit_L = pi_L;
  for (int b = 0; b < kNumBlocks; ++b) {
    const VecR& pi = b <= CTB ? pi_T : (b <= INL ? pi_NL : pi_L);
    st.a_t[b] = pi.array() * hyper.a[b].array() + (1.0 - pi.array()) * hyper.a_bar[b].array();
    st.b_t[b] = pi.array() * hyper.b[b].array() + (1.0 - pi.array()) * hyper.b_bar[b].array();
  }

  // joint linear-Gaussian solve per section, then per-block diagonal extraction
  for (int s = 0; s < kNumSections; ++s) {
    const auto& blocks = kSectionBlocks[s];
    int n = 0;
    for (int b : blocks) n += m.block_size(b);
    MatC Fsec(m.section_rows(s), n);
    VecR c(n);
    int off = 0;
    for (int b : blocks) {
      Fsec.middleCols(off, m.block_size(b)) = m.F[b];
      c.segment(off, m.block_size(b)) = st.precision_mean(b);
      off += m.block_size(b);
    }
    MatC A = Fsec.adjoint() * Fsec / sigma2;
    A.diagonal() += c.cast<cxd>();
    const MatC Sig = hermitian_inverse(std::move(A));
    const VecC mu = Sig * (Fsec.adjoint() * y.section(s)) / sigma2;
    off = 0;
    for (int b : blocks) {
      const int nb = m.block_size(b);
      st.mu[b] = mu.segment(off, nb);
      st.Sigma[b] = Sig.block(off, off, nb, nb).diagonal().asDiagonal();
      off += nb;
    }
  }
  return st;
}

void update_x(PosteriorState& st, const GramCache& cache, double sigma2) {
  for (int s = 0; s < kNumSections; ++s) {
    for (int b : kSectionBlocks[s]) {
      VecC rhs = cache.Fy[b];
      for (int b2 : kSectionBlocks[s])
        if (b2 != b) rhs.noalias() -= cache.G[b][b2] * st.mu[b2];
      MatC A = cache.G[b][b] / sigma2;
      A.diagonal() += st.precision_mean(b).cast<cxd>();
      st.Sigma[b] = hermitian_inverse(std::move(A));
      st.mu[b].noalias() = st.Sigma[b] * rhs / sigma2;
      if (!st.mu[b].allFinite()) throw NumericalError("update_x produced non-finite means");
    }
  }
}

void update_rho(PosteriorState& st, const GammaHyper& hyper) {
  for (int b = 0; b < kNumBlocks; ++b) {
    const VecR& pi = support_of(st, b);
    const VecR second_moment =
        st.mu[b].cwiseAbs2().real() + st.Sigma[b].diagonal().real();
    st.a_t[b] = pi.array() * hyper.a[b].array() + (1.0 - pi.array()) * hyper.a_bar[b].array() + 1.0;
    st.b_t[b] = pi.array() * hyper.b[b].array() + (1.0 - pi.array()) * hyper.b_bar[b].array() +
                second_moment.array();
  }
}

namespace {

// log-likelihood contribution of one branch of the gamma mixture
double branch_loglik(double a, double b, double mean_rho, double mean_log_rho) {
  return a * std::log(b) - std::lgamma(a) + (a - 1.0) * mean_log_rho - b * mean_rho;
}

void update_s_family(PosteriorState& st, const GammaHyper& hyper, const std::vector<int>& blocks,
                     const VecR& pi_in, VecR& pit) {
  const int n = static_cast<int>(pi_in.size());
  for (int i = 0; i < n; ++i) {
    const double pi = clamp_prob(pi_in(i));
    double log_active = std::log(pi), log_inactive = std::log1p(-pi);
    for (int b : blocks) {
      const double mean_rho = st.a_t[b](i) / st.b_t[b](i);
      const double mean_log_rho = digamma(st.a_t[b](i)) - std::log(st.b_t[b](i));
      log_active += branch_loglik(hyper.a[b](i), hyper.b[b](i), mean_rho, mean_log_rho);
      log_inactive += branch_loglik(hyper.a_bar[b](i), hyper.b_bar[b](i), mean_rho, mean_log_rho);
    }
    pit(i) = clamp_prob(1.0 / (1.0 + std::exp(log_inactive - log_active)));
  }
}

}  // namespace

void update_s(PosteriorState& st, const GammaHyper& hyper, const VecR& pi_T, const VecR& pi_NL,
              const VecR& pi_L) {
  update_s_family(st, hyper, {ITS, CTS, ITB, CTB}, pi_T, st.pit_T);
  update_s_family(st, hyper, {BNL, INL}, pi_NL, st.pit_NL);
  update_s_family(st, hyper, {BL, IL}, pi_L, st.pit_L);
}

VecR extrinsic(const VecR& pit, const VecR& gamma) {
  VecR out(pit.size());
  for (int i = 0; i < pit.size(); ++i) {
    const double num = pit(i) * (1.0 - gamma(i));
    const double den = num + (1.0 - pit(i)) * gamma(i);
    out(i) = den <= 0.0 ? 0.5 : clamp_prob(num / den);
  }
  return out;
}

namespace {

enum Dir { kLeft = 0, kRight, kTop, kBottom };

int neighbor(int q, int dir, const MRFParams& m) {
  switch (dir) {
    case kLeft: return q >= m.ny ? q - m.ny : -1;
    case kRight: return q + m.ny < m.size() ? q + m.ny : -1;
    case kTop: return q % m.ny != 0 ? q - 1 : -1;
    default: return (q + 1) % m.ny != 0 ? q + 1 : -1;
  }
}

// message arriving at q from direction dir, given the neighbor's incoming
// messages from every direction except the one looking back at q
double bp_message(const MatR& lam, const VecR& log_pi_in, const VecR& log_1m_pi_in, int nb,
                  int exclude_dir, const MRFParams& m) {
  double lp = log_pi_in(nb) - m.alpha;
  double lm = log_1m_pi_in(nb) + m.alpha;
  for (int k = 0; k < 4; ++k) {
    if (k == exclude_dir) continue;
    lp += std::log(lam(nb, k));
    lm += std::log1p(-lam(nb, k));
  }
  const double mx = std::max(lp, lm);
  const double num = std::exp(lp - mx + m.beta) + std::exp(lm - mx - m.beta);
  const double den = (std::exp(m.beta) + std::exp(-m.beta)) * (std::exp(lp - mx) + std::exp(lm - mx));
  return clamp_prob(num / den);
}

}  // namespace

ModuleBResult module_b_pass(const VecR& piB_T, const VecR& piB_NL, const SupportProbs& probs,
                            const MRFParams& mrf, int sweeps, double damping) {
  const int Q = mrf.size();
  if (piB_T.size() != Q || piB_NL.size() != Q) throw ConfigError("module_b: size mismatch");

  auto path_in = [](double piB, double p) {
    const double num = piB * p + (1.0 - piB) * (1.0 - p);
    return clamp_prob(num / (num + (1.0 - piB)));
  };
  VecR in_T(Q), in_NL(Q), in(Q);
  for (int q = 0; q < Q; ++q) {
    in_T(q) = path_in(clamp_prob(piB_T(q)), probs.p_T);
    in_NL(q) = path_in(clamp_prob(piB_NL(q)), probs.p_NL);
    const double num = in_T(q) * in_NL(q);
    in(q) = clamp_prob(num / (num + (1.0 - in_T(q)) * (1.0 - in_NL(q))));
  }
  const VecR log_in = in.array().log();
  const VecR log_1m_in = (1.0 - in.array()).log();

  MatR lam = MatR::Constant(Q, 4, 0.5);
  const int opposite[4] = {kRight, kLeft, kBottom, kTop};
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    auto relax = [&](int q, int dir) {
      const int nb = neighbor(q, dir, mrf);
      if (nb < 0) return;
      const double v = bp_message(lam, log_in, log_1m_in, nb, opposite[dir], mrf);
      lam(q, dir) = damping * lam(q, dir) + (1.0 - damping) * v;
    };
    for (int q = 0; q < Q; ++q) {
      relax(q, kLeft);
      relax(q, kTop);
    }
    for (int q = Q - 1; q >= 0; --q) {
      relax(q, kRight);
      relax(q, kBottom);
    }
  }

  ModuleBResult out;
  out.gamma_T.resize(Q);
  out.gamma_NL.resize(Q);
  out.union_belief.resize(Q);
  for (int q = 0; q < Q; ++q) {
    double sum_log = 0.0, sum_log_1m = 0.0;
    for (int k = 0; k < 4; ++k) {
      sum_log += std::log(lam(q, k));
      sum_log_1m += std::log1p(-lam(q, k));
    }
    auto cavity = [&](double log_pi_other, double log_1m_pi_other) {
      const double lp = log_pi_other - mrf.alpha + sum_log;
      const double lm = log_1m_pi_other + mrf.alpha + sum_log_1m;
      return clamp_prob(1.0 / (1.0 + std::exp(lm - lp)));
    };
    const double out_T = cavity(std::log(in_NL(q)), std::log1p(-in_NL(q)));
    const double out_NL = cavity(std::log(in_T(q)), std::log1p(-in_T(q)));
    out.gamma_T(q) = clamp_prob(out_T * probs.p_T);
    out.gamma_NL(q) = clamp_prob(out_NL * probs.p_NL);
    out.union_belief(q) = cavity(log_in(q), log_1m_in(q));
  }
  return out;
}

double elbo(const PosteriorState& st, const Observation& y, const MeasurementModel& m,
            const GramCache& cache, const GammaHyper& hyper, const VecR& pi_T, const VecR& pi_NL,
            const VecR& pi_L, double sigma2) {
  double val = 0.0;
  // <ln p(y|x)>
  for (int s = 0; s < kNumSections; ++s) {
    const VecC& ys = y.section(s);
    VecC resid = ys;
    double traces = 0.0;
    for (int b : kSectionBlocks[s]) {
      resid -= m.F[b] * st.mu[b];
      traces += cache.G[b][b].cwiseProduct(st.Sigma[b].transpose()).sum().real();
    }
    val += -static_cast<double>(ys.size()) * std::log(kPi * sigma2) -
           (resid.squaredNorm() + traces) / sigma2;
  }
  for (int b = 0; b < kNumBlocks; ++b) {
    const VecR& pi_raw = b <= CTB ? pi_T : (b <= INL ? pi_NL : pi_L);
    const VecR& pit = support_of(st, b);
    for (int i = 0; i < st.mu[b].size(); ++i) {
      const double at = st.a_t[b](i), bt = st.b_t[b](i);
      const double mean_rho = at / bt;
      const double mean_log_rho = digamma(at) - std::log(bt);
      const double m2 = std::norm(st.mu[b](i)) + st.Sigma[b](i, i).real();
      // <ln p(x|rho)> and gamma cross terms
      val += mean_log_rho - std::log(kPi) - mean_rho * m2;
      val += pit(i) * branch_loglik(hyper.a[b](i), hyper.b[b](i), mean_rho, mean_log_rho);
      val += (1.0 - pit(i)) *
             branch_loglik(hyper.a_bar[b](i), hyper.b_bar[b](i), mean_rho, mean_log_rho);
      // gamma entropy
      val += at - std::log(bt) + std::lgamma(at) + (1.0 - at) * digamma(at);
    }
    // support cross entropy and entropy (counted once per family via first block)
    if (b == ITS || b == BNL || b == BL) {
      for (int i = 0; i < pit.size(); ++i) {
        const double pi = clamp_prob(pi_raw(i)), pt = pit(i);
        val += pt * std::log(pi) + (1.0 - pt) * std::log1p(-pi);
        val += -pt * std::log(pt) - (1.0 - pt) * std::log1p(-pt);
      }
    }
    // Gaussian entropy
    Eigen::LDLT<MatC> ldlt(st.Sigma[b]);
    val += st.mu[b].size() * std::log(kPi * std::exp(1.0)) +
           ldlt.vectorD().real().array().log().sum();
  }
  return val;
}

PosteriorState run_estep(const Observation& y, const MeasurementModel& m, const GammaHyper& hyper,
                         const SupportProbs& probs, const MRFParams& mrf, double sigma2,
                         const EStepConfig& cfg, std::vector<EStepTraceRow>* trace) {
  const int Q = m.Q;
  const GramCache cache = GramCache::build(m, y);

  // bootstrap the incoming messages with a prior-only Module B pass
  ModuleBResult msgs = module_b_pass(VecR::Constant(Q, 0.5), VecR::Constant(Q, 0.5), probs, mrf,
                                     cfg.bp_sweeps, cfg.bp_damping);
  const VecR pi_L = VecR::Constant(m.P, probs.p_L);

  PosteriorState st = init_posteriors(y, m, cache, hyper, msgs.gamma_T, msgs.gamma_NL, pi_L, sigma2);

  for (int turbo = 0; turbo < cfg.max_turbo; ++turbo) {
    const VecR& pi_T = msgs.gamma_T;
    const VecR& pi_NL = msgs.gamma_NL;
    VecR pit_T_prev = st.pit_T, pit_NL_prev = st.pit_NL;

    for (int it = 0; it < cfg.inner_max; ++it) {
      double mu_norm = 0.0, mu_change = 0.0;
      std::array<VecC, kNumBlocks> mu_old = st.mu;
      update_x(st, cache, sigma2);
      update_rho(st, hyper);
      update_s(st, hyper, pi_T, pi_NL, pi_L);
      for (int b = 0; b < kNumBlocks; ++b) {
        mu_change += (st.mu[b] - mu_old[b]).norm();
        mu_norm += st.mu[b].norm();
      }
      if (mu_change < cfg.inner_tol * std::max(mu_norm, 1e-30)) break;
    }

    TurboMessages tm;
    tm.piB_T = extrinsic(st.pit_T, pi_T);
    tm.piB_NL = extrinsic(st.pit_NL, pi_NL);
    msgs = module_b_pass(tm.piB_T, tm.piB_NL, probs, mrf, cfg.bp_sweeps, cfg.bp_damping);

    const double change = std::max((st.pit_T - pit_T_prev).cwiseAbs().maxCoeff(),
                                   (st.pit_NL - pit_NL_prev).cwiseAbs().maxCoeff());
    if (trace) {
      trace->push_back(
          {turbo, elbo(st, y, m, cache, hyper, pi_T, pi_NL, pi_L, sigma2), change});
    }
    if (turbo > 0 && change < cfg.turbo_tol) break;
  }
  return st;
}

}  // namespace jsce
