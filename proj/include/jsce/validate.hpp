#pragma once

#include <string>

#include "jsce/crb.hpp"
#include "jsce/estep.hpp"
#include "jsce/mstep.hpp"

namespace jsce {
namespace validate {

struct ValidationReport {
  std::string suite;
  bool pass = false;
  double worst = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

/// Analytic surrogate gradients vs central finite differences on random
/// (scene, offset, posterior) triples.
ValidationReport validate_gradients(int n_cases = 50, uint64_t seed = 1);

/// Analytic FIM vs a finite-difference FIM of the noiseless mean, plus the
/// coefficient-form diagonal consistency check.
ValidationReport validate_fim(int n_cases = 10, uint64_t seed = 2);

/// Module-B marginals vs exhaustive enumeration on chain lattices (exact)
/// and a 2x2 loop (documented loopy tolerance).
ValidationReport validate_bp();

/// Module-A means vs the dense joint linear-Gaussian posterior with supports
/// and offsets clamped to the truth.
ValidationReport validate_posterior(int n_cases = 10, uint64_t seed = 3);

// ---- oracle building blocks (shared with the test suites) ----

/// Exact P(s_U,q = 1) of the input-weighted Ising model by enumeration.
VecR enumerate_union_marginals(const VecR& pi_in, const MRFParams& mrf);

/// Exact outgoing gamma messages by enumeration: the node's own path input
/// is replaced by the other family's message, then gamma = P(s_U=1) * p.
VecR enumerate_gamma(const VecR& in_T, const VecR& in_NL, const MRFParams& mrf, double p,
                     bool for_target_path);

/// Path input pi^in from an extrinsic message piB (factor-table formula).
double path_input(double piB, double p);

/// Stacked noiseless mean of all observation groups for a detected scene
/// (order: per phase sr pilots, Br pilots; then sc pilots, Bc pilots).
VecC fim_noiseless_mean(const FimInput& in);

/// Central-difference FIM from the noiseless mean.
MatR fd_fim(const FimInput& in, double h = 1e-5);

/// Central-difference gradient of the surrogate for one offset table.
SurrogateGradients fd_gradients(const OffsetState& offsets, const PosteriorState& st,
                                const Observation& y, const ModelBuilder& builder, double sigma2,
                                double h = 1e-4);

}  // namespace validate
}  // namespace jsce
