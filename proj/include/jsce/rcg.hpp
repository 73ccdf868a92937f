#pragma once

#include <vector>

#include "jsce/crb.hpp"

namespace jsce {

struct RcgConfig {
  double armijo_c1 = 1e-4;
  double armijo_shrink = 0.5;
  double step0 = 1.0;
  int max_backtracks = 50;
  double eps_R = 1e-6;  // relative objective decrease
  int max_iter = 200;
  int fr_reset = 20;  // steepest-descent restart period
};

struct RcgResult {
  VecC phi;
  double objective = 0.0;
  int iterations = 0;
  bool stalled = false;
  std::vector<double> trace;  // objective per iteration
};

/// Sum of inverse diagonal FIM entries over all parameter classes; throws
/// DomainError for non-positive entries (infeasible geometry).
double objective(const VecC& phi, const FimCoeffs& coeffs);

/// Wirtinger gradient d f / d phi^* of the objective, stacked [r; c] parts.
VecC euclidean_grad(const VecC& phi, const FimCoeffs& coeffs);

/// Projection onto the tangent space of the product circle manifold.
VecC riemannian_grad(const VecC& phi, const VecC& egrad);

/// Fletcher-Reeves RCG with Armijo backtracking and unit-modulus retraction.
RcgResult optimize(const FimCoeffs& coeffs, const VecC& phi0, const RcgConfig& cfg = {});

}  // namespace jsce
