#include "jsce/rcg.hpp"

#include <cmath>

namespace jsce {

namespace {

void split(const VecC& phi, const FimCoeffs& c, VecC& phi_r, VecC& phi_c) {
  if (phi.size() != c.dim()) throw ConfigError("rcg: point dimension mismatch");
  phi_r = phi.head(c.Np * c.T3);
  phi_c = phi.tail(c.Np * c.T4);
}

VecC retract(const VecC& phi) {
  VecC out(phi.size());
  for (int i = 0; i < phi.size(); ++i) {
    const double mag = std::abs(phi(i));
    out(i) = mag > 0.0 ? phi(i) / mag : cxd(1.0, 0.0);
  }
  return out;
}

}  // namespace

double objective(const VecC& phi, const FimCoeffs& coeffs) {
  VecC phi_r, phi_c;
  split(phi, coeffs, phi_r, phi_c);
  double f = 0.0;
  for (const auto& qc : coeffs.per_param) {
    const double J = eval_diag(qc, phi_r, phi_c, coeffs.sigma2);
    if (!(J > 0.0)) throw DomainError("rcg objective: non-positive diagonal FIM entry");
    f += 1.0 / J;
  }
  return f;
}

VecC euclidean_grad(const VecC& phi, const FimCoeffs& coeffs) {
  VecC phi_r, phi_c;
  split(phi, coeffs, phi_r, phi_c);
  VecC g_r = VecC::Zero(phi_r.size()), g_c = VecC::Zero(phi_c.size());
  const double pref = 2.0 / coeffs.sigma2;
  for (const auto& qc : coeffs.per_param) {
    const double J = eval_diag(qc, phi_r, phi_c, coeffs.sigma2);
    const double w = -pref / (J * J);
    if (qc.A_r.size() > 0) g_r += w * (qc.A_r.conjugate() * phi_r + qc.b_r.conjugate());
    if (qc.A_c.size() > 0) g_c += w * (qc.A_c.conjugate() * phi_c + qc.b_c.conjugate());
  }
  VecC g(phi.size());
  g << g_r, g_c;
  return g;
}

VecC riemannian_grad(const VecC& phi, const VecC& egrad) {
  const VecR radial = (egrad.cwiseProduct(phi.conjugate())).real();
  return egrad - radial.cast<cxd>().cwiseProduct(phi);
}

RcgResult optimize(const FimCoeffs& coeffs, const VecC& phi0, const RcgConfig& cfg) {
  RcgResult res;
  res.phi = retract(phi0);
  double f = objective(res.phi, coeffs);
  res.trace.push_back(f);

  VecC grad = riemannian_grad(res.phi, euclidean_grad(res.phi, coeffs));
  VecC dir = -grad;
  double grad_norm2 = grad.squaredNorm();

  for (int k = 0; k < cfg.max_iter; ++k) {
    res.iterations = k + 1;
    // loss of descent forces a steepest-descent restart
    double slope = 2.0 * grad.dot(dir).real();
    if (slope >= 0.0) {
      dir = -grad;
      slope = -2.0 * grad_norm2;
    }

    double step = cfg.step0;
    double f_new = f;
    VecC phi_new = res.phi;
    bool accepted = false;
    for (int bt = 0; bt < cfg.max_backtracks; ++bt) {
      phi_new = retract(res.phi + step * dir);
      f_new = objective(phi_new, coeffs);
      if (f_new <= f + cfg.armijo_c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= cfg.armijo_shrink;
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }

    const double decrease = f - f_new;
    res.phi = phi_new;
    f = f_new;
    res.trace.push_back(f);

    const VecC grad_new = riemannian_grad(res.phi, euclidean_grad(res.phi, coeffs));
    const double grad_norm2_new = grad_new.squaredNorm();
    if (decrease < cfg.eps_R * std::max(1.0, std::abs(f))) break;

    if ((k + 1) % cfg.fr_reset == 0 || grad_norm2 <= 0.0) {
      dir = -grad_new;
    } else {
      const double rho_fr = grad_norm2_new / grad_norm2;
      // transport the previous direction into the current tangent space
      const VecC transported = riemannian_grad(res.phi, dir);
      dir = -grad_new + rho_fr * transported;
    }
    grad = grad_new;
    grad_norm2 = grad_norm2_new;
  }
  res.objective = f;
  return res;
}

}  // namespace jsce
