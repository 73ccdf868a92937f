#include "jsce/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace jsce {

namespace {

VecC stack_sections(const Observation& y) {
  VecC out(y.y_sr.size() + y.y_Br.size() + y.y_c.size());
  out << y.y_sr, y.y_Br, y.y_c;
  return out;
}

int block_of(const MeasurementModel& m, int col) {
  for (int b = 0; b < kNumBlocks; ++b)
    if (col < m.col_offset(b) + m.block_size(b)) return b;
  throw ConfigError("column index out of range");
}

}  // namespace

OmpResult omp(const Observation& y, const MeasurementModel& m,
              const std::array<int, kNumBlocks>& budget) {
  for (int b = 0; b < kNumBlocks; ++b)
    if (budget[b] < 0 || budget[b] > m.block_size(b))
      throw ConfigError("omp: budget exceeds block columns");
  const MatC F = m.dense();
  const VecC yv = stack_sections(y);
  const int n_cols = static_cast<int>(F.cols());
  VecR col_norm(n_cols);
  for (int j = 0; j < n_cols; ++j) col_norm(j) = std::max(F.col(j).norm(), 1e-300);

  std::array<int, kNumBlocks> remaining = budget;
  int total = 0;
  for (int b = 0; b < kNumBlocks; ++b) total += budget[b];

  OmpResult res;
  res.x = VecC::Zero(n_cols);
  VecC resid = yv;
  std::vector<char> picked(n_cols, 0);
  VecC coef;

  while (static_cast<int>(res.support.size()) < total) {
    int best = -1;
    double best_score = -1.0;
    for (int j = 0; j < n_cols; ++j) {
      if (picked[j] || remaining[block_of(m, j)] <= 0) continue;
      const double score = std::abs(F.col(j).dot(resid)) / col_norm(j);
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    if (best < 0) break;
    picked[best] = 1;
    res.support.push_back(best);
    --remaining[block_of(m, best)];

    MatC Fs(F.rows(), res.support.size());
    for (size_t i = 0; i < res.support.size(); ++i) Fs.col(i) = F.col(res.support[i]);
    Eigen::ColPivHouseholderQR<MatC> qr(Fs);
    if (qr.rank() < static_cast<Eigen::Index>(res.support.size())) {
      // latest atom made the selection rank deficient; drop it
      picked[best] = 0;
      res.support.pop_back();
      ++remaining[block_of(m, best)];
      break;
    }
    coef = qr.solve(yv);
    resid = yv - Fs * coef;
  }
  for (size_t i = 0; i < res.support.size(); ++i) res.x(res.support[i]) = coef(i);
  return res;
}

SblResult sbl(const Observation& y, const MeasurementModel& m, double sigma2,
              const SblConfig& cfg) {
  const MatC F_raw = m.dense();
  const VecC y_raw = stack_sections(y);
  const int n = static_cast<int>(F_raw.cols());
  const int rows = static_cast<int>(F_raw.rows());

  // normalize to O(1): unit columns, unit-RMS observation
  const double s_y = std::max(y_raw.norm() / std::sqrt(static_cast<double>(rows)), 1e-300);
  VecR cn(n);
  MatC F(rows, n);
  for (int j = 0; j < n; ++j) {
    cn(j) = std::max(F_raw.col(j).norm(), 1e-300);
    F.col(j) = F_raw.col(j) / cn(j);
  }
  const VecC yv = y_raw / s_y;
  const double s2 = sigma2 / (s_y * s_y);

  VecR alpha = VecR::Ones(n);
  std::vector<int> active(n);
  std::iota(active.begin(), active.end(), 0);

  SblResult res;
  res.x = VecC::Zero(n);
  VecC mu;
  MatC Sigma;
  for (int it = 0; it < cfg.max_iter; ++it) {
    const int na = static_cast<int>(active.size());
    if (na == 0) break;
    MatC Fa(rows, na);
    VecR wa(na);
    for (int i = 0; i < na; ++i) {
      Fa.col(i) = F.col(active[i]);
      wa(i) = 1.0 / alpha(active[i]);
    }
    // observation-space form: C = s2 I + Fa diag(w) Fa^H
    MatC Cobs = s2 * MatC::Identity(rows, rows);
    Cobs.noalias() += Fa * wa.asDiagonal() * Fa.adjoint();
    Eigen::LLT<MatC> llt(Cobs);
    if (llt.info() != Eigen::Success) throw NumericalError("sbl: covariance factorization failed");
    const VecC Cinv_y = llt.solve(yv);
    const MatC Cinv_Fa = llt.solve(Fa);
    mu = wa.asDiagonal() * (Fa.adjoint() * Cinv_y);
    Sigma = wa.asDiagonal().toDenseMatrix().cast<cxd>();
    Sigma.noalias() -=
        wa.asDiagonal() * (Fa.adjoint() * Cinv_Fa) * wa.asDiagonal();

    double log_evidence = -yv.dot(Cinv_y).real();
    for (int i = 0; i < rows; ++i) log_evidence -= 2.0 * std::log(std::abs(llt.matrixL()(i, i)));
    res.evidence.push_back(log_evidence);

    double max_rel = 0.0;
    std::vector<int> keep;
    for (int i = 0; i < na; ++i) {
      const double m2 = std::norm(mu(i)) + Sigma(i, i).real();
      const double a_new = 1.0 / std::max(m2, 1e-300);
      max_rel = std::max(max_rel, std::abs(a_new - alpha(active[i])) / a_new);
      alpha(active[i]) = a_new;
      if (a_new < cfg.prune_threshold) keep.push_back(i);
    }
    if (static_cast<int>(keep.size()) < na) {
      std::vector<int> next;
      for (int i : keep) next.push_back(active[i]);
      active = std::move(next);
      continue;
    }
    if (max_rel < cfg.tol) break;
  }

  // map the normalized posterior back to model units
  res.support = active;
  const int na = static_cast<int>(active.size());
  res.Sigma_support = MatC::Zero(na, na);
  for (int i = 0; i < na; ++i) {
    res.x(active[i]) = mu(i) * s_y / cn(active[i]);
    for (int j = 0; j < na; ++j)
      res.Sigma_support(i, j) =
          Sigma(i, j) * (s_y / cn(active[i])) * (s_y / cn(active[j]));
  }
  return res;
}

double nmse(const VecC& x_hat, const VecC& x_true) {
  const double denom = x_true.squaredNorm();
  if (denom <= 0.0) throw DomainError("nmse: reference vector has zero norm");
  return (x_hat - x_true).squaredNorm() / denom;
}

std::vector<int> hungarian(const MatR& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ConfigError("hungarian: square matrix required");
  // potentials method, 1-indexed internally
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, std::numeric_limits<double>::infinity());
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = std::numeric_limits<double>::infinity();
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

double matched_sq_error_sum(const std::vector<Vec2>& detected, const std::vector<Vec2>& truth,
                            double miss_penalty) {
  const int n_t = static_cast<int>(truth.size());
  const int n_d = static_cast<int>(detected.size());
  if (n_t == 0) return 0.0;
  const int n = std::max(n_t, n_d);
  const double pen2 = miss_penalty * miss_penalty;
  MatR cost = MatR::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i < n_t)
        cost(i, j) = j < n_d ? (truth[i] - detected[j]).squaredNorm() : pen2;
      else
        cost(i, j) = 0.0;  // phantom truth rows absorb surplus detections
    }
  const auto assign = hungarian(cost);
  double sum = 0.0;
  for (int i = 0; i < n_t; ++i) sum += cost(i, assign[i]);
  return sum;
}

double rmse(const std::vector<Vec2>& det_targets, const std::vector<Vec2>& det_scatterers,
            const Vec2& det_user, const GroundTruth& truth, double miss_penalty) {
  double sum = matched_sq_error_sum(det_targets, truth.targets, miss_penalty);
  sum += matched_sq_error_sum(det_scatterers, truth.scatterers, miss_penalty);
  sum += (det_user - truth.user).squaredNorm();
  const int count = truth.K() + truth.L() + 1;
  return std::sqrt(sum / count);
}

}  // namespace jsce
