// Newton maximization of the penalized objective
//
//   L(beta, alpha, gamma) = (1/normalizer) sum_{i != j} w_ij ell_ij(beta, alpha_i + gamma_j)
//                           - (b / 2N) (sum alpha - sum gamma)^2
//
// exploiting the arrow structure of the Hessian. Writing K = -d2 L (positive
// definite), the fixed-effect block is
//
//   H = [ D1 , M  ]          D1, D2 diagonal, M_ij from single edges,
//       [ M' , D2 ]  + (b/N) v v',   v = (1_N, -1_N)
//
// and a Newton step solves K in three stages: the alpha block D1 + (b/N) 11'
// is diagonal-plus-rank-one (Sherman-Morrison), the gamma block reduces to a
// dense N x N Schur complement (Cholesky), and beta to a dim(beta) Schur
// complement, which equals N times the concentrated Hessian W_N used by the
// variance estimator and the weighted jackknife.
#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dyadnet/common.hpp"
#include "dyadnet/model_family.hpp"
#include "dyadnet/network_data.hpp"
#include "dyadnet/parameters.hpp"

namespace dyadnet {

struct FitConfig {
  int max_iterations = 200;
  double gradient_tolerance = 1e-9;  // max-norm of the full score
  double penalty_b = 1.0;
  double line_search_shrink = 0.5;
  double line_search_slope = 1e-4;
  std::optional<ParameterSet> warm_start;
};

struct FitDiagnostics {
  long clamp_events = 0;        // index guard-band hits in the last sweep
  int backtracks = 0;           // total line-search shrink steps
  int ridge_retries = 0;        // Cholesky rescues
  int anchored_alpha = 0;       // effects with no included observations, pinned at 0
  int anchored_gamma = 0;
};

// Factorization of K at a parameter point. Solves full and phi-only systems
// and exposes the four N x N blocks of H^{-1} = (-d2_phi L)^{-1}.
class HessianFactor {
 public:
  int n = 0;
  int kdim = 0;
  double c = 0.0;  // b/N
  Vec d1, d2;      // H diagonals before the penalty (plus anchor terms)
  Mat B;           // alpha-gamma block of H: M - cJ
  Mat Cb_alpha;    // N x K, row i = -(1/norm) sum_j w_ij d_betapi ell_ij
  Mat Cb_gamma;    // N x K, row j analogous over senders
  Mat Kbb;         // K x K, -d2_beta L

  void factorize(int* ridge_retries) {
    dinv_ = d1.cwiseInverse();
    const double sum_dinv = dinv_.sum();
    kappa_ = c / (1.0 + c * sum_dinv);

    // Sg = D2 + cJ - B' A^{-1} B,  A^{-1} = D1^{-1} - kappa d d',  d = D1^{-1} 1
    Mat DB = dinv_.asDiagonal() * B;
    Vec w = B.transpose() * dinv_;
    Sg_.resize(n, n);
    Sg_.noalias() = -B.transpose() * DB;
    Sg_.noalias() += kappa_ * w * w.transpose();
    Sg_.array() += c;
    Sg_.diagonal() += d2;

    const double ridge_base = std::max(Sg_.diagonal().cwiseAbs().maxCoeff(), 1e-8);
    double ridge = 1e-12 * ridge_base;
    for (int attempt = 0;; ++attempt) {
      Sg_llt_.compute(Sg_);
      if (Sg_llt_.info() == Eigen::Success) break;
      if (attempt >= 5)
        throw NumericalError("SingularHessian: gamma Schur complement not positive definite (min diag node " +
                             std::to_string(min_index(d2) + 1) + ")");
      Sg_.diagonal().array() += ridge;
      ridge *= 100.0;
      if (ridge_retries) ++*ridge_retries;
    }

    // Z = H^{-1} K_phibeta, beta Schur = Kbb - K_phibeta' Z
    Z_.resize(2 * n, kdim);
    for (int k = 0; k < kdim; ++k) {
      Vec col(2 * n);
      col.head(n) = Cb_alpha.col(k);
      col.tail(n) = Cb_gamma.col(k);
      Z_.col(k) = solve_phi(col);
    }
    beta_schur_ = Kbb;
    beta_schur_.noalias() -= Cb_alpha.transpose() * Z_.topRows(n);
    beta_schur_.noalias() -= Cb_gamma.transpose() * Z_.bottomRows(n);
    beta_schur_ = 0.5 * (beta_schur_ + beta_schur_.transpose()).eval();
    const double bs_base = std::max(beta_schur_.diagonal().cwiseAbs().maxCoeff(), 1e-8);
    double bs_ridge = 1e-10 * bs_base;
    for (int attempt = 0;; ++attempt) {
      bs_llt_.compute(beta_schur_);
      if (bs_llt_.info() == Eigen::Success) break;
      if (attempt >= 5)
        throw NumericalError("SingularHessian: concentrated beta Hessian not positive definite");
      // a nearly separated subsample can cancel the concentrated information
      // to a non-positive value; floor it and flag the rescue
      beta_schur_.diagonal().array() += bs_ridge;
      bs_ridge *= 100.0;
      if (ridge_retries) ++*ridge_retries;
    }
  }

  // H x = r for the 2N fixed-effect block.
  Vec solve_phi(const Vec& r) const {
    Vec t = apply_Ainv(r.head(n));
    Vec xg = Sg_llt_.solve(r.tail(n) - B.transpose() * t);
    Vec xa = apply_Ainv(r.head(n) - B * xg);
    Vec x(2 * n);
    x.head(n) = xa;
    x.tail(n) = xg;
    return x;
  }

  // K x = g for the full (beta, alpha, gamma) system.
  Vec solve_full(const Vec& g) const {
    Vec y = solve_phi(g.tail(2 * n));
    Vec rhs = g.head(kdim);
    rhs.noalias() -= Cb_alpha.transpose() * y.head(n);
    rhs.noalias() -= Cb_gamma.transpose() * y.tail(n);
    Vec db = bs_llt_.solve(rhs);
    Vec x(kdim + 2 * n);
    x.head(kdim) = db;
    x.tail(2 * n) = y - Z_ * db;
    return x;
  }

  // N W_N: the beta Hessian after concentrating out the fixed effects.
  const Mat& beta_schur() const { return beta_schur_; }

  struct PhiBlocks {
    Mat aa, ag, ga, gg;
  };

  // Four N x N blocks of H^{-1} (inverse of the penalized negative Hessian of
  // the fixed effects).
  PhiBlocks inverse_phi_blocks() const {
    PhiBlocks blocks;
    blocks.gg = Sg_llt_.solve(Mat::Identity(n, n));
    Mat T = dinv_.asDiagonal() * B;
    T.noalias() -= kappa_ * dinv_ * (dinv_.transpose() * B);
    blocks.ag = -T * blocks.gg;
    blocks.aa = T * blocks.gg * T.transpose();
    blocks.aa += Mat(dinv_.asDiagonal());
    blocks.aa.noalias() -= kappa_ * dinv_ * dinv_.transpose();
    blocks.aa = 0.5 * (blocks.aa + blocks.aa.transpose()).eval();
    blocks.gg = 0.5 * (blocks.gg + blocks.gg.transpose()).eval();
    blocks.ga = blocks.ag.transpose();
    return blocks;
  }

 private:
  static int min_index(const Vec& v) {
    int idx = 0;
    v.minCoeff(&idx);
    return idx;
  }

  Vec apply_Ainv(const Vec& x) const {
    return dinv_.cwiseProduct(x) - (kappa_ * dinv_.dot(x)) * dinv_;
  }

  Vec dinv_;
  double kappa_ = 0.0;
  Mat Sg_;
  Eigen::LLT<Mat> Sg_llt_;
  Mat Z_;
  Mat beta_schur_;
  Eigen::LLT<Mat> bs_llt_;
};

struct FitResult {
  ParameterSet params;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double score_norm = 0.0;
  double normalizer = 0.0;
  double penalty_b = 1.0;
  std::vector<std::uint8_t> obs_weights;  // empty: full sample
  std::shared_ptr<const HessianFactor> factor;  // at the final parameters
  FitDiagnostics diag;

  bool included(int i, int j) const {
    return obs_weights.empty() || obs_weights[static_cast<std::size_t>(i) * params.n() + j] != 0;
  }
};

namespace detail {

// One pass over the included edges: objective value and, when blocks is set,
// the full gradient and Hessian blocks of the penalized objective.
struct SweepResult {
  double value = 0.0;
  Vec grad;  // (K + 2N)
  long clamp_events = 0;
};

inline SweepResult sweep(const NetworkData& data, Family family, const ParameterSet& p,
                         const std::vector<std::uint8_t>& mask, double normalizer, double b,
                         HessianFactor* blocks) {
  const int n = data.n;
  const int kdim = data.dim_x;
  const double inv_norm = 1.0 / normalizer;
  SweepResult out;
  out.grad = Vec::Zero(kdim + 2 * n);
  auto g_beta = out.grad.head(kdim);
  auto g_alpha = out.grad.segment(kdim, n);
  auto g_gamma = out.grad.tail(n);

  if (blocks) {
    blocks->n = n;
    blocks->kdim = kdim;
    blocks->c = b / n;
    blocks->d1 = Vec::Zero(n);
    blocks->d2 = Vec::Zero(n);
    blocks->B = Mat::Zero(n, n);
    blocks->Cb_alpha = Mat::Zero(n, kdim);
    blocks->Cb_gamma = Mat::Zero(n, kdim);
    blocks->Kbb = Mat::Zero(kdim, kdim);
  }

  for (int i = 0; i < n; ++i) {
    const double ai = p.alpha[i];
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!mask.empty() && mask[static_cast<std::size_t>(i) * n + j] == 0) continue;
      const double* xv = data.covariates(i, j);
      double eta = ai + p.gamma[j];
      for (int k = 0; k < kdim; ++k) eta += xv[k] * p.beta[k];
      const LinkDerivs d = link_derivs(family, data.outcome(i, j), eta);
      if (d.clamped) ++out.clamp_events;
      out.value += inv_norm * d.value;
      const double s1 = inv_norm * d.d1;
      g_alpha[i] += s1;
      g_gamma[j] += s1;
      for (int k = 0; k < kdim; ++k) g_beta[k] += s1 * xv[k];
      if (blocks) {
        const double omega = -inv_norm * d.d2;  // contribution to -d2 L
        blocks->d1[i] += omega;
        blocks->d2[j] += omega;
        blocks->B(i, j) = omega;
        for (int k = 0; k < kdim; ++k) {
          blocks->Cb_alpha(i, k) += omega * xv[k];
          blocks->Cb_gamma(j, k) += omega * xv[k];
          for (int k2 = k; k2 < kdim; ++k2) blocks->Kbb(k, k2) += omega * xv[k] * xv[k2];
        }
      }
    }
  }

  const double gap = p.normalization_gap();
  out.value -= 0.5 * b / n * gap * gap;
  g_alpha.array() -= b / n * gap;
  g_gamma.array() += b / n * gap;
  if (blocks) {
    for (int k = 0; k < kdim; ++k)
      for (int k2 = 0; k2 < k; ++k2) blocks->Kbb(k, k2) = blocks->Kbb(k2, k);
    // penalty couples every alpha to every gamma, same-index pairs included
    blocks->B.array() -= blocks->c;
  }
  return out;
}

inline double objective_only(const NetworkData& data, Family family, const ParameterSet& p,
                             const std::vector<std::uint8_t>& mask, double normalizer, double b) {
  const int n = data.n;
  const int kdim = data.dim_x;
  double value = 0.0;
  for (int i = 0; i < n; ++i) {
    const double ai = p.alpha[i];
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!mask.empty() && mask[static_cast<std::size_t>(i) * n + j] == 0) continue;
      const double* xv = data.covariates(i, j);
      double eta = ai + p.gamma[j];
      for (int k = 0; k < kdim; ++k) eta += xv[k] * p.beta[k];
      value += link_value(family, data.outcome(i, j), eta);
    }
  }
  const double gap = p.normalization_gap();
  return value / normalizer - 0.5 * b / n * gap * gap;
}

// Phi^{-1}(q) by bisection; starting values only need a few digits.
inline double norm_quantile(double q) {
  double lo = -10.0, hi = 10.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (norm_cdf(mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Inverse-link transform of a smoothed row/column mean outcome.
inline double start_transform(Family family, double mean, double count) {
  const double eps = 1.0 / (count + 2.0);
  switch (family) {
    case Family::kProbit:
      return norm_quantile(std::min(std::max(mean, eps), 1.0 - eps));
    case Family::kLogit: {
      const double q = std::min(std::max(mean, eps), 1.0 - eps);
      return std::log(q / (1.0 - q));
    }
    case Family::kGaussianNls:
      return mean;
    case Family::kPoissonQmle:
      return std::log(std::max(mean, eps));
  }
  return 0.0;
}

}  // namespace detail

// Default starting values: beta = 0, fixed effects from inverse-link row and
// column means, split evenly and level-shifted onto the normalization.
inline ParameterSet default_start(const NetworkData& data, Family family,
                                  const std::vector<std::uint8_t>& mask) {
  const int n = data.n;
  ParameterSet p = ParameterSet::zeros(n, data.dim_x);
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0, row_cnt = 0.0, col_sum = 0.0, col_cnt = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (mask.empty() || mask[static_cast<std::size_t>(i) * n + j]) {
        row_sum += data.outcome(i, j);
        row_cnt += 1.0;
      }
      if (mask.empty() || mask[static_cast<std::size_t>(j) * n + i]) {
        col_sum += data.outcome(j, i);
        col_cnt += 1.0;
      }
    }
    if (row_cnt > 0)
      p.alpha[i] = 0.5 * detail::start_transform(family, row_sum / row_cnt, row_cnt);
    if (col_cnt > 0)
      p.gamma[i] = 0.5 * detail::start_transform(family, col_sum / col_cnt, col_cnt);
  }
  p.enforce_normalization();
  return p;
}

// Maximizes the penalized objective over (beta, alpha, gamma).
//
// mask: per-edge 0/1 inclusion (empty = full sample). normalizer: per-effect
// observation count, N-1 for the full sample and N-1-l for leave-out samples;
// it rescales the objective without moving the maximizer. Fixed effects with
// no included observations are anchored at zero (quadratic anchor) so masked
// sub-designs like receiver halves stay well posed; anchored counts land in
// the diagnostics and such fits skip the exact normalization projection.
inline FitResult fit(const NetworkData& data, Family family, const FitConfig& config = {},
                     std::vector<std::uint8_t> mask = {}, double normalizer = 0.0) {
  const int n = data.n;
  const int kdim = data.dim_x;
  if (normalizer <= 0.0) normalizer = n - 1;
  if (config.penalty_b <= 0.0) throw ValidationError("penalty_b must be positive");
  if (config.gradient_tolerance <= 0.0) throw ValidationError("gradient_tolerance must be positive");

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && (mask.empty() || mask[static_cast<std::size_t>(i) * n + j]))
        check_outcome_domain(family, data.outcome(i, j));

  // Anchors: effects with no included observations.
  std::vector<std::uint8_t> anchor_alpha(n, 0), anchor_gamma(n, 0);
  int n_anchor_alpha = 0, n_anchor_gamma = 0;
  if (!mask.empty()) {
    for (int i = 0; i < n; ++i) {
      bool has_out = false, has_in = false;
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        if (mask[static_cast<std::size_t>(i) * n + j]) has_out = true;
        if (mask[static_cast<std::size_t>(j) * n + i]) has_in = true;
      }
      if (!has_out) anchor_alpha[i] = 1, ++n_anchor_alpha;
      if (!has_in) anchor_gamma[i] = 1, ++n_anchor_gamma;
    }
  }
  const bool anchored = n_anchor_alpha + n_anchor_gamma > 0;

  FitResult result;
  result.params = config.warm_start ? *config.warm_start : default_start(data, family, mask);
  result.normalizer = normalizer;
  result.penalty_b = config.penalty_b;
  result.obs_weights = std::move(mask);

  auto apply_anchors = [&](detail::SweepResult& s, HessianFactor* blocks) {
    if (!anchored) return;
    for (int i = 0; i < n; ++i) {
      if (anchor_alpha[i]) {
        s.value -= 0.5 * result.params.alpha[i] * result.params.alpha[i];
        s.grad[kdim + i] -= result.params.alpha[i];
        if (blocks) blocks->d1[i] += 1.0;
      }
      if (anchor_gamma[i]) {
        s.value -= 0.5 * result.params.gamma[i] * result.params.gamma[i];
        s.grad[kdim + n + i] -= result.params.gamma[i];
        if (blocks) blocks->d2[i] += 1.0;
      }
    }
  };
  auto anchored_value = [&](const ParameterSet& p) {
    double v = detail::objective_only(data, family, p, result.obs_weights, normalizer,
                                      config.penalty_b);
    for (int i = 0; i < n; ++i) {
      if (anchor_alpha[i]) v -= 0.5 * p.alpha[i] * p.alpha[i];
      if (anchor_gamma[i]) v -= 0.5 * p.gamma[i] * p.gamma[i];
    }
    return v;
  };

  auto factor = std::make_shared<HessianFactor>();
  double value = 0.0;
  bool factor_current = false;
  for (int it = 0; it <= config.max_iterations; ++it) {
    detail::SweepResult s = detail::sweep(data, family, result.params, result.obs_weights,
                                          normalizer, config.penalty_b, factor.get());
    apply_anchors(s, factor.get());
    value = s.value;
    result.objective = s.value;
    result.score_norm = s.grad.lpNorm<Eigen::Infinity>();
    result.diag.clamp_events = s.clamp_events;
    result.iterations = it;
    if (result.score_norm <= config.gradient_tolerance) {
      result.converged = true;
      factor->factorize(&result.diag.ridge_retries);
      factor_current = true;
      break;
    }
    if (it == config.max_iterations) break;
    factor_current = false;

    factor->factorize(&result.diag.ridge_retries);
    const Vec step = factor->solve_full(s.grad);
    const double slope = s.grad.dot(step);

    // allow for objective evaluation noise so full Newton steps are not
    // rejected once the surface is flat at double precision
    const double noise = 1e-13 * (1.0 + std::fabs(value));
    double t = 1.0;
    bool accepted = false;
    ParameterSet trial = result.params;
    for (int ls = 0; ls <= 60; ++ls) {
      trial.beta = result.params.beta + t * step.head(kdim);
      trial.alpha = result.params.alpha + t * step.segment(kdim, n);
      trial.gamma = result.params.gamma + t * step.tail(n);
      const double trial_value = anchored_value(trial);
      if (trial_value >= value + config.line_search_slope * t * slope - noise) {
        accepted = true;
        break;
      }
      ++result.diag.backtracks;
      t *= config.line_search_shrink;
    }
    if (!accepted) break;  // numerically dead step: report non-convergence
    result.params = std::move(trial);
  }

  if (!factor_current) {
    // non-convergent exit: refresh blocks so the handle matches result.params
    detail::SweepResult s = detail::sweep(data, family, result.params, result.obs_weights,
                                          normalizer, config.penalty_b, factor.get());
    apply_anchors(s, factor.get());
    result.objective = s.value;
    result.score_norm = s.grad.lpNorm<Eigen::Infinity>();
    factor->factorize(&result.diag.ridge_retries);
  }

  result.diag.anchored_alpha = n_anchor_alpha;
  result.diag.anchored_gamma = n_anchor_gamma;
  if (result.converged && !anchored) {
    // Exact projection onto the normalization manifold: pi and the Hessian are
    // unchanged, the penalty term becomes exactly zero.
    const double gap = result.params.normalization_gap();
    result.params.enforce_normalization();
    result.objective += 0.5 * config.penalty_b / n * gap * gap;
  }
  result.factor = std::move(factor);
  return result;
}

// Solve K x = rhs at the fitted point; rhs in (beta, alpha, gamma) order.
inline Vec solve_structured(const HessianFactor& factor, const Vec& rhs) {
  if (rhs.size() != factor.kdim + 2 * factor.n)
    throw ValidationError("solve_structured: rhs has wrong length");
  return factor.solve_full(rhs);
}

inline HessianFactor::PhiBlocks inverse_phi_blocks(const HessianFactor& factor) {
  return factor.inverse_phi_blocks();
}

}  // namespace dyadnet
