// Sandwich variance for the common parameters.
//
// The influence function for beta is the partialled score
//
//   D_beta ell_ij = d_beta ell_ij - Xi_ij d_pi ell_ij,
//   Xi_ij = -(1/(N-1)) sum_s sum_{t != s} Gamma_ijst d_betapi ell_st,
//   Gamma_ijst = (Hinv_aa)_is + (Hinv_ga)_js + (Hinv_ag)_it + (Hinv_gg)_jt,
//
// with Hinv the inverse of the penalized negative fixed-effect Hessian.
// Gamma decomposes into four row/column sums, so the quadruple sum collapses
// to O(N^2 dim beta) after two matrix-vector products per covariate.
//
// The meat matrix clusters by dyad: Omega = (1/(N(N-1))) sum_{j<i}
// (D_ij + D_ji)(D_ij + D_ji)'. Standard errors follow the N-rate:
// se_r = sqrt(V_rr)/N for V = W^{-1} Omega W^{-1}.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dyadnet/common.hpp"
#include "dyadnet/estimator.hpp"
#include "dyadnet/model_family.hpp"
#include "dyadnet/network_data.hpp"

namespace dyadnet {

// An alternative printed form of Xi circulates with prefactor 1/N instead of
// 1/(N-1), index pattern (aa)is,(ga)jt,(ag)it,(gg)st, and blocks of
// (d2_phi L)^{-1} = -Hinv. It is exposed for comparison only; kStandard is
// the form consistent with the estimator's influence-function expansion and
// the default everywhere.
enum class XiVariant { kStandard, kAlternative };

struct PartialledScore {
  // row-major N*N arrays of dim-beta vectors
  std::vector<Vec> xi;
  std::vector<Vec> d_beta_ell;
  int n = 0;

  const Vec& Xi(int i, int j) const { return xi[static_cast<std::size_t>(i) * n + j]; }
  const Vec& D(int i, int j) const { return d_beta_ell[static_cast<std::size_t>(i) * n + j]; }
};

inline PartialledScore compute_partialled_score(const FitResult& fit, const NetworkData& data,
                                                Family family,
                                                XiVariant variant = XiVariant::kStandard) {
  if (!fit.converged) throw NumericalError("partialled score needs a converged fit");
  const int n = data.n;
  const int kdim = data.dim_x;
  const auto& p = fit.params;

  // Per-edge scores and cross-derivatives at the fitted parameters.
  Mat score_beta(n * n, kdim);   // d_beta ell_ij
  Vec score_pi(n * n);           // d_pi ell_ij
  Mat cross(n * n, kdim);        // d_betapi ell_ij
  Mat row_sum = Mat::Zero(n, kdim);  // r_s = sum_t cross_st
  Mat col_sum = Mat::Zero(n, kdim);  // c_t = sum_s cross_st
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const int e = i * n + j;
      const double* xv = data.covariates(i, j);
      double eta = p.alpha[i] + p.gamma[j];
      for (int k = 0; k < kdim; ++k) eta += xv[k] * p.beta[k];
      const auto d = link_derivs(family, data.outcome(i, j), eta);
      score_pi[e] = d.d1;
      for (int k = 0; k < kdim; ++k) {
        score_beta(e, k) = d.d1 * xv[k];
        cross(e, k) = d.d2 * xv[k];
        row_sum(i, k) += cross(e, k);
        col_sum(j, k) += cross(e, k);
      }
    }

  const auto blocks = fit.factor->inverse_phi_blocks();
  // u_i = (AA r + AG c)_i, v_j = (GA r + GG c)_j, Xi_ij = -(u_i + v_j)/(N-1)
  Mat u(n, kdim), v(n, kdim);
  Vec shared = Vec::Zero(kdim);
  double prefactor;
  if (variant == XiVariant::kStandard) {
    u = blocks.aa * row_sum + blocks.ag * col_sum;
    v = blocks.ga * row_sum + blocks.gg * col_sum;
    prefactor = 1.0 / (n - 1.0);
  } else {
    // blocks of (d2_phi L)^{-1} = -Hinv; (aa)is r_s and (ag)it c_t vary with
    // i, (ga)jt c_t varies with j, and (gg)st q_st is one shared contraction
    u = -(blocks.aa * row_sum + blocks.ag * col_sum);
    v = -(blocks.ga * col_sum);
    for (int s = 0; s < n; ++s)
      for (int t = 0; t < n; ++t) {
        if (s == t) continue;
        shared -= blocks.gg(s, t) * cross.row(s * n + t).transpose();
      }
    prefactor = 1.0 / n;
  }

  PartialledScore out;
  out.n = n;
  out.xi.resize(static_cast<std::size_t>(n) * n);
  out.d_beta_ell.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int e = i * n + j;
      if (i == j) {
        out.xi[e] = Vec::Zero(kdim);
        out.d_beta_ell[e] = Vec::Zero(kdim);
        continue;
      }
      Vec xi_ij = -prefactor * (u.row(i) + v.row(j)).transpose();
      if (variant == XiVariant::kAlternative) xi_ij -= prefactor * shared;
      out.d_beta_ell[e] = score_beta.row(e).transpose() - xi_ij * score_pi[e];
      out.xi[e] = std::move(xi_ij);
    }
  return out;
}

struct VarianceEstimate {
  Mat w_hat;
  Mat omega_hat;
  Mat v_hat;
  Vec se;  // per coefficient, sqrt(V_rr)/N
  bool dyad_clustered = true;
};

inline VarianceEstimate sandwich_variance(const FitResult& fit, const PartialledScore& partialled,
                                          const NetworkData& data) {
  const int n = data.n;
  const int kdim = data.dim_x;
  VarianceEstimate out;
  out.w_hat = fit.factor->beta_schur() / n;

  Eigen::LLT<Mat> llt(out.w_hat);
  if (llt.info() != Eigen::Success)
    throw NumericalError("NotPositiveDefinite: concentrated Hessian W");

  out.omega_hat = Mat::Zero(kdim, kdim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) {
      const Vec pair = partialled.D(i, j) + partialled.D(j, i);
      out.omega_hat.noalias() += pair * pair.transpose();
    }
  out.omega_hat /= static_cast<double>(n) * (n - 1);

  const Mat w_inv = llt.solve(Mat::Identity(kdim, kdim));
  out.v_hat = w_inv * out.omega_hat * w_inv;
  out.se.resize(kdim);
  for (int k = 0; k < kdim; ++k) out.se[k] = std::sqrt(out.v_hat(k, k)) / n;
  return out;
}

struct TestStatistics {
  Vec t;
  Vec p;
};

// Two-sided tests of beta = beta_null against the normal limit of the
// corrected estimator.
inline TestStatistics t_statistics(const Vec& beta, const Vec& beta_null,
                                   const VarianceEstimate& variance) {
  const int kdim = static_cast<int>(beta.size());
  TestStatistics out;
  out.t.resize(kdim);
  out.p.resize(kdim);
  for (int k = 0; k < kdim; ++k) {
    out.t[k] = (beta[k] - beta_null[k]) / variance.se[k];
    out.p[k] = std::erfc(std::fabs(out.t[k]) * detail::kInvSqrt2);
  }
  return out;
}

}  // namespace dyadnet
