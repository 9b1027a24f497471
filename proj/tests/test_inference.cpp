#include <catch2/catch.hpp>

#include <cmath>

#include "dyadnet/inference.hpp"
#include "dyadnet/rng.hpp"
#include "support/oracles.hpp"

using namespace dyadnet;
using testsupport::simulate_clean_network;

namespace {

// Quadruple-sum oracle for Xi, straight from the definition.
std::vector<Vec> xi_quadruple_sum(const FitResult& fit, const NetworkData& data, Family family) {
  const int n = data.n;
  const int kdim = data.dim_x;
  const auto& p = fit.params;
  const auto blocks = fit.factor->inverse_phi_blocks();

  Mat cross(n * n, kdim);
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t) {
      if (s == t) continue;
      double eta = p.alpha[s] + p.gamma[t];
      const double* xv = data.covariates(s, t);
      for (int k = 0; k < kdim; ++k) eta += xv[k] * p.beta[k];
      const auto d = link_derivs(family, data.outcome(s, t), eta);
      for (int k = 0; k < kdim; ++k) cross(s * n + t, k) = d.d2 * xv[k];
    }

  std::vector<Vec> xi(static_cast<std::size_t>(n) * n, Vec::Zero(kdim));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      Vec acc = Vec::Zero(kdim);
      for (int s = 0; s < n; ++s)
        for (int t = 0; t < n; ++t) {
          if (s == t) continue;
          const double gamma_ijst =
              blocks.aa(i, s) + blocks.ga(j, s) + blocks.ag(i, t) + blocks.gg(j, t);
          acc += gamma_ijst * cross.row(s * n + t).transpose();
        }
      xi[static_cast<std::size_t>(i) * n + j] = -acc / (n - 1.0);
    }
  return xi;
}

}  // namespace

TEST_CASE("collapsed Xi equals the quadruple sum at N=10") {
  const int n = 10;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 1.0;
  const auto data = simulate_clean_network(Family::kProbit, n, truth.beta, truth.alpha,
                                           truth.gamma, 11);
  const auto res = fit(data, Family::kProbit);
  REQUIRE(res.converged);

  const auto fast = compute_partialled_score(res, data, Family::kProbit);
  const auto slow = xi_quadruple_sum(res, data, Family::kProbit);
  double max_gap = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      max_gap = std::max(max_gap,
                         (fast.Xi(i, j) - slow[static_cast<std::size_t>(i) * n + j])
                             .lpNorm<Eigen::Infinity>());
    }
  CHECK(max_gap < 1e-10);
}

TEST_CASE("two-way demeaned covariates give zero Xi in the gaussian family") {
  const int n = 12;
  NetworkData d = make_network(n, 1);
  RngStream rng(21, {4});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      d.covariates(i, j)[0] = rng.normal();
      d.outcome(i, j) = rng.normal();
    }
  // alternating projections to exact zero row and column margins
  for (int sweep = 0; sweep < 400; ++sweep) {
    for (int i = 0; i < n; ++i) {
      double m = 0.0;
      for (int j = 0; j < n; ++j)
        if (i != j) m += d.covariates(i, j)[0];
      m /= (n - 1);
      for (int j = 0; j < n; ++j)
        if (i != j) d.covariates(i, j)[0] -= m;
    }
    for (int j = 0; j < n; ++j) {
      double m = 0.0;
      for (int i = 0; i < n; ++i)
        if (i != j) m += d.covariates(i, j)[0];
      m /= (n - 1);
      for (int i = 0; i < n; ++i)
        if (i != j) d.covariates(i, j)[0] -= m;
    }
  }
  const auto res = fit(d, Family::kGaussianNls);
  REQUIRE(res.converged);
  const auto ps = compute_partialled_score(res, d, Family::kGaussianNls);
  double max_xi = 0.0, max_diff = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      max_xi = std::max(max_xi, ps.Xi(i, j).lpNorm<Eigen::Infinity>());
      // with Xi = 0 the partialled score is the raw beta score
      double eta = res.params.pi(i, j) + d.covariates(i, j)[0] * res.params.beta[0];
      const auto ld = link_derivs(Family::kGaussianNls, d.outcome(i, j), eta);
      max_diff = std::max(max_diff,
                          std::fabs(ps.D(i, j)[0] - ld.d1 * d.covariates(i, j)[0]));
    }
  CHECK(max_xi < 1e-8);
  CHECK(max_diff < 1e-8);
}

TEST_CASE("partialled scores sum to zero at the optimum") {
  const int n = 16;
  ParameterSet truth = ParameterSet::zeros(n, 2);
  truth.beta << 1.0, -0.5;
  const auto data = simulate_clean_network(Family::kLogit, n, truth.beta, truth.alpha,
                                           truth.gamma, 31);
  const auto res = fit(data, Family::kLogit);
  REQUIRE(res.converged);
  const auto ps = compute_partialled_score(res, data, Family::kLogit);
  Vec total = Vec::Zero(2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) total += ps.D(i, j);
  CHECK(total.lpNorm<Eigen::Infinity>() < 1e-6 * n);
}

TEST_CASE("W from the factorization equals the dense concentrated Hessian") {
  const int n = 10;
  ParameterSet truth = ParameterSet::zeros(n, 2);
  truth.beta << 0.6, -0.4;
  const auto data = simulate_clean_network(Family::kProbit, n, truth.beta, truth.alpha,
                                           truth.gamma, 37);
  const auto res = fit(data, Family::kProbit);
  REQUIRE(res.converged);
  const auto ps = compute_partialled_score(res, data, Family::kProbit);
  const auto var = sandwich_variance(res, ps, data);

  const Mat K = testsupport::naive_neg_hessian(data, Family::kProbit, res.params, n - 1, 1.0);
  const Mat kbb = K.topLeftCorner(2, 2);
  const Mat kbf = K.topRightCorner(2, 2 * n);
  const Mat h = K.bottomRightCorner(2 * n, 2 * n);
  const Mat w_dense = (kbb - kbf * h.fullPivLu().solve(kbf.transpose())) / n;
  CHECK((var.w_hat - w_dense).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("omega is dyad symmetric and homogeneous of degree two") {
  const int n = 9;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 0.8;
  const auto data = simulate_clean_network(Family::kProbit, n, truth.beta, truth.alpha,
                                           truth.gamma, 41);
  const auto res = fit(data, Family::kProbit);
  REQUIRE(res.converged);
  auto ps = compute_partialled_score(res, data, Family::kProbit);
  const auto var = sandwich_variance(res, ps, data);

  // swapping D_ij and D_ji inside every dyad leaves omega unchanged
  auto swapped = ps;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      std::swap(swapped.d_beta_ell[static_cast<std::size_t>(i) * n + j],
                swapped.d_beta_ell[static_cast<std::size_t>(j) * n + i]);
  const auto var_swapped = sandwich_variance(res, swapped, data);
  CHECK((var.omega_hat - var_swapped.omega_hat).lpNorm<Eigen::Infinity>() < 1e-14);

  // scaling all D by c scales omega by c^2 exactly
  auto scaled = ps;
  for (auto& v : scaled.d_beta_ell) v *= 3.0;
  const auto var_scaled = sandwich_variance(res, scaled, data);
  CHECK((var_scaled.omega_hat - 9.0 * var.omega_hat).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("information equality approximately holds for a correctly specified MLE") {
  const int n = 100;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 1.0;
  RngStream rng(3, {8});
  for (int i = 0; i < n; ++i) {
    truth.alpha[i] = 0.3 * rng.normal();
    truth.gamma[i] = 0.3 * rng.normal();
  }
  truth.enforce_normalization();
  const auto data = simulate_clean_network(Family::kProbit, n, truth.beta, truth.alpha,
                                           truth.gamma, 47);
  const auto res = fit(data, Family::kProbit);
  REQUIRE(res.converged);
  const auto ps = compute_partialled_score(res, data, Family::kProbit);
  const auto var = sandwich_variance(res, ps, data);
  const double gap = (var.w_hat - var.omega_hat).norm() / var.w_hat.norm();
  CHECK(gap < 0.1);
}

TEST_CASE("variance is invariant to node relabeling at a fixed fit") {
  const int n = 10;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 0.9;
  const auto data = simulate_clean_network(Family::kLogit, n, truth.beta, truth.alpha,
                                           truth.gamma, 53);
  const auto res = fit(data, Family::kLogit);
  REQUIRE(res.converged);
  const auto var = sandwich_variance(res, compute_partialled_score(res, data, Family::kLogit),
                                     data);

  const auto shuffled = relabel(data, 1234);
  const auto res2 = fit(shuffled, Family::kLogit);
  REQUIRE(res2.converged);
  const auto var2 = sandwich_variance(
      res2, compute_partialled_score(res2, shuffled, Family::kLogit), shuffled);
  CHECK(std::fabs(var.v_hat(0, 0) - var2.v_hat(0, 0)) < 1e-8 * std::fabs(var.v_hat(0, 0)) + 1e-8);
}

TEST_CASE("t statistics and p values") {
  VarianceEstimate var;
  var.se = Vec::Ones(1);
  Vec beta(1), null(1);
  beta << 0.0;
  null << 0.0;
  auto ts = t_statistics(beta, null, var);
  CHECK(ts.t[0] == 0.0);
  CHECK(ts.p[0] == Approx(1.0));

  beta << 1.959963985;
  ts = t_statistics(beta, null, var);
  CHECK(ts.p[0] == Approx(0.05).epsilon(1e-6));
}

TEST_CASE("alternative Xi variant runs and stays finite") {
  const int n = 8;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 0.5;
  const auto data = simulate_clean_network(Family::kProbit, n, truth.beta, truth.alpha,
                                           truth.gamma, 67);
  const auto res = fit(data, Family::kProbit);
  REQUIRE(res.converged);
  const auto standard = compute_partialled_score(res, data, Family::kProbit, XiVariant::kStandard);
  const auto alternative =
      compute_partialled_score(res, data, Family::kProbit, XiVariant::kAlternative);
  CHECK(standard.Xi(0, 1).allFinite());
  CHECK(alternative.Xi(0, 1).allFinite());
}
