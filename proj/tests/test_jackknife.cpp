#include <catch2/catch.hpp>

#include <cmath>

#include "dyadnet/jackknife.hpp"
#include "dyadnet/rng.hpp"
#include "support/oracles.hpp"

using namespace dyadnet;
using testsupport::simulate_clean_network;

namespace {

// Zero-residual gaussian data: every subsample reproduces beta = 0, phi = 0
// exactly, so every combination must collapse to the full-sample estimate.
NetworkData zero_residual_network(int n, std::uint64_t seed) {
  NetworkData d = make_network(n, 1);
  RngStream rng(seed, {12});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      d.covariates(i, j)[0] = rng.normal();
      d.outcome(i, j) = 0.0;
    }
  return d;
}

}  // namespace

TEST_CASE("all combinations collapse when every subestimate equals the full fit") {
  const auto data = zero_residual_network(9, 3);
  const auto partition = build_partition(9, 1);

  const auto j = jackknife_beta(data, Family::kGaussianNls, {}, partition);
  CHECK(std::fabs(j.beta_corrected[0]) < 1e-9);
  CHECK(std::fabs(j.beta_full[0]) < 1e-10);
  CHECK(j.all_converged);

  const auto wj = jackknife_weighted(data, Family::kGaussianNls, {}, partition);
  CHECK(std::fabs(wj.beta_corrected[0]) < 1e-9);

  const auto ss = jackknife_split_sample(data, Family::kGaussianNls, {}, 5);
  CHECK(std::fabs(ss.beta_corrected[0]) < 1e-9);

  const auto dd = jackknife_double(data, Family::kGaussianNls, {});
  CHECK(std::fabs(dd.beta_corrected[0]) < 1e-9);
  CHECK(dd.skipped.empty());
}

TEST_CASE("linear statistic identity: the combination returns per-node means exactly") {
  // A_i = (1/(N-1)) sum_s A_is against leave-out means (1/(N-2)) sum A_is 1k
  for (int n : {8, 15, 26}) {
    const auto partition = build_partition(n, 1);
    RngStream rng(n, {77});
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < n; ++s) a(i, s) = i == s ? 0.0 : rng.normal();

    for (int i = 0; i < n; ++i) {
      const double full = a.row(i).sum() / (n - 1.0);
      double mean_k = 0.0;
      for (int k = 1; k <= partition.n_sets; ++k) {
        const auto mask = partition.edge_mask(k);
        double sub = 0.0;
        for (int s = 0; s < n; ++s)
          if (s != i && mask[static_cast<std::size_t>(i) * n + s]) sub += a(i, s);
        mean_k += sub / (n - 2.0);
      }
      mean_k /= (n - 1.0);
      const double jackknifed = (n - 1.0) * full - (n - 2.0) * mean_k;
      CHECK(std::fabs(jackknifed - full) < 1e-12);
    }
  }
}

TEST_CASE("leave-l-out reduces to plain at l=1 and respects the block rule") {
  const int n = 13;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 0.8;
  const auto data = simulate_clean_network(Family::kLogit, n, truth.beta, truth.alpha,
                                           truth.gamma, 41);
  const auto p1 = build_partition(n, 1);
  const auto p3 = build_partition(n, 3);
  const auto j1 = jackknife_beta(data, Family::kLogit, {}, p1);
  const auto j3 = jackknife_beta(data, Family::kLogit, {}, p3);
  CHECK(j1.subfits.size() == 12);
  CHECK(j3.subfits.size() == 4);
  // both remove the leading bias; they differ only in higher order
  CHECK(std::fabs(j1.beta_corrected[0] - j3.beta_corrected[0]) < 0.25);
}

TEST_CASE("warm starting does not move converged leave-out estimates") {
  const int n = 10;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 1.0;
  const auto data = simulate_clean_network(Family::kProbit, n, truth.beta, truth.alpha,
                                           truth.gamma, 43);
  const auto partition = build_partition(n, 1);
  const auto warm = jackknife_beta(data, Family::kProbit, {}, partition);
  // cold-start the same leave-out fit
  const auto mask = partition.edge_mask(4);
  const auto cold = fit(data, Family::kProbit, {}, mask, n - 2);
  REQUIRE(cold.converged);
  CHECK(std::fabs(cold.params.beta[0] - warm.subfits[3].params.beta[0]) < 1e-7);
  CHECK((cold.params.alpha - warm.subfits[3].params.alpha).lpNorm<Eigen::Infinity>() < 1e-7);
}

TEST_CASE("jackknife moves the estimate toward the truth on a biased design") {
  const int n = 24;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 1.0;
  for (int i = 0; i < n; ++i) {
    truth.alpha[i] = -0.8 + 1.6 * i / (n - 1.0);
    truth.gamma[i] = truth.alpha[i];
  }
  // average over a few replications to see the bias reduction
  double mle_err = 0.0, j_err = 0.0;
  const int reps = 12;
  const auto partition = build_partition(n, 1);
  for (int r = 0; r < reps; ++r) {
    const auto data = simulate_clean_network(Family::kProbit, n, truth.beta, truth.alpha,
                                             truth.gamma, 1000 + 17 * r);
    const auto jr = jackknife_beta(data, Family::kProbit, {}, partition);
    mle_err += jr.beta_full[0] - 1.0;
    j_err += jr.beta_corrected[0] - 1.0;
  }
  mle_err /= reps;
  j_err /= reps;
  CHECK(mle_err > 0.0);                      // incidental-parameter bias is upward here
  CHECK(std::fabs(j_err) < std::fabs(mle_err));  // and the jackknife shrinks it
}

TEST_CASE("weighted jackknife equals plain when weights are equal") {
  const int n = 10;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 0.7;
  const auto data = simulate_clean_network(Family::kProbit, n, truth.beta, truth.alpha,
                                           truth.gamma, 97);
  const auto partition = build_partition(n, 1);
  auto j = jackknife_beta(data, Family::kProbit, {}, partition);
  // force every weight to a common matrix: the combination must collapse to
  // the plain one
  Mat common = j.subfits.front().w_k;
  for (auto& sub : j.subfits) sub.w_k = common;
  const Vec collapsed = weighted_combine(n, j.beta_full, j.subfits);
  CHECK(std::fabs(collapsed[0] - j.beta_corrected[0]) < 1e-12);

  // real weights vary at N=10, but the variant stays in the same neighborhood
  const auto wj = jackknife_weighted(data, Family::kProbit, {}, partition);
  CHECK(std::fabs(wj.beta_corrected[0] - j.beta_corrected[0]) < 0.5);
}

TEST_CASE("split-sample handles odd N with a flag") {
  const auto data = zero_residual_network(9, 31);
  const auto ss = jackknife_split_sample(data, Family::kGaussianNls, {}, 7);
  CHECK(ss.unequal_halves);
}

TEST_CASE("relabel-averaged jackknife is deterministic and matches a single run") {
  const int n = 12;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 0.7;
  const auto data = simulate_clean_network(Family::kLogit, n, truth.beta, truth.alpha,
                                           truth.gamma, 59);

  const auto r1 = jackknife_with_relabeling(data, Family::kLogit, {}, 1, 1, 99);
  const auto r2 = jackknife_with_relabeling(data, Family::kLogit, {}, 1, 1, 99);
  CHECK(r1.beta_corrected[0] == r2.beta_corrected[0]);  // bit identical

  // n_relabels = 1 equals a plain run under that labeling
  RngStream rs(99, {0x72656c62u, 0});
  const auto shuffled = relabel(data, rs.next_u64() | 1);
  const auto direct = jackknife_beta(shuffled, Family::kLogit, {}, build_partition(n, 1));
  CHECK(r1.beta_corrected[0] == direct.beta_corrected[0]);

  const auto r5 = jackknife_with_relabeling(data, Family::kLogit, {}, 1, 5, 99);
  CHECK(r5.relabel_spread >= 0.0);
  CHECK(std::fabs(r5.beta_corrected[0] - r1.beta_corrected[0]) < 0.1);
}

TEST_CASE("relabeling barely moves the corrected estimate on a dense draw") {
  // across-relabel spread is an order of magnitude below the sampling SD
  const int n = 50;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 1.0;
  const double c = std::log(std::log(static_cast<double>(n)));
  for (int i = 0; i < n; ++i) {
    truth.alpha[i] = -c + 2.0 * c * i / (n - 1.0);
    truth.gamma[i] = truth.alpha[i];
  }
  const auto data = simulate_clean_network(Family::kProbit, n, truth.beta, truth.alpha,
                                           truth.gamma, 314);
  const auto r = jackknife_with_relabeling(data, Family::kProbit, {}, 1, 3, 2718);
  CHECK(r.relabel_spread < 0.1 * 0.039);  // sampling SD of the corrected estimator
}

TEST_CASE("jobs count does not change results") {
  const int n = 11;
  ParameterSet truth = ParameterSet::zeros(n, 1);
  truth.beta[0] = 0.5;
  const auto data = simulate_clean_network(Family::kProbit, n, truth.beta, truth.alpha,
                                           truth.gamma, 61);
  const auto partition = build_partition(n, 1);
  const auto one = jackknife_beta(data, Family::kProbit, {}, partition, 1);
  const auto four = jackknife_beta(data, Family::kProbit, {}, partition, 4);
  CHECK(one.beta_corrected[0] == four.beta_corrected[0]);
}
