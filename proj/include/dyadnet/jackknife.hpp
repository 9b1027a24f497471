// Leave-out re-estimation and the bias-corrected combinations.
//
// The plain estimator runs one fit per leave-out sample of the diagonal-slice
// partition and combines
//
//   beta_J = ((N-1)/l) beta_hat - ((N-1-l)/l) mean_k beta_(k)
//
// which at l = 1 is (N-1) beta_hat - (N-2) mean_k beta_(k). The weighted
// variant reweights the leave-out estimates by their concentrated Hessians.
// Split-sample and leave-one-agent-out ("double") corrections are provided
// for comparison; both are dominated by the diagonal-slice jackknife away
// from dense designs.
//
// Callers pass data that already went through filter_degenerate.
#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "dyadnet/common.hpp"
#include "dyadnet/estimator.hpp"
#include "dyadnet/network_data.hpp"
#include "dyadnet/parallel.hpp"
#include "dyadnet/partition.hpp"
#include "dyadnet/rng.hpp"

namespace dyadnet {

enum class JackknifeVariant { kPlain, kWeighted, kSplitSample, kDoubleAgent };

inline std::string variant_name(JackknifeVariant v) {
  switch (v) {
    case JackknifeVariant::kPlain: return "plain";
    case JackknifeVariant::kWeighted: return "weighted";
    case JackknifeVariant::kSplitSample: return "split";
    case JackknifeVariant::kDoubleAgent: return "double";
  }
  return "?";
}

// Slim per-subfit record; factors are dropped once the concentrated Hessian
// has been extracted.
struct LeaveOutFit {
  ParameterSet params;
  Mat w_k;  // concentrated beta Hessian of the sub-objective, W_(k)
  bool converged = false;
  int iterations = 0;
  double score_norm = 0.0;
  bool weight_ridged = false;
};

struct JackknifeResult {
  JackknifeVariant variant = JackknifeVariant::kPlain;
  int l = 1;
  Vec beta_full;
  Vec beta_corrected;
  Vec phi_corrected;  // 2N, alpha then gamma, same combination as beta
  std::vector<LeaveOutFit> subfits;
  FitResult fit_full;
  bool all_converged = true;
  int flagged_subfits = 0;       // non-convergent or otherwise adjusted
  std::vector<int> skipped;      // double variant: agents whose subfit failed
  bool unequal_halves = false;   // split variant with odd N
  double relabel_spread = 0.0;   // across-relabel SD when averaging labelings
};

namespace detail {

inline Mat extract_weight(const FitResult& fit, bool* ridged) {
  Mat w = fit.factor->beta_schur() / fit.params.n();
  Eigen::LLT<Mat> llt(w);
  if (llt.info() != Eigen::Success) {
    // sparse slices can make a leave-out information matrix indefinite; floor
    // it with a small ridge and flag the weight
    w.diagonal().array() += 1e-8 * w.trace() / w.rows();
    if (ridged) *ridged = true;
  }
  return w;
}

}  // namespace detail

// Weighted combination (N-1) beta_hat - (N-2) Wbar^{-1} mean_k W_(k) beta_(k);
// collapses to the plain combination when every W_(k) is equal.
inline Vec weighted_combine(int n, const Vec& beta_full, const std::vector<LeaveOutFit>& subfits) {
  const int kdim = static_cast<int>(beta_full.size());
  Mat w_bar = Mat::Zero(kdim, kdim);
  Vec wb_mean = Vec::Zero(kdim);
  for (const auto& sub : subfits) {
    w_bar += sub.w_k;
    wb_mean += sub.w_k * sub.params.beta;
  }
  w_bar /= static_cast<double>(subfits.size());
  wb_mean /= static_cast<double>(subfits.size());
  return (n - 1.0) * beta_full - (n - 2.0) * w_bar.ldlt().solve(wb_mean);
}

// Plain (and leave-l-out) jackknife for beta and phi.
inline JackknifeResult jackknife_beta(const NetworkData& data, Family family,
                                      const FitConfig& config, const LeaveOutPartition& partition,
                                      int jobs = 1) {
  const int n = data.n;
  if (partition.n_nodes != n) throw ValidationError("partition size does not match data");
  JackknifeResult out;
  out.variant = JackknifeVariant::kPlain;
  out.l = partition.l;

  out.fit_full = fit(data, family, config);
  if (!out.fit_full.converged)
    throw NumericalError("full-sample fit did not converge (score " +
                         std::to_string(out.fit_full.score_norm) + ")");
  out.beta_full = out.fit_full.params.beta;

  FitConfig sub_config = config;
  sub_config.warm_start = out.fit_full.params;
  const double sub_normalizer = n - 1 - partition.l;

  out.subfits.resize(partition.n_sets);
  parallel_for(partition.n_sets, jobs, [&](std::size_t idx) {
    const int k = static_cast<int>(idx) + 1;
    LeaveOutFit& slot = out.subfits[idx];
    try {
      FitResult r = fit(data, family, sub_config, partition.edge_mask(k), sub_normalizer);
      slot.params = r.params;
      slot.converged = r.converged;
      slot.iterations = r.iterations;
      slot.score_norm = r.score_norm;
      slot.w_k = detail::extract_weight(r, &slot.weight_ridged);
    } catch (const NumericalError&) {
      // degenerate slice (e.g. quasi-separation in a tiny network): fall back
      // to the full-sample estimate for this k and flag it
      slot.params = out.fit_full.params;
      slot.converged = false;
      slot.w_k = detail::extract_weight(out.fit_full, &slot.weight_ridged);
    }
  });

  Vec beta_mean = Vec::Zero(data.dim_x);
  Vec phi_mean = Vec::Zero(2 * n);
  for (const auto& sub : out.subfits) {
    if (!sub.converged) {
      out.all_converged = false;
      ++out.flagged_subfits;
    }
    beta_mean += sub.params.beta;
    phi_mean.head(n) += sub.params.alpha;
    phi_mean.tail(n) += sub.params.gamma;
  }
  beta_mean /= partition.n_sets;
  phi_mean /= partition.n_sets;

  const double c_full = static_cast<double>(n - 1) / partition.l;
  const double c_sub = static_cast<double>(n - 1 - partition.l) / partition.l;
  out.beta_corrected = c_full * out.beta_full - c_sub * beta_mean;
  Vec phi_full(2 * n);
  phi_full.head(n) = out.fit_full.params.alpha;
  phi_full.tail(n) = out.fit_full.params.gamma;
  out.phi_corrected = c_full * phi_full - c_sub * phi_mean;
  return out;
}

// Weighted jackknife: leave-out estimates weighted by their concentrated
// Hessians W_(k), which down-weights noisy slices in sparse networks.
inline JackknifeResult jackknife_weighted(const NetworkData& data, Family family,
                                          const FitConfig& config,
                                          const LeaveOutPartition& partition, int jobs = 1) {
  if (partition.l != 1)
    throw ValidationError("weighted jackknife requires the leave-one-out partition (l=1)");
  JackknifeResult out = jackknife_beta(data, family, config, partition, jobs);
  out.variant = JackknifeVariant::kWeighted;
  for (const auto& sub : out.subfits)
    if (sub.weight_ridged) ++out.flagged_subfits;
  out.beta_corrected = weighted_combine(data.n, out.beta_full, out.subfits);
  return out;
}

// Split-sample comparison: receiver halves and sender halves drawn by a
// seeded permutation, combined as 3 beta_hat - beta_{a/2,g} - beta_{a,g/2}.
inline JackknifeResult jackknife_split_sample(const NetworkData& data, Family family,
                                              const FitConfig& config, std::uint64_t seed,
                                              int jobs = 1) {
  const int n = data.n;
  JackknifeResult out;
  out.variant = JackknifeVariant::kSplitSample;
  out.fit_full = fit(data, family, config);
  if (!out.fit_full.converged)
    throw NumericalError("full-sample fit did not converge");
  out.beta_full = out.fit_full.params.beta;
  out.unequal_halves = n % 2 != 0;

  RngStream rng(seed, {0x73706c69u});  // "spli"
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  const int half = n / 2;
  std::vector<char> in_a1(n, 0);
  for (int i = 0; i < half; ++i) in_a1[order[i]] = 1;

  FitConfig sub_config = config;
  sub_config.warm_start = out.fit_full.params;

  struct HalfSpec {
    bool by_receiver;
    bool first_half;
    const char* name;
  };
  const HalfSpec halves[4] = {{true, true, "receiver half A1"},
                              {true, false, "receiver half A2"},
                              {false, true, "sender half A1"},
                              {false, false, "sender half A2"}};
  out.subfits.resize(4);
  parallel_for(4, jobs, [&](std::size_t idx) {
    const HalfSpec& h = halves[idx];
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const int node = h.by_receiver ? j : i;
        if ((in_a1[node] != 0) == h.first_half) mask[static_cast<std::size_t>(i) * n + j] = 1;
      }
    FitResult r;
    try {
      r = fit(data, family, sub_config, std::move(mask), n - 1);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " in " + h.name);
    }
    LeaveOutFit& slot = out.subfits[idx];
    slot.params = r.params;
    slot.converged = r.converged;
    slot.iterations = r.iterations;
    slot.score_norm = r.score_norm;
    slot.w_k = r.factor->beta_schur() / n;
    if (!r.converged)
      throw NumericalError("half-sample fit did not converge in " + std::string(h.name));
  });

  const Vec beta_g_half = 0.5 * (out.subfits[0].params.beta + out.subfits[1].params.beta);
  const Vec beta_a_half = 0.5 * (out.subfits[2].params.beta + out.subfits[3].params.beta);
  out.beta_corrected = 3.0 * out.beta_full - beta_a_half - beta_g_half;
  return out;
}

// Leave-one-agent-out comparison ("double" correction): N subnetwork fits.
inline JackknifeResult jackknife_double(const NetworkData& data, Family family,
                                        const FitConfig& config, int jobs = 1) {
  const int n = data.n;
  JackknifeResult out;
  out.variant = JackknifeVariant::kDoubleAgent;
  out.fit_full = fit(data, family, config);
  if (!out.fit_full.converged)
    throw NumericalError("full-sample fit did not converge");
  out.beta_full = out.fit_full.params.beta;

  out.subfits.resize(n);
  std::vector<char> ok(n, 0);
  parallel_for(n, jobs, [&](std::size_t idx) {
    const int drop = static_cast<int>(idx);
    std::vector<int> keep;
    keep.reserve(n - 1);
    for (int i = 0; i < n; ++i)
      if (i != drop) keep.push_back(i);
    LeaveOutFit& slot = out.subfits[idx];
    try {
      NetworkData sub = subnetwork(data, keep);
      auto [filtered, report] = filter_degenerate(sub, family);
      FitConfig sub_config = config;
      if (report.empty()) {
        // warm start from the full solution with the dropped agent removed
        ParameterSet warm;
        warm.beta = out.fit_full.params.beta;
        warm.alpha.resize(n - 1);
        warm.gamma.resize(n - 1);
        for (int a = 0; a < n - 1; ++a) {
          warm.alpha[a] = out.fit_full.params.alpha[keep[a]];
          warm.gamma[a] = out.fit_full.params.gamma[keep[a]];
        }
        warm.enforce_normalization();
        sub_config.warm_start = warm;
      }
      FitResult r = fit(filtered, family, sub_config);
      slot.params = r.params;
      slot.converged = r.converged;
      slot.iterations = r.iterations;
      slot.score_norm = r.score_norm;
      slot.w_k = r.factor->beta_schur() / filtered.n;
      ok[idx] = r.converged ? 1 : 0;
    } catch (const ValidationError&) {
      ok[idx] = 0;  // subnetwork degenerate beyond repair
    } catch (const NumericalError&) {
      ok[idx] = 0;
    }
  });

  Vec beta_mean = Vec::Zero(data.dim_x);
  int n_ok = 0;
  for (int i = 0; i < n; ++i) {
    if (ok[i]) {
      beta_mean += out.subfits[i].params.beta;
      ++n_ok;
    } else {
      out.skipped.push_back(i);
      out.all_converged = false;
      ++out.flagged_subfits;
    }
  }
  if (n_ok == 0) throw NumericalError("every leave-one-agent-out fit failed");
  beta_mean /= n_ok;
  out.beta_corrected = n * out.beta_full - (n - 1.0) * beta_mean;
  return out;
}

// Averages the plain jackknife across independent relabelings; the spread
// across labelings is a stability diagnostic.
inline JackknifeResult jackknife_with_relabeling(const NetworkData& data, Family family,
                                                 const FitConfig& config, int l, int n_relabels,
                                                 std::uint64_t seed, int jobs = 1) {
  if (n_relabels < 1) throw ValidationError("n_relabels must be >= 1");
  JackknifeResult out;
  std::vector<Vec> draws;
  draws.reserve(n_relabels);
  for (int r = 0; r < n_relabels; ++r) {
    RngStream rs(seed, {0x72656c62u, static_cast<std::uint64_t>(r)});
    const std::uint64_t relabel_seed = rs.next_u64() | 1;  // never the identity constant
    const NetworkData shuffled = relabel(data, relabel_seed);
    const auto partition = build_partition(shuffled.n, l);
    JackknifeResult jr = jackknife_beta(shuffled, family, config, partition, jobs);
    draws.push_back(jr.beta_corrected);
    if (r == 0) out = std::move(jr);
  }
  Vec mean = Vec::Zero(data.dim_x);
  for (const auto& d : draws) mean += d;
  mean /= n_relabels;
  double var = 0.0;
  for (const auto& d : draws) var += (d - mean).squaredNorm();
  out.beta_corrected = mean;
  out.relabel_spread = n_relabels > 1 ? std::sqrt(var / (n_relabels - 1)) : 0.0;
  return out;
}

}  // namespace dyadnet
