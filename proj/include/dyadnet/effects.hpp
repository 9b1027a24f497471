// Fixed-effect averages over edge patterns and their bias corrections.
//
// A pattern lambda is an ordered list of r slot pairs over p placeholder
// agents; the average runs over all N!/(N-p)! injective assignments. The
// plug-in average is jackknifed with the same combination as beta. When the
// moment depends on outcomes, each leave-out average keeps only the lambda
// fully inside the sample and rescales by (N-1)/(N-r-1) to make up for the
// dropped patterns.
//
// Inference targets:
//  - conditional average: V_Delta = (1/(N(N-1))) sum_{j<i} (h_ij + s_ij)^2,
//    h_ij the delta-method influence of parameter estimation, s_ij the
//    conditional variation of the moments on the dyad {i,j};
//  - population average: the order-p U-statistic variance estimated from
//    per-agent averages mu_tilde_i.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "dyadnet/common.hpp"
#include "dyadnet/estimator.hpp"
#include "dyadnet/jackknife.hpp"
#include "dyadnet/model_family.hpp"
#include "dyadnet/network_data.hpp"
#include "dyadnet/parallel.hpp"
#include "dyadnet/partition.hpp"
#include "dyadnet/rng.hpp"

namespace dyadnet {

struct LambdaPattern {
  int p = 2;                                  // placeholder agents
  std::vector<std::pair<int, int>> slots;     // (sender, receiver) placeholder ids
  bool uses_outcomes = false;

  int r() const { return static_cast<int>(slots.size()); }

  void validate(int dim_check = -1) const {
    (void)dim_check;
    if (p < 2) throw ValidationError("pattern needs p >= 2 agents");
    if (slots.empty()) throw ValidationError("pattern needs at least one slot");
    for (const auto& [a, b] : slots) {
      if (a == b) throw ValidationError("pattern slots cannot be self pairs");
      if (a < 0 || b < 0 || a >= p || b >= p)
        throw ValidationError("pattern slot references a missing placeholder");
    }
  }
};

inline LambdaPattern single_edge_pattern() { return {2, {{0, 1}}, false}; }
inline LambdaPattern dyad_pattern() { return {2, {{0, 1}, {1, 0}}, true}; }
// transitive triangle: links a->b, a->c, c->b
inline LambdaPattern transitive_triangle_pattern(bool uses_outcomes) {
  return {3, {{0, 1}, {0, 2}, {2, 1}}, uses_outcomes};
}

// Per-slot view handed to kernels: outcome, covariates, index eta = x'b + pi,
// and the conditional mean with its first two derivatives at eta.
struct SlotEval {
  double y;
  const double* x;
  double eta;
  double mu;
  double dmu;
  double d2mu;
};

// The moment m and its conditional-mean counterpart. mean_value/mean_grad
// treat the data-generating distribution as fixed at the evaluation point, so
// for centered test statistics the mean is identically zero while its
// parameter gradient is not.
class EffectKernel {
 public:
  explicit EffectKernel(LambdaPattern pattern) : pattern_(std::move(pattern)) {
    pattern_.validate();
  }
  virtual ~EffectKernel() = default;

  const LambdaPattern& pattern() const { return pattern_; }

  virtual double value(const SlotEval* slots, const Vec& beta) const = 0;
  virtual double mean_value(const SlotEval* slots, const Vec& beta) const {
    return value(slots, beta);  // outcome-free default
  }
  // d mean_value / d beta into dbeta, d / d pi_slot into dpi[0..r)
  virtual void mean_grad(const SlotEval* slots, const Vec& beta, Vec& dbeta,
                         double* dpi) const = 0;
  // full-sample average of value over Lambda_N without enumeration, when the
  // kernel has a closed matrix form; NaN means "no fast path"
  virtual double average_fast(const NetworkData&, const Mat& /*mu*/, const Vec&) const {
    return std::numeric_limits<double>::quiet_NaN();
  }
  // same, restricted to lambda fully inside leave-out sample k (unscaled sum
  // over Lambda_N divided by |Lambda_N|)
  virtual double restricted_average_fast(const NetworkData&, const Mat& /*mu*/, const Vec&,
                                         const LeaveOutPartition&, int /*k*/) const {
    return std::numeric_limits<double>::quiet_NaN();
  }

 private:
  LambdaPattern pattern_;
};

namespace detail {

// All injective assignments of pattern placeholders to nodes.
template <typename F>
void for_each_lambda(int n, int p, F&& visit) {
  int agents[4];
  if (p == 2) {
    for (agents[0] = 0; agents[0] < n; ++agents[0])
      for (agents[1] = 0; agents[1] < n; ++agents[1]) {
        if (agents[1] == agents[0]) continue;
        visit(agents);
      }
    return;
  }
  if (p == 3) {
    for (agents[0] = 0; agents[0] < n; ++agents[0])
      for (agents[1] = 0; agents[1] < n; ++agents[1]) {
        if (agents[1] == agents[0]) continue;
        for (agents[2] = 0; agents[2] < n; ++agents[2]) {
          if (agents[2] == agents[0] || agents[2] == agents[1]) continue;
          visit(agents);
        }
      }
    return;
  }
  if (p == 4) {
    for (agents[0] = 0; agents[0] < n; ++agents[0])
      for (agents[1] = 0; agents[1] < n; ++agents[1]) {
        if (agents[1] == agents[0]) continue;
        for (agents[2] = 0; agents[2] < n; ++agents[2]) {
          if (agents[2] == agents[0] || agents[2] == agents[1]) continue;
          for (agents[3] = 0; agents[3] < n; ++agents[3]) {
            if (agents[3] == agents[0] || agents[3] == agents[1] || agents[3] == agents[2])
              continue;
            visit(agents);
          }
        }
      }
    return;
  }
  throw ValidationError("patterns with p > 4 agents are not supported");
}

inline double lambda_count(int n, int p) {
  double c = 1.0;
  for (int q = 0; q < p; ++q) c *= n - q;
  return c;
}

// Index tables at one parameter point.
struct EdgeTables {
  Mat eta, mu, dmu, d2mu;

  static EdgeTables build(const NetworkData& data, Family family, const ParameterSet& p) {
    const int n = data.n;
    EdgeTables t;
    t.eta = Mat::Zero(n, n);
    t.mu = Mat::Zero(n, n);
    t.dmu = Mat::Zero(n, n);
    t.d2mu = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        double eta = p.alpha[i] + p.gamma[j];
        const double* xv = data.covariates(i, j);
        for (int k = 0; k < data.dim_x; ++k) eta += xv[k] * p.beta[k];
        t.eta(i, j) = eta;
        mean_derivs(family, eta, &t.mu(i, j), &t.dmu(i, j), &t.d2mu(i, j));
      }
    return t;
  }
};

inline void fill_slots(const NetworkData& data, const EdgeTables& t, const LambdaPattern& pat,
                       const int* agents, SlotEval* slots) {
  for (int s = 0; s < pat.r(); ++s) {
    const int i = agents[pat.slots[s].first];
    const int j = agents[pat.slots[s].second];
    slots[s].y = data.outcome(i, j);
    slots[s].x = data.covariates(i, j);
    slots[s].eta = t.eta(i, j);
    slots[s].mu = t.mu(i, j);
    slots[s].dmu = t.dmu(i, j);
    slots[s].d2mu = t.d2mu(i, j);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Built-in kernels
// ---------------------------------------------------------------------------

// Average conditional mean over single edges (e.g. average link probability).
class MeanLinkKernel : public EffectKernel {
 public:
  MeanLinkKernel() : EffectKernel(single_edge_pattern()) {}
  double value(const SlotEval* s, const Vec&) const override { return s[0].mu; }
  void mean_grad(const SlotEval* s, const Vec& beta, Vec& dbeta, double* dpi) const override {
    for (int k = 0; k < beta.size(); ++k) dbeta[k] = s[0].dmu * s[0].x[k];
    dpi[0] = s[0].dmu;
  }
};

// Average derivative of the conditional mean with respect to covariate v.
class MarginalDerivativeKernel : public EffectKernel {
 public:
  explicit MarginalDerivativeKernel(int var) : EffectKernel(single_edge_pattern()), var_(var) {}
  double value(const SlotEval* s, const Vec& beta) const override {
    return s[0].dmu * beta[var_];
  }
  void mean_grad(const SlotEval* s, const Vec& beta, Vec& dbeta, double* dpi) const override {
    for (int k = 0; k < beta.size(); ++k) dbeta[k] = s[0].d2mu * s[0].x[k] * beta[var_];
    dbeta[var_] += s[0].dmu;
    dpi[0] = s[0].d2mu * beta[var_];
  }

 private:
  int var_;
};

// Average difference of the conditional mean at covariate v set to 1 vs 0.
class DiscreteDifferenceKernel : public EffectKernel {
 public:
  DiscreteDifferenceKernel(int var, Family family)
      : EffectKernel(single_edge_pattern()), var_(var), family_(family) {}
  double value(const SlotEval* s, const Vec& beta) const override {
    double mu1, mu0;
    base(s, beta, &mu1, &mu0, nullptr, nullptr);
    return mu1 - mu0;
  }
  void mean_grad(const SlotEval* s, const Vec& beta, Vec& dbeta, double* dpi) const override {
    double mu1, mu0, dmu1, dmu0;
    base(s, beta, &mu1, &mu0, &dmu1, &dmu0);
    for (int k = 0; k < beta.size(); ++k) dbeta[k] = (dmu1 - dmu0) * s[0].x[k];
    dbeta[var_] = dmu1;  // eta1 has x_v = 1, eta0 has x_v = 0
    dpi[0] = dmu1 - dmu0;
  }

 private:
  void base(const SlotEval* s, const Vec& beta, double* mu1, double* mu0, double* dmu1,
            double* dmu0) const {
    const double eta_rest = s[0].eta - s[0].x[var_] * beta[var_];
    mean_derivs(family_, eta_rest + beta[var_], mu1, dmu1, nullptr);
    mean_derivs(family_, eta_rest, mu0, dmu0, nullptr);
  }
  int var_;
  Family family_;
};

// Expected transitive-triangle frequency mu_ab mu_ac mu_cb (outcome free).
class ExpectedClusteringKernel : public EffectKernel {
 public:
  ExpectedClusteringKernel() : EffectKernel(transitive_triangle_pattern(false)) {}
  double value(const SlotEval* s, const Vec&) const override {
    return s[0].mu * s[1].mu * s[2].mu;
  }
  void mean_grad(const SlotEval* s, const Vec& beta, Vec& dbeta, double* dpi) const override {
    dbeta.setZero();
    for (int a = 0; a < 3; ++a) {
      double prod = s[a].dmu;
      for (int b = 0; b < 3; ++b)
        if (b != a) prod *= s[b].mu;
      dpi[a] = prod;
      for (int k = 0; k < beta.size(); ++k) dbeta[k] += prod * s[a].x[k];
    }
  }
};

// Covariance-form transitivity statistic: m = (Y_ab - p_ab) Y_ac Y_cb.
class TransitivityCovKernel : public EffectKernel {
 public:
  TransitivityCovKernel() : EffectKernel(transitive_triangle_pattern(true)) {}
  double value(const SlotEval* s, const Vec&) const override {
    return (s[0].y - s[0].mu) * s[1].y * s[2].y;
  }
  double mean_value(const SlotEval*, const Vec&) const override { return 0.0; }
  void mean_grad(const SlotEval* s, const Vec& beta, Vec& dbeta, double* dpi) const override {
    // mean is (p0_ab - mu_ab(theta)) p0_ac p0_cb; only mu_ab moves with theta
    const double tail = -s[0].dmu * s[1].mu * s[2].mu;
    for (int k = 0; k < beta.size(); ++k) dbeta[k] = tail * s[0].x[k];
    dpi[0] = tail;
    dpi[1] = 0.0;
    dpi[2] = 0.0;
  }
  double average_fast(const NetworkData& data, const Mat& mu, const Vec&) const override {
    const int n = data.n;
    Mat y(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) y(i, j) = i == j ? 0.0 : data.outcome(i, j);
    const Mat paths = y * y;  // (i,j) entry: shared partners i->k->j
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) sum += (y(i, j) - mu(i, j)) * paths(i, j);
    return sum / (static_cast<double>(n) * (n - 1) * (n - 2));
  }
  double restricted_average_fast(const NetworkData& data, const Mat& mu, const Vec&,
                                 const LeaveOutPartition& partition, int k) const override {
    // zeroing the I_k entries of Y kills every lambda whose (a,c) or (c,b)
    // edge is removed; the (a,b) factor is masked directly
    const int n = data.n;
    Mat y(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        y(i, j) = (i == j || partition.set_of(i, j) == k) ? 0.0 : data.outcome(i, j);
    const Mat paths = y * y;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && partition.set_of(i, j) != k)
          sum += (data.outcome(i, j) - mu(i, j)) * paths(i, j);
    return sum / (static_cast<double>(n) * (n - 1) * (n - 2));
  }
};

// Triangle-count form: m = Y_ab Y_ac Y_cb - p_ab p_ac p_cb.
class TriangleCountKernel : public EffectKernel {
 public:
  TriangleCountKernel() : EffectKernel(transitive_triangle_pattern(true)) {}
  double value(const SlotEval* s, const Vec&) const override {
    return s[0].y * s[1].y * s[2].y - s[0].mu * s[1].mu * s[2].mu;
  }
  double mean_value(const SlotEval*, const Vec&) const override { return 0.0; }
  void mean_grad(const SlotEval* s, const Vec& beta, Vec& dbeta, double* dpi) const override {
    dbeta.setZero();
    for (int a = 0; a < 3; ++a) {
      double prod = -s[a].dmu;
      for (int b = 0; b < 3; ++b)
        if (b != a) prod *= s[b].mu;
      dpi[a] = prod;
      for (int k = 0; k < beta.size(); ++k) dbeta[k] += prod * s[a].x[k];
    }
  }
  double average_fast(const NetworkData& data, const Mat& mu, const Vec&) const override {
    const int n = data.n;
    Mat y(n, n), m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        y(i, j) = i == j ? 0.0 : data.outcome(i, j);
        m(i, j) = i == j ? 0.0 : mu(i, j);
      }
    const Mat ypaths = y * y;
    const Mat mpaths = m * m;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) sum += y(i, j) * ypaths(i, j) - m(i, j) * mpaths(i, j);
    return sum / (static_cast<double>(n) * (n - 1) * (n - 2));
  }
  double restricted_average_fast(const NetworkData& data, const Mat& mu, const Vec&,
                                 const LeaveOutPartition& partition, int k) const override {
    const int n = data.n;
    Mat y(n, n), m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const bool off = i == j || partition.set_of(i, j) == k;
        y(i, j) = off ? 0.0 : data.outcome(i, j);
        m(i, j) = off ? 0.0 : mu(i, j);
      }
    const Mat ypaths = y * y;
    const Mat mpaths = m * m;
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) sum += y(i, j) * ypaths(i, j) - m(i, j) * mpaths(i, j);
    return sum / (static_cast<double>(n) * (n - 1) * (n - 2));
  }
};

// Reciprocity statistic: m = (Y_ab - p_ab) Y_ba. The conditional mean uses
// the within-dyad product form, i.e. independence of the two directions given
// (X, phi), which matches the simulator.
class ReciprocityKernel : public EffectKernel {
 public:
  ReciprocityKernel() : EffectKernel(dyad_pattern()) {}
  double value(const SlotEval* s, const Vec&) const override {
    return (s[0].y - s[0].mu) * s[1].y;
  }
  double mean_value(const SlotEval*, const Vec&) const override { return 0.0; }
  void mean_grad(const SlotEval* s, const Vec& beta, Vec& dbeta, double* dpi) const override {
    const double tail = -s[0].dmu * s[1].mu;
    for (int k = 0; k < beta.size(); ++k) dbeta[k] = tail * s[0].x[k];
    dpi[0] = tail;
    dpi[1] = 0.0;
  }
};

// ---------------------------------------------------------------------------
// Averages and bias correction
// ---------------------------------------------------------------------------

enum class EffectTarget { kConditional, kPopulation };

struct EffectResult {
  double delta_plugin = 0.0;
  double delta_jackknife = 0.0;
  double variance = 0.0;  // V_Delta (conditional) or V_delta (population)
  double se = 0.0;
  double t_plugin = 0.0;
  double t_jackknife = 0.0;
  double bootstrap_se = 0.0;  // filled by the test statistics when requested
  EffectTarget target = EffectTarget::kConditional;
  std::vector<double> per_k;
};

namespace detail {

inline double plugin_average(const NetworkData& data, Family family, const EffectKernel& kernel,
                             const ParameterSet& params) {
  const auto& pat = kernel.pattern();
  const EdgeTables tables = EdgeTables::build(data, family, params);
  const double fast = kernel.average_fast(data, tables.mu, params.beta);
  if (!std::isnan(fast)) return fast;
  SlotEval slots[8];
  double sum = 0.0;
  for_each_lambda(data.n, pat.p, [&](const int* agents) {
    fill_slots(data, tables, pat, agents, slots);
    sum += kernel.value(slots, params.beta);
  });
  return sum / lambda_count(data.n, pat.p);
}

}  // namespace detail

// Unordered-dyad sums of (m - mbar): entry (i, j) with i > j collects every
// lambda containing (i,j) or (j,i), each lambda counted once per distinct
// dyad it touches. This is the unscaled s accumulator of the conditional
// variance; exposed for the exhaustive-membership oracle.
inline Mat dyad_moment_sums(const NetworkData& data, Family family, const EffectKernel& kernel,
                            const ParameterSet& params) {
  const int n = data.n;
  const auto& pat = kernel.pattern();
  const detail::EdgeTables tables = detail::EdgeTables::build(data, family, params);
  Mat s_acc = Mat::Zero(n, n);
  SlotEval slots[8];
  detail::for_each_lambda(n, pat.p, [&](const int* agents) {
    detail::fill_slots(data, tables, pat, agents, slots);
    const double dm = kernel.value(slots, params.beta) - kernel.mean_value(slots, params.beta);
    int seen_i[8], seen_j[8], n_seen = 0;
    for (int s = 0; s < pat.r(); ++s) {
      int a = agents[pat.slots[s].first];
      int b = agents[pat.slots[s].second];
      if (a > b) std::swap(a, b);
      bool dup = false;
      for (int q = 0; q < n_seen; ++q)
        if (seen_i[q] == a && seen_j[q] == b) dup = true;
      if (dup) continue;
      seen_i[n_seen] = a;
      seen_j[n_seen] = b;
      ++n_seen;
      s_acc(b, a) += dm;
    }
  });
  return s_acc;
}

// Plug-in and leave-out averages combined into the bias-corrected estimate.
inline EffectResult average_effect(const FitResult& fit_full,
                                   const std::vector<LeaveOutFit>& subfits,
                                   const LeaveOutPartition& partition,
                                   const EffectKernel& kernel, const NetworkData& data,
                                   Family family) {
  const int n = data.n;
  const auto& pat = kernel.pattern();
  if (pat.r() >= n - 2)
    throw ValidationError("PatternTooLargeForLeaveOut: r=" + std::to_string(pat.r()) +
                          " with N=" + std::to_string(n));
  if (pat.uses_outcomes && partition.l != 1)
    throw ValidationError("outcome-dependent averages need the leave-one-out partition (l=1)");
  if (static_cast<int>(subfits.size()) != partition.n_sets)
    throw ValidationError("subfit count does not match the partition");

  EffectResult out;
  out.delta_plugin = detail::plugin_average(data, family, kernel, fit_full.params);

  const double count = detail::lambda_count(n, pat.p);
  out.per_k.resize(partition.n_sets);
  for (int k = 1; k <= partition.n_sets; ++k) {
    const detail::EdgeTables tables =
        detail::EdgeTables::build(data, family, subfits[k - 1].params);
    SlotEval slots[8];
    double sum = 0.0;
    if (!pat.uses_outcomes) {
      detail::for_each_lambda(n, pat.p, [&](const int* agents) {
        detail::fill_slots(data, tables, pat, agents, slots);
        sum += kernel.value(slots, subfits[k - 1].params.beta);
      });
      out.per_k[k - 1] = sum / count;
    } else {
      const double rescale = (n - 1.0) / (n - pat.r() - 1.0);
      const double fast = kernel.restricted_average_fast(data, tables.mu,
                                                         subfits[k - 1].params.beta, partition, k);
      if (!std::isnan(fast)) {
        out.per_k[k - 1] = rescale * fast;
        continue;
      }
      detail::for_each_lambda(n, pat.p, [&](const int* agents) {
        for (const auto& [a, b] : pat.slots)
          if (partition.set_of(agents[a], agents[b]) == k) return;  // lambda broken by I_k
        detail::fill_slots(data, tables, pat, agents, slots);
        sum += kernel.value(slots, subfits[k - 1].params.beta);
      });
      out.per_k[k - 1] = rescale * sum / count;
    }
  }

  double mean_k = 0.0;
  for (double v : out.per_k) mean_k += v;
  mean_k /= partition.n_sets;
  const double c_full = static_cast<double>(n - 1) / partition.l;
  const double c_sub = static_cast<double>(n - 1 - partition.l) / partition.l;
  out.delta_jackknife = c_full * out.delta_plugin - c_sub * mean_k;
  return out;
}

// Variance for the conditional-average target: plug-in h + s form, where h
// is the delta-method influence of parameter estimation and s the conditional
// variation of the moments. For outcome-free moments s is identically zero.
inline double conditional_variance(const FitResult& fit_full, const EffectKernel& kernel,
                                   const NetworkData& data, Family family) {
  const int n = data.n;
  const int kdim = data.dim_x;
  const auto& pat = kernel.pattern();
  const auto& params = fit_full.params;
  const detail::EdgeTables tables = detail::EdgeTables::build(data, family, params);
  const double count = detail::lambda_count(n, pat.p);

  // gradient of the conditional average with respect to (beta, alpha, gamma)
  Vec g = Vec::Zero(kdim + 2 * n);
  {
    SlotEval slots[8];
    Vec dbeta(kdim);
    double dpi[8];
    detail::for_each_lambda(n, pat.p, [&](const int* agents) {
      detail::fill_slots(data, tables, pat, agents, slots);
      kernel.mean_grad(slots, params.beta, dbeta, dpi);
      g.head(kdim) += dbeta;
      for (int s = 0; s < pat.r(); ++s) {
        g[kdim + agents[pat.slots[s].first]] += dpi[s];
        g[kdim + n + agents[pat.slots[s].second]] += dpi[s];
      }
    });
    g /= count;
  }
  const Mat s_acc =
      pat.uses_outcomes ? dyad_moment_sums(data, family, kernel, params) : Mat::Zero(n, n);

  // h_ij = N w'(score_ij + score_ji), w = K^{-1} g
  const Vec w = fit_full.factor->solve_full(g);
  const auto wb = w.head(kdim);

  double s_scale = 1.0;  // (N-p)!/(N-2)!
  for (int q = 3; q <= pat.p; ++q) s_scale /= (n - q + 1);

  double v_sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) {
      double h = 0.0;
      for (const auto& [a, b] : {std::pair<int, int>{i, j}, std::pair<int, int>{j, i}}) {
        const auto d = link_derivs(family, data.outcome(a, b), tables.eta(a, b));
        double dot = d.d1 * (w[kdim + a] + w[kdim + n + b]);
        const double* xv = data.covariates(a, b);
        for (int k = 0; k < kdim; ++k) dot += d.d1 * xv[k] * wb[k];
        h += dot;
      }
      h *= n;
      const double s_ij = pat.uses_outcomes ? s_scale * s_acc(i, j) : 0.0;
      const double hs = h + s_ij;
      v_sum += hs * hs;
    }
  return v_sum / (static_cast<double>(n) * (n - 1));
}

// Per-agent centered averages mu_tilde_i of the U-statistic representation:
// mu_tilde_i = ((N-p)!/(N-1)!) sum_{lambda containing i} (mbar_lambda - mu).
inline Vec population_mu_tilde(const FitResult& fit_full, const EffectKernel& kernel,
                               const NetworkData& data, Family family) {
  const int n = data.n;
  const auto& pat = kernel.pattern();
  const auto& params = fit_full.params;
  const detail::EdgeTables tables = detail::EdgeTables::build(data, family, params);

  Vec per_agent = Vec::Zero(n);
  double total = 0.0;
  SlotEval slots[8];
  detail::for_each_lambda(n, pat.p, [&](const int* agents) {
    detail::fill_slots(data, tables, pat, agents, slots);
    const double mbar = kernel.mean_value(slots, params.beta);
    total += mbar;
    for (int q = 0; q < pat.p; ++q) per_agent[agents[q]] += mbar;
  });
  const double count = detail::lambda_count(n, pat.p);
  const double mu_hat = total / count;
  // each agent appears in p * (N-1)!/(N-p)! patterns
  const double per_agent_count = pat.p * count / n;
  double scale1 = 1.0;  // (N-p)!/(N-1)!
  for (int q = 2; q <= pat.p; ++q) scale1 /= (n - q + 1);
  return scale1 * (per_agent.array() - per_agent_count * mu_hat).matrix();
}

// Order-p U-statistic variance for the population-average target.
inline double population_variance(const FitResult& fit_full, const EffectKernel& kernel,
                                  const NetworkData& data, Family family) {
  const Vec mu = population_mu_tilde(fit_full, kernel, data, family);
  return mu.squaredNorm() / data.n;
}

// ---------------------------------------------------------------------------
// Specification statistics
// ---------------------------------------------------------------------------

enum class TransitivityKind { kCovarianceForm, kTriangleCountForm };

inline std::unique_ptr<EffectKernel> make_transitivity_kernel(TransitivityKind kind) {
  if (kind == TransitivityKind::kCovarianceForm)
    return std::make_unique<TransitivityCovKernel>();
  return std::make_unique<TriangleCountKernel>();
}

// Parametric bootstrap SE of a raw statistic: networks are redrawn from the
// fitted conditional distribution with (beta, phi) held fixed, the statistic
// recomputed at the fixed parameters, and the empirical SD returned.
inline double bootstrap_statistic_se(const FitResult& fit_full, const NetworkData& data,
                                     Family family, const EffectKernel& kernel, int n_boot,
                                     std::uint64_t seed, int jobs = 1) {
  const int n = data.n;
  const auto& pat = kernel.pattern();
  const detail::EdgeTables tables = detail::EdgeTables::build(data, family, fit_full.params);
  const double count = detail::lambda_count(n, pat.p);

  std::vector<double> draws(n_boot);
  parallel_for(n_boot, jobs, [&](std::size_t b) {
    RngStream rng(seed, {0x626f6f74u, static_cast<std::uint64_t>(b)});
    NetworkData sim = data;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) sim.outcome(i, j) = simulate_outcome(family, tables.eta(i, j), rng);
    const double fast = kernel.average_fast(sim, tables.mu, fit_full.params.beta);
    if (!std::isnan(fast)) {
      draws[b] = fast;
      return;
    }
    SlotEval slots[8];
    double sum = 0.0;
    detail::for_each_lambda(n, pat.p, [&](const int* agents) {
      detail::fill_slots(sim, tables, pat, agents, slots);
      sum += kernel.value(slots, fit_full.params.beta);
    });
    draws[b] = sum / count;
  });

  double mean = 0.0;
  for (double d : draws) mean += d;
  mean /= n_boot;
  double var = 0.0;
  for (double d : draws) var += (d - mean) * (d - mean);
  return std::sqrt(var / (n_boot - 1));
}

// Jackknifed and studentized transitivity statistic.
inline EffectResult transitivity_statistic(const FitResult& fit_full,
                                           const std::vector<LeaveOutFit>& subfits,
                                           const LeaveOutPartition& partition,
                                           const NetworkData& data, Family family,
                                           TransitivityKind kind, int n_boot = 200,
                                           std::uint64_t seed = 1, int jobs = 1) {
  if (!family_is_binary(family))
    throw ValidationError("UnsupportedFamily: transitivity tests need a binary family");
  const auto kernel = make_transitivity_kernel(kind);
  EffectResult out = average_effect(fit_full, subfits, partition, *kernel, data, family);
  out.variance = conditional_variance(fit_full, *kernel, data, family);
  out.se = std::sqrt(out.variance) / data.n;
  if (n_boot > 0) {
    out.bootstrap_se = bootstrap_statistic_se(fit_full, data, family, *kernel, n_boot, seed, jobs);
    out.t_plugin = out.delta_plugin / out.bootstrap_se;
    out.t_jackknife = out.delta_jackknife / out.bootstrap_se;
  } else {
    out.t_plugin = out.delta_plugin / out.se;
    out.t_jackknife = out.delta_jackknife / out.se;
  }
  return out;
}

// Expected transitive-triangle frequency at the fitted parameters, with a
// triple-loop reference and a matrix-product fast path (P^2 off-diagonal).
inline double expected_clustering(const FitResult& fit_full, const NetworkData& data,
                                  Family family, bool fast_path = true) {
  if (!family_is_binary(family))
    throw ValidationError("UnsupportedFamily: clustering needs a binary family");
  const int n = data.n;
  const detail::EdgeTables tables = detail::EdgeTables::build(data, family, fit_full.params);
  const double count = detail::lambda_count(n, 3);
  if (fast_path) {
    Mat p = tables.mu;
    p.diagonal().setZero();
    const Mat p2 = p * p;  // zero diagonal excludes k = i and k = j terms
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) sum += p(i, j) * p2(i, j);
    return sum / count;
  }
  double sum = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      for (int k = 0; k < n; ++k) {
        if (k == i || k == j) continue;
        sum += tables.mu(i, j) * tables.mu(i, k) * tables.mu(k, j);
      }
    }
  return sum / count;
}

}  // namespace dyadnet
