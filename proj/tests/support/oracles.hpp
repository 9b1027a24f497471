// Test-only oracles, kept independent of the library's solver path:
//  - central finite differences with one Richardson refinement
//  - a dense BFGS maximizer over the packed (beta, alpha, gamma) vector
//  - naive dense assembly of the penalized objective, gradient, and Hessian
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "dyadnet/estimator.hpp"
#include "dyadnet/model_family.hpp"
#include "dyadnet/network_data.hpp"
#include "dyadnet/parameters.hpp"

namespace testsupport {

using dyadnet::Family;
using dyadnet::Mat;
using dyadnet::NetworkData;
using dyadnet::ParameterSet;
using dyadnet::Vec;

// Central difference with Richardson refinement, base step h.
inline double fd_derivative(const std::function<double(double)>& f, double x, double h = 1e-5) {
  auto central = [&](double step) { return (f(x + step) - f(x - step)) / (2.0 * step); };
  const double d1 = central(h);
  const double d2 = central(h / 2.0);
  return (4.0 * d2 - d1) / 3.0;
}

// Penalized objective via naive loops (no shared accumulation code with the
// estimator's sweep).
inline double naive_objective(const NetworkData& data, Family family, const ParameterSet& p,
                              double normalizer, double b,
                              const std::vector<std::uint8_t>& mask = {}) {
  double total = 0.0;
  for (int i = 0; i < data.n; ++i)
    for (int j = 0; j < data.n; ++j) {
      if (i == j) continue;
      if (!mask.empty() && !mask[static_cast<std::size_t>(i) * data.n + j]) continue;
      double eta = p.alpha[i] + p.gamma[j];
      for (int k = 0; k < data.dim_x; ++k) eta += data.covariates(i, j)[k] * p.beta[k];
      total += dyadnet::link_value(family, data.outcome(i, j), eta);
    }
  const double gap = p.alpha.sum() - p.gamma.sum();
  return total / normalizer - 0.5 * b / data.n * gap * gap;
}

inline Vec naive_gradient(const NetworkData& data, Family family, const ParameterSet& p,
                          double normalizer, double b,
                          const std::vector<std::uint8_t>& mask = {}) {
  const int n = data.n;
  const int kd = data.dim_x;
  Vec g = Vec::Zero(kd + 2 * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!mask.empty() && !mask[static_cast<std::size_t>(i) * n + j]) continue;
      double eta = p.alpha[i] + p.gamma[j];
      for (int k = 0; k < kd; ++k) eta += data.covariates(i, j)[k] * p.beta[k];
      const auto d = dyadnet::link_derivs(family, data.outcome(i, j), eta);
      for (int k = 0; k < kd; ++k) g[k] += d.d1 * data.covariates(i, j)[k] / normalizer;
      g[kd + i] += d.d1 / normalizer;
      g[kd + n + j] += d.d1 / normalizer;
    }
  const double gap = p.alpha.sum() - p.gamma.sum();
  g.segment(kd, n).array() -= b / n * gap;
  g.tail(n).array() += b / n * gap;
  return g;
}

// Dense negative Hessian of the penalized objective, assembled edge by edge.
inline Mat naive_neg_hessian(const NetworkData& data, Family family, const ParameterSet& p,
                             double normalizer, double b,
                             const std::vector<std::uint8_t>& mask = {}) {
  const int n = data.n;
  const int kd = data.dim_x;
  const int dim = kd + 2 * n;
  Mat K = Mat::Zero(dim, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      if (!mask.empty() && !mask[static_cast<std::size_t>(i) * n + j]) continue;
      double eta = p.alpha[i] + p.gamma[j];
      for (int k = 0; k < kd; ++k) eta += data.covariates(i, j)[k] * p.beta[k];
      const auto d = dyadnet::link_derivs(family, data.outcome(i, j), eta);
      const double omega = -d.d2 / normalizer;
      Vec grad_eta = Vec::Zero(dim);  // d eta / d theta
      for (int k = 0; k < kd; ++k) grad_eta[k] = data.covariates(i, j)[k];
      grad_eta[kd + i] = 1.0;
      grad_eta[kd + n + j] = 1.0;
      K += omega * grad_eta * grad_eta.transpose();
    }
  Vec v = Vec::Zero(dim);
  v.segment(kd, n).array() = 1.0;
  v.tail(n).array() = -1.0;
  K += (b / n) * v * v.transpose();
  return K;
}

// Generic dense quasi-Newton (BFGS) maximizer over all packed parameters.
// Knows nothing about the problem structure.
struct BfgsResult {
  Vec x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline BfgsResult bfgs_maximize(const std::function<double(const Vec&)>& f,
                                const std::function<Vec(const Vec&)>& grad, Vec x0,
                                double tol = 1e-8, int max_iter = 5000) {
  const int dim = static_cast<int>(x0.size());
  BfgsResult res;
  res.x = std::move(x0);
  Mat Hinv = Mat::Identity(dim, dim);
  Vec g = grad(res.x);
  double value = f(res.x);
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it;
    if (g.lpNorm<Eigen::Infinity>() <= tol) {
      res.converged = true;
      break;
    }
    Vec dir = Hinv * g;
    double slope = g.dot(dir);
    if (slope <= 0.0) {  // reset on loss of ascent
      Hinv = Mat::Identity(dim, dim);
      dir = g;
      slope = g.dot(dir);
    }
    double t = 1.0;
    Vec x_new;
    double value_new = value;
    bool accepted = false;
    for (int ls = 0; ls < 80; ++ls) {
      x_new = res.x + t * dir;
      value_new = f(x_new);
      if (value_new >= value + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // objective flat at double precision: the iterate is as polished as a
      // value-gated search can make it
      res.converged = g.lpNorm<Eigen::Infinity>() < 1e-6;
      break;
    }
    Vec g_new = grad(x_new);
    Vec s = x_new - res.x;
    Vec yv = g - g_new;  // gradient of -f increases
    const double sy = s.dot(yv);
    if (sy > 1e-14) {
      const double rho = 1.0 / sy;
      Mat left = Mat::Identity(dim, dim) - rho * s * yv.transpose();
      Hinv = left * Hinv * left.transpose() + rho * s * s.transpose();
    }
    res.x = std::move(x_new);
    g = std::move(g_new);
    value = value_new;
  }
  res.value = value;
  return res;
}

// Synthetic network with standard-normal covariates and known truth.
inline NetworkData simulate_network(Family family, int n, const Vec& beta, const Vec& alpha,
                                    const Vec& gamma, std::uint64_t seed) {
  NetworkData d = dyadnet::make_network(n, static_cast<int>(beta.size()));
  dyadnet::RngStream rng(seed, {0x73696d75u});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double eta = alpha[i] + gamma[j];
      for (int k = 0; k < beta.size(); ++k) {
        const double x = rng.normal();
        d.covariates(i, j)[k] = x;
        eta += x * beta[k];
      }
      d.outcome(i, j) = dyadnet::simulate_outcome(family, eta, rng);
    }
  return d;
}

// Redraws until the degeneracy filter keeps every node, so fixed effects are
// interior and comparisons against other optimizers are well posed.
inline NetworkData simulate_clean_network(Family family, int n, const Vec& beta,
                                          const Vec& alpha, const Vec& gamma,
                                          std::uint64_t seed) {
  for (std::uint64_t attempt = 0; attempt < 256; ++attempt) {
    NetworkData d = simulate_network(family, n, beta, alpha, gamma, seed + 1000 * attempt);
    try {
      auto [filtered, report] = dyadnet::filter_degenerate(d, family);
      if (report.empty()) return d;
    } catch (const dyadnet::ValidationError&) {
      // draw collapsed below the minimum size; try the next one
    }
  }
  throw std::runtime_error("simulate_clean_network: no clean draw found");
}

// BFGS on the penalized network objective from a cold start.
inline BfgsResult bfgs_fit(const NetworkData& data, Family family, double normalizer, double b,
                           const std::vector<std::uint8_t>& mask = {}, double tol = 1e-8) {
  const int dim = data.dim_x + 2 * data.n;
  auto unpack = [&](const Vec& v) { return ParameterSet::unpack(v, data.n, data.dim_x); };
  auto f = [&](const Vec& v) { return naive_objective(data, family, unpack(v), normalizer, b, mask); };
  auto g = [&](const Vec& v) { return naive_gradient(data, family, unpack(v), normalizer, b, mask); };
  return bfgs_maximize(f, g, Vec::Zero(dim), tol);
}

}  // namespace testsupport
