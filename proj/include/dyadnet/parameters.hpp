// Parameter container for (beta, alpha, gamma). The two fixed-effect blocks
// are identified only up to a common level shift, pinned by the normalization
// sum(alpha) = sum(gamma).
#pragma once

#include "dyadnet/common.hpp"

namespace dyadnet {

struct ParameterSet {
  Vec beta;
  Vec alpha;
  Vec gamma;

  int n() const { return static_cast<int>(alpha.size()); }
  int dim_beta() const { return static_cast<int>(beta.size()); }
  double pi(int i, int j) const { return alpha[i] + gamma[j]; }
  double normalization_gap() const { return alpha.sum() - gamma.sum(); }

  static ParameterSet zeros(int n, int dim_beta) {
    ParameterSet p;
    p.beta = Vec::Zero(dim_beta);
    p.alpha = Vec::Zero(n);
    p.gamma = Vec::Zero(n);
    return p;
  }

  // Level shift onto the normalization manifold; leaves every pi unchanged.
  void enforce_normalization() {
    const double t = normalization_gap() / (2.0 * n());
    alpha.array() -= t;
    gamma.array() += t;
  }

  // Flat view in (beta, alpha, gamma) order.
  Vec packed() const {
    Vec v(dim_beta() + 2 * n());
    v.head(dim_beta()) = beta;
    v.segment(dim_beta(), n()) = alpha;
    v.tail(n()) = gamma;
    return v;
  }

  static ParameterSet unpack(const Vec& v, int n, int dim_beta) {
    ParameterSet p;
    p.beta = v.head(dim_beta);
    p.alpha = v.segment(dim_beta, n);
    p.gamma = v.tail(n);
    return p;
  }
};

}  // namespace dyadnet
