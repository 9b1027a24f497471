// Link-level objectives ell(y, x, beta, pi) with analytic derivatives through
// second order in (beta, pi), conditional means, and outcome simulation.
//
// Families are a closed enumeration so derivative correctness is testable
// in-repo. All four objectives are concave in the index eta = x'beta + pi,
// which makes the joint (beta, alpha, gamma) problem strictly concave on
// non-degenerate data.
#pragma once

#include <cmath>
#include <string>

#include "dyadnet/common.hpp"
#include "dyadnet/rng.hpp"

namespace dyadnet {

enum class Family { kProbit, kLogit, kGaussianNls, kPoissonQmle };

inline std::string family_name(Family f) {
  switch (f) {
    case Family::kProbit: return "probit";
    case Family::kLogit: return "logit";
    case Family::kGaussianNls: return "gaussian-nls";
    case Family::kPoissonQmle: return "poisson";
  }
  return "?";
}

inline Family family_from_name(const std::string& name) {
  if (name == "probit") return Family::kProbit;
  if (name == "logit") return Family::kLogit;
  if (name == "gaussian-nls" || name == "gaussian_nls") return Family::kGaussianNls;
  if (name == "poisson" || name == "poisson-qmle") return Family::kPoissonQmle;
  throw ValidationError("unknown family: " + name);
}

inline bool family_is_binary(Family f) {
  return f == Family::kProbit || f == Family::kLogit;
}

// Index guard band: probit log-CDF evaluation underflows past |eta| ~ 37, so
// the index is clamped there and the event is counted. Clamps signal
// near-degenerate fixed effects, not routine operation.
inline constexpr double kEtaGuard = 37.0;

namespace detail {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

// Scaled complementary error function exp(x^2) erfc(x) for x >= 0. Direct
// product is exact while erfc(x) stays normal; asymptotic series beyond.
inline double erfcx_pos(double x) {
  if (x <= 25.0) return std::exp(x * x) * std::erfc(x);
  const double z = 1.0 / (2.0 * x * x);
  // 1/(x sqrt(pi)) (1 - z + 3 z^2 - 15 z^3 + 105 z^4)
  const double series = 1.0 - z * (1.0 - 3.0 * z * (1.0 - 5.0 * z * (1.0 - 7.0 * z)));
  return series / (x * 1.7724538509055160273);
}

// log Phi(x), stable in both tails.
inline double norm_logcdf(double x) {
  if (x >= 0.0) return std::log1p(-0.5 * std::erfc(x * kInvSqrt2));
  // Phi(x) = 0.5 erfcx(-x/sqrt2) exp(-x^2/2)
  return std::log(0.5 * erfcx_pos(-x * kInvSqrt2)) - 0.5 * x * x;
}

// Inverse Mills ratio phi(x)/Phi(-x) = phi(-x)/(1 - Phi(-x)); the hazard of
// the upper tail. Stable for all x.
inline double norm_hazard_upper(double x) {
  if (x < 0.0) return norm_pdf(x) / (0.5 * std::erfc(x * kInvSqrt2));
  return kSqrt2OverPi / erfcx_pos(x * kInvSqrt2);
}

inline double logistic_cdf(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

}  // namespace detail

// Derivatives of ell with respect to the scalar index eta = x'beta + pi.
// Because every family depends on (beta, pi) only through eta,
//   d_pi ell   = d1,      d_beta ell   = d1 * x,
//   d_pipi ell = d2,      d_betapi ell = d2 * x,   d_betabeta ell = d2 * x x'.
struct LinkDerivs {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  bool clamped = false;
};

inline double clamp_eta(double eta, bool* clamped) {
  if (eta > kEtaGuard) {
    if (clamped) *clamped = true;
    return kEtaGuard;
  }
  if (eta < -kEtaGuard) {
    if (clamped) *clamped = true;
    return -kEtaGuard;
  }
  return eta;
}

inline void check_outcome_domain(Family family, double y) {
  switch (family) {
    case Family::kProbit:
    case Family::kLogit:
      if (y != 0.0 && y != 1.0)
        throw ValidationError(family_name(family) + " outcome must be 0 or 1, got " +
                              std::to_string(y));
      break;
    case Family::kPoissonQmle:
      if (y < 0.0)
        throw ValidationError("poisson outcome must be >= 0, got " + std::to_string(y));
      break;
    case Family::kGaussianNls:
      break;
  }
}

// value + first/second index derivatives in one pass (the fit hot path).
inline LinkDerivs link_derivs(Family family, double y, double eta_raw) {
  LinkDerivs out;
  const double eta = clamp_eta(eta_raw, &out.clamped);
  switch (family) {
    case Family::kProbit: {
      if (y == 1.0) {
        const double lam = detail::norm_hazard_upper(-eta);  // phi/Phi
        out.value = detail::norm_logcdf(eta);
        out.d1 = lam;
        out.d2 = -lam * (eta + lam);
      } else {
        const double lam = detail::norm_hazard_upper(eta);  // phi/(1-Phi)
        out.value = detail::norm_logcdf(-eta);
        out.d1 = -lam;
        out.d2 = -lam * (lam - eta);
      }
      break;
    }
    case Family::kLogit: {
      const double p = detail::logistic_cdf(eta);
      out.value = y * eta - detail::log1pexp(eta);
      out.d1 = y - p;
      out.d2 = -p * (1.0 - p);
      break;
    }
    case Family::kGaussianNls: {
      const double r = y - eta;
      out.value = -r * r;
      out.d1 = 2.0 * r;
      out.d2 = -2.0;
      break;
    }
    case Family::kPoissonQmle: {
      const double mu = std::exp(eta);
      out.value = y * eta - mu;
      out.d1 = y - mu;
      out.d2 = -mu;
      break;
    }
  }
  return out;
}

inline double link_value(Family family, double y, double eta) {
  return link_derivs(family, y, eta).value;
}

// Conditional mean mu(eta) and its first two eta-derivatives.
inline void mean_derivs(Family family, double eta_raw, double* mu, double* dmu,
                        double* d2mu) {
  bool clamped = false;
  const double eta = clamp_eta(eta_raw, &clamped);
  switch (family) {
    case Family::kProbit: {
      const double pdf = detail::norm_pdf(eta);
      if (mu) *mu = detail::norm_cdf(eta);
      if (dmu) *dmu = pdf;
      if (d2mu) *d2mu = -eta * pdf;
      break;
    }
    case Family::kLogit: {
      const double p = detail::logistic_cdf(eta);
      if (mu) *mu = p;
      if (dmu) *dmu = p * (1.0 - p);
      if (d2mu) *d2mu = p * (1.0 - p) * (1.0 - 2.0 * p);
      break;
    }
    case Family::kGaussianNls:
      if (mu) *mu = eta;
      if (dmu) *dmu = 1.0;
      if (d2mu) *d2mu = 0.0;
      break;
    case Family::kPoissonQmle: {
      const double m = std::exp(eta);
      if (mu) *mu = m;
      if (dmu) *dmu = m;
      if (d2mu) *d2mu = m;
      break;
    }
  }
}

inline double conditional_mean(Family family, double eta) {
  double mu;
  mean_derivs(family, eta, &mu, nullptr, nullptr);
  return mu;
}

// One draw from the family's data-generating process at index eta.
inline double simulate_outcome(Family family, double eta, RngStream& rng) {
  switch (family) {
    case Family::kProbit:
      return rng.normal() < eta ? 1.0 : 0.0;
    case Family::kLogit:
      return rng.logistic() < eta ? 1.0 : 0.0;
    case Family::kGaussianNls:
      return eta + rng.normal();
    case Family::kPoissonQmle: {
      bool clamped = false;
      return static_cast<double>(rng.poisson(std::exp(clamp_eta(eta, &clamped))));
    }
  }
  return 0.0;
}

}  // namespace dyadnet
