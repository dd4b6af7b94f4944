#pragma once

#include <cmath>
#include <limits>

#include "mdma/errors.hpp"

namespace mdma {

/// softplus(x, beta) = log(1 + exp(beta x)) / beta, stable for any |beta x|.
inline double softplus(double x, double beta = 1.0) {
  const double bx = beta * x;
  return (std::max(bx, 0.0) + std::log1p(std::exp(-std::abs(bx)))) / beta;
}

/// d softplus(x, beta) / dx.
inline double softplus_grad(double x, double beta = 1.0) {
  const double bx = beta * x;
  if (bx >= 0.0) return 1.0 / (1.0 + std::exp(-bx));
  const double e = std::exp(bx);
  return e / (1.0 + e);
}

/// Raw value whose softplus(., beta) equals y > 0.
inline double inverse_softplus(double y, double beta = 1.0) {
  const double by = beta * y;
  // log(exp(by) - 1) = by + log(1 - exp(-by))
  return (by + std::log(-std::expm1(-by))) / beta;
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sigmoid(double x) { return -softplus(-x); }

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Inverts a nondecreasing function with values in (0,1): returns x with |cdf(x) - u| <= tol.
/// Starts from [-1, 1] and doubles outward until the bracket straddles u, then bisects.
template <class Cdf>
double bisect_cdf(Cdf&& cdf, double u, double tol) {
  if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("inverse requires 0 < u < 1");
  if (!(tol > 0.0)) throw InvalidArgument("inverse requires tol > 0");
  constexpr double kLimit = 1152921504606846976.0;  // 2^60
  double lo = -1.0;
  double hi = 1.0;
  double f_hi = cdf(hi);
  while (f_hi < u) {
    lo = hi;
    hi *= 2.0;
    if (hi > kLimit) throw NumericalError("inversion bracket overflow");
    f_hi = cdf(hi);
  }
  double f_lo = cdf(lo);
  while (f_lo > u) {
    hi = lo;
    lo *= 2.0;
    if (lo < -kLimit) throw NumericalError("inversion bracket overflow");
    f_lo = cdf(lo);
  }
  if (std::abs(f_lo - u) <= tol) return lo;
  if (std::abs(f_hi - u) <= tol) return hi;
  for (;;) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) return mid;  // bracket exhausted at double resolution
    const double f_mid = cdf(mid);
    if (std::abs(f_mid - u) <= tol) return mid;
    if (f_mid < u) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
}

}  // namespace mdma
