#pragma once

#include <functional>
#include <span>

namespace mdma {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Survival function of the limiting Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

/// Two-sample Kolmogorov-Smirnov test; asymptotic p-value with the Stephens small-sample
/// correction.
TestResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// One-sample Kolmogorov-Smirnov test of `sample` against a continuous CDF.
TestResult ks_one_sample(std::span<const double> sample, const std::function<double(double)>& cdf);

struct KendallResult {
  double tau = 0.0;      // tau-b
  double z = 0.0;        // normal score of the concordance excess
  double p_value = 1.0;  // two-sided, normal approximation
};

/// Kendall's tau-b with a tie-corrected normal approximation to the null distribution.
/// O(n log n).
KendallResult kendall_tau(std::span<const double> x, std::span<const double> y);

}  // namespace mdma
