#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "mdma/stats.hpp"

using namespace mdma;

namespace {

// O(n^2) tau-b straight from the pair definition.
double tau_b_by_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  double concordant = 0.0, discordant = 0.0, tied_x = 0.0, tied_y = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        tied_x += 1.0;
      } else if (dy == 0.0) {
        tied_y += 1.0;
      } else if (dx * dy > 0.0) {
        concordant += 1.0;
      } else {
        discordant += 1.0;
      }
    }
  return (concordant - discordant) /
         std::sqrt((concordant + discordant + tied_x) * (concordant + discordant + tied_y));
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("limiting Kolmogorov survival function") {
  // scipy.stats.kstwobign.sf
  CHECK(kolmogorov_survival(0.5) == doctest::Approx(0.9639452436648751).epsilon(1e-12));
  CHECK(kolmogorov_survival(1.0) == doctest::Approx(0.26999967167735456).epsilon(1e-12));
  CHECK(kolmogorov_survival(1.36) == doctest::Approx(0.049485876755377876).epsilon(1e-12));
  CHECK(kolmogorov_survival(2.0) == doctest::Approx(0.0006709252557796953).epsilon(1e-10));
  CHECK(kolmogorov_survival(0.0) == 1.0);
}

TEST_CASE("two-sample statistic") {
  const std::vector<double> a{0.61, 0.29, 0.06, 0.59, -1.73, -0.74, 0.51, -0.56, 0.39, 1.64, 0.05, -0.06, 0.64,
                              -0.82, 0.37, 1.77, 1.09, -1.28, 2.36, 1.31, 1.05, -0.32, -0.4, 1.06, -2.47};
  const std::vector<double> b{2.2, 1.66, 1.38, 0.2, 0.36, 0.0, 0.96, 1.56, 0.44, 1.5, -0.3, 0.66,
                              2.31, 3.29, -0.27, -0.37, 0.38, 0.7, 0.19, -0.41, -0.26, 3.1, 0.42};
  const TestResult r = ks_two_sample(a, b);
  CHECK(r.statistic == doctest::Approx(0.24).epsilon(1e-12));  // scipy ks_2samp
  const double en = std::sqrt(25.0 * 23.0 / 48.0);
  CHECK(r.p_value == doctest::Approx(kolmogorov_survival((en + 0.12 + 0.11 / en) * 0.24)));
  CHECK(ks_two_sample(a, a).statistic == 0.0);
  CHECK(ks_two_sample(a, a).p_value == 1.0);
}

TEST_CASE("one-sample statistic against the normal CDF") {
  const std::vector<double> a{0.61, 0.29, 0.06, 0.59, -1.73, -0.74, 0.51, -0.56, 0.39, 1.64, 0.05, -0.06, 0.64,
                              -0.82, 0.37, 1.77, 1.09, -1.28, 2.36, 1.31, 1.05, -0.32, -0.4, 1.06, -2.47};
  const TestResult r = ks_one_sample(a, [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); });
  CHECK(r.statistic == doctest::Approx(0.17409188119887736).epsilon(1e-12));  // scipy kstest
}

TEST_CASE("KS test accepts same-distribution samples at the nominal rate") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  int rejections = 0;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> a(300), b(400);
    for (auto& v : a) v = normal(rng);
    for (auto& v : b) v = normal(rng);
    rejections += ks_two_sample(a, b).p_value < 0.05;
  }
  CHECK(rejections >= 2);
  CHECK(rejections <= 20);
}

TEST_CASE("Kendall tau-b with ties matches reference") {
  const std::vector<double> x{1, 2, 2, 3, 4, 4, 4, 5, 6, 7, 7, 8};
  const std::vector<double> y{2, 1, 3, 3, 5, 4, 6, 6, 5, 8, 7, 7};
  const KendallResult r = kendall_tau(x, y);
  // scipy.stats.kendalltau(method="asymptotic")
  CHECK(r.tau == doctest::Approx(0.7967743005971106).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(0.0005891480030499808).epsilon(1e-10));
  const std::vector<double> x2{0.3, 1.2, -0.5, 2.2, 0.9, 1.7, -1.1, 0.4};
  const std::vector<double> y2{1.0, 0.2, 0.5, -0.3, 0.8, -1.2, 0.1, 0.6};
  const KendallResult r2 = kendall_tau(x2, y2);
  CHECK(r2.tau == doctest::Approx(-0.2857142857142857).epsilon(1e-12));
  CHECK(r2.p_value == doctest::Approx(0.32229959587191925).epsilon(1e-10));
}

TEST_CASE("fast Kendall tau equals the pairwise definition") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> small(0, 6);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + rng() % 60;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = trial % 2 ? small(rng) : normal(rng);
      y[i] = trial % 3 ? small(rng) + 0.3 * x[i] : normal(rng);
    }
    CHECK(kendall_tau(x, y).tau == doctest::Approx(tau_b_by_pairs(x, y)).epsilon(1e-12));
  }
}

TEST_CASE("Kendall tau extremes and degenerate input") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> up{2, 4, 6, 8, 10};
  const std::vector<double> down{5, 4, 3, 2, 1};
  const std::vector<double> flat{1, 1, 1, 1, 1};
  CHECK(kendall_tau(x, up).tau == doctest::Approx(1.0));
  CHECK(kendall_tau(x, down).tau == doctest::Approx(-1.0));
  CHECK(kendall_tau(x, flat).p_value == 1.0);
  CHECK(kendall_tau(x, up).p_value >= 0.0);
}

}  // TEST_SUITE
