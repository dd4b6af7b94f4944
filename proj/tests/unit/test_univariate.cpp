#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "mdma/errors.hpp"
#include "mdma/numerics.hpp"
#include "mdma/univariate_cdf.hpp"
#include "oracles.hpp"

using namespace mdma;

namespace {

// depth 1, width 1, unit weights, zero biases and gates: phi(x) = sigmoid(x).
UnivariateCdfNet logistic_net() {
  const NetShape shape(1, 1);
  std::vector<double> eff(shape.param_count(), 0.0);
  eff[shape.weight_offset(0)] = 1.0;
  eff[shape.weight_offset(1)] = 1.0;
  return UnivariateCdfNet::from_effective(shape, eff);
}

}  // namespace

TEST_SUITE("univariate_cdf") {

TEST_CASE("numerics helpers are stable") {
  CHECK(softplus(0.0, 10.0) == doctest::Approx(std::log(2.0) / 10.0));
  CHECK(softplus(1000.0, 1.0) == doctest::Approx(1000.0));
  CHECK(softplus(-1000.0, 1.0) >= 0.0);
  CHECK(inverse_softplus(softplus(0.37, 10.0), 10.0) == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
  CHECK(std::isfinite(log_sigmoid(800.0)));
}

TEST_CASE("parameter layout") {
  const NetShape s(2, 3);
  CHECK(s.weight_offset(0) == 0);
  CHECK(s.bias_offset(0) == 3);
  CHECK(s.weight_offset(1) == 6);
  CHECK(s.bias_offset(1) == 15);
  CHECK(s.weight_offset(2) == 18);
  CHECK(s.bias_offset(2) == 21);
  CHECK(s.gate_offset(0) == 22);
  CHECK(s.param_count() == 28);
  CHECK_THROWS_AS(NetShape(0, 3), InvalidArgument);
  CHECK_THROWS_AS(NetShape(1, 0), InvalidArgument);
}

TEST_CASE("identity-reduced net is the logistic function") {
  const UnivariateCdfNet net = logistic_net();
  CHECK(net.cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(net.density(0.0) == doctest::Approx(0.25).epsilon(1e-15));
  for (double x : {-3.0, -0.7, 1.2, 5.0}) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    CHECK(net.cdf(x) == doctest::Approx(s).epsilon(1e-14));
    CHECK(net.density(x) == doctest::Approx(s * (1.0 - s)).epsilon(1e-13));
  }
}

TEST_CASE("random nets are valid CDFs") {
  std::mt19937_64 rng(3);
  for (int depth = 1; depth <= 3; ++depth) {
    for (int width : {1, 3, 5}) {
      const UnivariateCdfNet net = UnivariateCdfNet::random(NetShape(depth, width), rng);
      // Freshly initialized nets are very flat, so the tails are probed far out.
      CHECK(net.cdf(-1e200) < 1e-12);
      CHECK(net.cdf(1e200) > 1.0 - 1e-12);
      double prev = 0.0;
      for (double x = -20.0; x <= 20.0; x += 0.25) {
        const double c = net.cdf(x);
        CHECK(c >= prev);
        CHECK(c > 0.0);
        CHECK(c < 1.0 + 1e-15);
        prev = c;
      }
    }
  }
}

TEST_CASE("density is the derivative of the CDF") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const UnivariateCdfNet net = UnivariateCdfNet::random(NetShape(1 + trial % 3, 1 + trial % 4), rng);
    for (double x : {-2.0, -0.3, 0.0, 0.8, 2.5}) {
      const double h = 1e-5;
      const double fd = (net.cdf(x + h) - net.cdf(x - h)) / (2.0 * h);
      CHECK(net.density(x) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("density integrates to one") {
  std::mt19937_64 rng(6);
  const UnivariateCdfNet net = UnivariateCdfNet::random(NetShape(2, 3), rng);
  const double mass = oracle::integrate([&](double x) { return net.density(x); }, -60.0, 60.0, 4000);
  CHECK(mass == doctest::Approx(net.cdf(60.0) - net.cdf(-60.0)).epsilon(1e-9));
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("inverse round trip") {
  std::mt19937_64 rng(7);
  const UnivariateCdfNet net = UnivariateCdfNet::random(NetShape(2, 3), rng);
  for (double u : {1e-6, 0.01, 0.3, 0.5, 0.77, 0.999}) CHECK(std::abs(net.cdf(net.inverse(u, 1e-12)) - u) <= 1e-12);
  CHECK_THROWS_AS(net.inverse(0.0, 1e-9), InvalidArgument);
  CHECK_THROWS_AS(net.inverse(1.0, 1e-9), InvalidArgument);
  CHECK_THROWS_AS(net.inverse(0.5, 0.0), InvalidArgument);
}

TEST_CASE("inversion bracket overflow") {
  auto stuck = [](double) { return 0.1; };
  CHECK_THROWS_AS(bisect_cdf(stuck, 0.5, 1e-9), NumericalError);
}

TEST_CASE("non-finite input is rejected") {
  const UnivariateCdfNet net = logistic_net();
  CHECK_THROWS_AS(net.log_values(std::nan("")), InvalidArgument);
}

TEST_CASE("batched and scalar passes agree") {
  std::mt19937_64 rng(8);
  const NetShape shape(2, 4);
  const UnivariateCdfNet net = UnivariateCdfNet::random(shape, rng);
  std::vector<double> x;
  for (int i = 0; i < 21; ++i) x.push_back(-5.0 + 0.5 * i);
  std::vector<double> lc(x.size()), ld(x.size());
  net_forward_batch(shape, net.effective_params(), x, lc, ld);
  std::vector<double> g_cdf(x.size()), g_den(x.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    g_cdf[i] = normal(rng);
    g_den[i] = normal(rng);
  }
  std::vector<double> batch_grad(shape.param_count(), 0.0), scalar_grad(shape.param_count(), 0.0);
  std::vector<double> batch_gx(x.size());
  net_backward_batch(shape, net.effective_params(), x, g_cdf, g_den, batch_grad, batch_gx);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const NetLogValues v = net_forward(shape, net.effective_params(), x[i]);
    CHECK(lc[i] == doctest::Approx(v.log_cdf).epsilon(1e-12));
    CHECK(ld[i] == doctest::Approx(v.log_density).epsilon(1e-12));
    const double gx = net_backward(shape, net.effective_params(), x[i], g_cdf[i], g_den[i], scalar_grad);
    CHECK(batch_gx[i] == doctest::Approx(gx).epsilon(1e-10));
  }
  for (std::size_t k = 0; k < scalar_grad.size(); ++k) CHECK(batch_grad[k] == doctest::Approx(scalar_grad[k]).epsilon(1e-10));
}

TEST_CASE("network gradient matches central differences") {
  std::mt19937_64 rng(9);
  const NetShape shape(2, 3);
  const UnivariateCdfNet net = UnivariateCdfNet::random(shape, rng);
  const double x = 0.4;
  const double wc = 0.7;
  const double wd = -1.3;
  std::vector<double> eff(net.effective_params().begin(), net.effective_params().end());
  std::vector<double> grad(shape.param_count(), 0.0);
  const double gx = net_backward(shape, eff, x, wc, wd, grad);
  auto objective = [&](std::span<const double> p, double at) {
    const NetLogValues v = net_forward(shape, p, at);
    return wc * v.log_cdf + wd * v.log_density;
  };
  const auto fd = oracle::fd_gradient([&](std::span<const double> p) { return objective(p, x); }, eff);
  for (std::size_t i = 0; i < fd.size(); ++i) CHECK(oracle::grad_close(grad[i], fd[i]));
  const double h = 1e-6;
  CHECK(oracle::grad_close(gx, (objective(eff, x + h) - objective(eff, x - h)) / (2.0 * h)));
}

}  // TEST_SUITE
