#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "mdma/errors.hpp"
#include "mdma/query.hpp"
#include "oracles.hpp"

using namespace mdma;

namespace {

double eval(const MdmaModel& model, const std::string& q) { return evaluate(model, parse_query(q)); }

std::string num(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

TEST_SUITE("query") {

TEST_CASE("query parsing") {
  const QuerySpec q = parse_query("c:1.5, d:-2,m,given:3e-1");
  REQUIRE(q.size() == 4);
  CHECK(q[0].tag == Tag::Cdf);
  CHECK(q[0].x == 1.5);
  CHECK(q[1].tag == Tag::Density);
  CHECK(q[1].x == -2.0);
  CHECK(q[2].tag == Tag::Marginalize);
  CHECK(q[3].tag == Tag::ConditionDensity);
  CHECK(q[3].x == doctest::Approx(0.3));
  CHECK(parse_query(format_query(q))[3].x == q[3].x);
  CHECK_THROWS_AS(parse_query("c:abc"), InvalidArgument);
  CHECK_THROWS_AS(parse_query("q:1"), InvalidArgument);
  CHECK_THROWS_AS(parse_query("c:1,,m"), InvalidArgument);
}

TEST_CASE("CDF at infinity-like points is one, marginalizing everything is one") {
  const MdmaModel model = oracle::random_model({3, 3, 2, 3, 2}, 1);
  CHECK(eval(model, "c:1e6,c:1e6,c:1e6") == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(eval(model, "m,m,m") == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(eval(model, "c:-1e6,c:1e6,c:1e6") < 1e-9);
}

TEST_CASE("wrong query length is rejected") {
  const MdmaModel model = oracle::random_model({2, 2, 1, 2, 2}, 1);
  CHECK_THROWS_AS(eval(model, "c:0"), InvalidArgument);
  CHECK_THROWS_AS(eval(model, "given:0,m"), InvalidArgument);
}

TEST_CASE("marginal density equals integral of the joint") {
  const MdmaModel model = oracle::random_model({2, 3, 2, 3, 2}, 2);
  for (double x1 : {-1.0, 0.2, 1.7}) {
    const double quad = oracle::integrate(
        [&](double x2) { return eval(model, "d:" + num(x1) + ",d:" + num(x2)); }, -40.0, 40.0, 800);
    CHECK(eval(model, "d:" + num(x1) + ",m") == doctest::Approx(quad).epsilon(1e-8));
  }
}

TEST_CASE("joint density is the mixed derivative of the joint CDF") {
  const MdmaModel model = oracle::random_model({2, 2, 1, 3, 2}, 3);
  const double a = 0.3, b = -0.4, h = 1e-4;
  auto F = [&](double x, double y) { return eval(model, "c:" + num(x) + ",c:" + num(y)); };
  const double fd = (F(a + h, b + h) - F(a + h, b - h) - F(a - h, b + h) + F(a - h, b - h)) / (4.0 * h * h);
  CHECK(eval(model, "d:" + num(a) + ",d:" + num(b)) == doctest::Approx(fd).epsilon(1e-5));
}

TEST_CASE("conditional is a ratio of contractions") {
  const MdmaModel model = oracle::random_model({3, 3, 2, 2, 2}, 4);
  const double joint = eval(model, "c:0.5,m,d:-0.2");
  const double marg = eval(model, "m,m,d:-0.2");
  CHECK(eval(model, "c:0.5,m,given:-0.2") == doctest::Approx(joint / marg).epsilon(1e-12));
  CHECK(eval(model, "c:1e6,m,given:-0.2") == doctest::Approx(1.0).epsilon(1e-9));
  const double quad = oracle::integrate(
      [&](double x) { return eval(model, "d:" + num(x) + ",m,given:-0.2"); }, -40.0, 40.0, 800);
  CHECK(quad == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("conditioning on a zero-density event") {
  const MdmaModel model = oracle::random_model({2, 2, 1, 2, 2}, 5);
  CHECK_THROWS_AS(eval(model, "c:0,given:1e200"), NumericalError);
}

TEST_CASE("masked log density equals log of the quadrature marginal") {
  const MdmaModel model = oracle::random_model({2, 3, 2, 3, 2}, 6);
  const std::vector<double> x{0.4, -1.1};
  const MissingMask mask{0, 1};
  const double quad = oracle::integrate(
      [&](double x2) { return std::exp(log_density(model, std::vector<double>{0.4, x2}, {})); }, -40.0, 40.0, 800);
  CHECK(log_density(model, x, mask) == doctest::Approx(std::log(quad)).epsilon(1e-8));
  CHECK_THROWS_AS(log_density(model, x, MissingMask{1, 1}), InvalidArgument);
}

TEST_CASE("batch log densities match single evaluations and subsets") {
  const MdmaModel model = oracle::random_model({4, 3, 1, 2, 2}, 7);
  const QueryEngine engine(model);
  RowMatrix x(600, 4);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (int j = 0; j < 4; ++j) x(r, j) = normal(rng);
  const Eigen::VectorXd full = engine.log_density_batch(x, {});
  const Eigen::MatrixXd subsets = engine.log_marginals(x, {{1, 1, 1, 1}, {1, 0, 1, 0}});
  for (Eigen::Index r : {0, 17, 511, 512, 599}) {
    const std::vector<double> row{x(r, 0), x(r, 1), x(r, 2), x(r, 3)};
    CHECK(full(r) == doctest::Approx(engine.log_density(row, {})).epsilon(1e-12));
    CHECK(subsets(r, 0) == doctest::Approx(full(r)).epsilon(1e-12));
    CHECK(subsets(r, 1) == doctest::Approx(engine.log_density(row, MissingMask{0, 1, 0, 1})).epsilon(1e-12));
  }
}

TEST_CASE("non-finite observed value is rejected") {
  const MdmaModel model = oracle::random_model({2, 2, 1, 2, 2}, 8);
  CHECK_THROWS_AS(log_density(model, std::vector<double>{std::nan(""), 0.0}, {}), InvalidArgument);
  CHECK(std::isfinite(log_density(model, std::vector<double>{std::nan(""), 0.0}, MissingMask{1, 0})));
}

TEST_CASE("density grid cells are bivariate marginals at cell midpoints") {
  const MdmaModel model = oracle::random_model({3, 2, 1, 2, 2}, 9);
  const RowMatrix grid = density_grid(model, 2, 0, -1.0, 1.0, 4);
  REQUIRE(grid.rows() == 16);
  CHECK(grid(0, 0) == -0.75);
  CHECK(grid(0, 1) == -0.75);
  CHECK(grid(1, 1) == -0.25);
  CHECK(grid(4, 0) == -0.25);
  for (Eigen::Index r : {0, 5, 15}) {
    const double expected = eval(model, "d:" + num(grid(r, 1)) + ",m,d:" + num(grid(r, 0)));
    CHECK(grid(r, 2) == doctest::Approx(expected).epsilon(1e-12));
  }
  CHECK_THROWS_AS(density_grid(model, 1, 1, 0.0, 1.0, 3), InvalidArgument);
  CHECK_THROWS_AS(density_grid(model, 0, 1, 1.0, 0.0, 3), InvalidArgument);
}

}  // TEST_SUITE
