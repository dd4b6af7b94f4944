#include "doctest.h"

#include <cmath>
#include <map>
#include <random>

#include "mdma/query.hpp"
#include "mdma/errors.hpp"
#include "mdma/sampler.hpp"
#include "mdma/stats.hpp"
#include "oracles.hpp"

using namespace mdma;

TEST_SUITE("sampler") {

TEST_CASE("one-hot weights give the unique path") {
  MdmaModel model = init_model({4, 3, 1, 1, 2}, 1);
  const auto& tree = model.tree();
  auto params = model.mutable_params();
  std::fill(params.begin() + static_cast<std::ptrdiff_t>(model.lambda_offset()), params.end(), -50.0);
  // root picks 2; left child maps row 2 -> 0, right child maps row 2 -> 1
  const std::size_t off = model.lambda_offset();
  params[off + tree.root().lambda_offset + 2] = 5.0;
  for (int row = 0; row < 3; ++row) {
    params[off + tree.levels[0][0].lambda_offset + row * 3 + 0] = 5.0;
    params[off + tree.levels[0][1].lambda_offset + row * 3 + 1] = 5.0;
  }
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const ComponentPath path = sample_component(model.ht(), rng);
    CHECK(path.node_choice[1][0] == 2);
    CHECK(path.node_choice[0][0] == 0);
    CHECK(path.node_choice[0][1] == 1);
    CHECK(path.leaf_component == std::vector<int>{0, 0, 1, 1});
  }
}

TEST_CASE("draw count equals internal node count") {
  std::mt19937_64 rng(1);
  for (int d : {1, 2, 3, 5, 8, 13}) {
    const MdmaModel model = oracle::random_model({d, 2, 1, 1, 2}, 2);
    CHECK(sample_component(model.ht(), rng).draws == static_cast<int>(model.tree().internal_node_count()));
  }
  const MdmaModel eight = oracle::random_model({8, 2, 1, 1, 2}, 2);
  CHECK(sample_component(eight.ht(), rng).draws == 7);
}

TEST_CASE("path frequencies match enumerated mixture weights") {
  const int d = 4, m = 2;
  const MdmaModel model = oracle::random_model({d, m, 1, 1, 2}, 9);
  const auto tensor = oracle::tensor_by_paths(model);
  const NormalizedLambdas lam = normalize_lambdas(model.ht());
  std::mt19937_64 rng(5);
  const int draws = 100000;
  std::vector<int> counts(tensor.size(), 0);
  for (int s = 0; s < draws; ++s) {
    const ComponentPath path = sample_component(lam, model.tree(), model.leaf_order(), rng);
    std::size_t cell = 0;
    for (int v = d - 1; v >= 0; --v) cell = cell * m + path.leaf_component[v];
    ++counts[cell];
  }
  for (std::size_t c = 0; c < tensor.size(); ++c) {
    const double expected = tensor[c] * draws;
    const double sd = std::sqrt(draws * tensor[c] * (1.0 - tensor[c]));
    CHECK(std::abs(counts[c] - expected) <= 4.0 * sd + 1.0);
  }
}

TEST_CASE("single-component marginals follow their network") {
  const MdmaModel model = oracle::random_model({3, 1, 2, 3, 2}, 4);
  const RowMatrix x = sample(model, 10000, 11);
  for (int v = 0; v < 3; ++v) {
    const UnivariateCdfNet net = model.net(0, v);
    std::vector<double> col(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) col[r] = x(r, v);
    CHECK(ks_one_sample(col, [&](double t) { return net.cdf(t); }).p_value > 0.01);
  }
}

TEST_CASE("empirical joint CDF matches the model CDF") {
  const MdmaModel model = oracle::random_model({3, 3, 2, 3, 2}, 6);
  const std::size_t n = 10000;
  const RowMatrix x = sample(model, n, 12);
  const QueryEngine engine(model);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int probe = 0; probe < 20; ++probe) {
    QuerySpec q;
    std::vector<double> at(3);
    for (int v = 0; v < 3; ++v) {
      // probe near the bulk of each coordinate
      at[v] = x(static_cast<Eigen::Index>(rng() % n), v) + 0.3 * normal(rng);
      q.push_back(VariableQuery::cdf(at[v]));
    }
    std::size_t below = 0;
    for (Eigen::Index r = 0; r < x.rows(); ++r) below += x(r, 0) <= at[0] && x(r, 1) <= at[1] && x(r, 2) <= at[2];
    CHECK(std::abs(static_cast<double>(below) / n - engine.evaluate(q)) <= 4.0 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("sampling is deterministic in the seed") {
  const MdmaModel model = oracle::random_model({4, 3, 1, 2, 2}, 7);
  const RowMatrix a = sample(model, 50, 99);
  const RowMatrix b = sample(model, 50, 99);
  const RowMatrix c = sample(model, 50, 100);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.allFinite());
  // A prefix of a longer run is the shorter run: per-row streams.
  const RowMatrix longer = sample(model, 80, 99);
  CHECK(longer.topRows(50) == a);
}

TEST_CASE("hierarchical and autoregressive samplers agree in distribution") {
  const MdmaModel model = oracle::random_model({3, 3, 1, 3, 2}, 8);
  const std::size_t n = 4000;
  const RowMatrix a = sample(model, n, 1);
  const RowMatrix b = sample_autoregressive(model, n, 2);
  for (int v = 0; v < 3; ++v) {
    std::vector<double> ca(n), cb(n);
    for (std::size_t r = 0; r < n; ++r) {
      ca[r] = a(static_cast<Eigen::Index>(r), v);
      cb[r] = b(static_cast<Eigen::Index>(r), v);
    }
    CHECK(ks_two_sample(ca, cb).p_value > 0.001);
  }
}

TEST_CASE("single-variable autoregressive sampling is the plain inverse") {
  const MdmaModel model = oracle::random_model({1, 3, 1, 2, 2}, 9);
  const RowMatrix a = sample_autoregressive(model, 200, 4);
  const RowMatrix b = sample(model, 200, 4);
  const std::vector<double> ca(a.data(), a.data() + 200), cb(b.data(), b.data() + 200);
  CHECK(ks_two_sample(ca, cb).p_value > 0.001);
}

TEST_CASE("invalid sampling arguments") {
  const MdmaModel model = oracle::random_model({2, 2, 1, 2, 2}, 1);
  CHECK_THROWS_AS(sample(model, 0, 1), InvalidArgument);
  CHECK_THROWS_AS(sample(model, 5, 1, 0.0), InvalidArgument);
}

}  // TEST_SUITE
