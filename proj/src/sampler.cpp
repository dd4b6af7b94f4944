#include "mdma/sampler.hpp"

#include <cmath>

#include "mdma/errors.hpp"
#include "mdma/numerics.hpp"

namespace mdma {

std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

double open_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

int draw_categorical(std::span<const double> weights, double total, std::mt19937_64& rng) {
  const double target = open_uniform(rng) * total;
  double acc = 0.0;
  int last_positive = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) continue;
    acc += weights[k];
    last_positive = static_cast<int>(k);
    if (target < acc) return last_positive;
  }
  return last_positive;  // rounding left target just above the accumulated total
}

ComponentPath sample_component(const NormalizedLambdas& lambdas, const TreeShape& tree,
                               std::span<const int> leaf_order, std::mt19937_64& rng) {
  const std::size_t levels = tree.depth();
  ComponentPath path;
  path.node_choice.resize(levels);
  for (std::size_t l = 0; l < levels; ++l) path.node_choice[l].assign(tree.levels[l].size(), 0);

  const auto& root = lambdas.root;
  path.node_choice[levels - 1][0] =
      draw_categorical(std::span<const double>(root.data(), root.size()), root.sum(), rng);
  path.draws = 1;

  // Row-major copy so a row is contiguous for the walk.
  std::vector<double> row;
  for (std::size_t l = levels - 1; l-- > 0;) {
    const auto& parents = tree.levels[l + 1];
    for (std::size_t p = 0; p < parents.size(); ++p) {
      const int parent_choice = path.node_choice[l + 1][p];
      for (std::size_t c = 0; c < parents[p].child_count; ++c) {
        const std::size_t node = parents[p].first_child + c;
        const Eigen::MatrixXd& lam = lambdas.matrices[l][node];
        row.resize(static_cast<std::size_t>(lam.cols()));
        for (Eigen::Index k = 0; k < lam.cols(); ++k) row[k] = lam(parent_choice, k);
        path.node_choice[l][node] = draw_categorical(row, lam.row(parent_choice).sum(), rng);
        ++path.draws;
      }
    }
  }

  path.leaf_component.assign(leaf_order.size(), 0);
  const auto& first = tree.levels.front();
  for (std::size_t node = 0; node < first.size(); ++node)
    for (std::size_t c = 0; c < first[node].child_count; ++c)
      path.leaf_component[leaf_order[first[node].first_child + c]] = path.node_choice[0][node];
  return path;
}

ComponentPath sample_component(const HtTensor& ht, std::mt19937_64& rng) {
  return sample_component(normalize_lambdas(ht), *ht.tree, ht.leaf_order, rng);
}

RowMatrix sample(const MdmaModel& model, std::size_t n, std::uint64_t seed, double inv_tol) {
  if (n < 1) throw InvalidArgument("sample count must be at least 1");
  if (!(inv_tol > 0.0)) throw InvalidArgument("inversion tolerance must be positive");
  const int d = model.d();
  const QueryEngine engine(model);
  const NetShape& shape = model.net_shape();
  const NormalizedLambdas& lambdas = engine.contraction().lambdas();
  RowMatrix out(static_cast<Eigen::Index>(n), d);

  bool failed = false;
  std::string failure;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t s = 0; s < n; ++s) {
    try {
      std::mt19937_64 rng = sample_stream(seed, s);
      const ComponentPath path = sample_component(lambdas, model.tree(), model.leaf_order(), rng);
      for (int v = 0; v < d; ++v) {
        const auto eff = engine.effective_net(path.leaf_component[v], v);
        const double u = open_uniform(rng);
        out(static_cast<Eigen::Index>(s), v) = bisect_cdf(
            [&](double x) { return std::exp(net_forward(shape, eff, x).log_cdf); }, u, inv_tol);
      }
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        failure = e.what();
      }
    }
  }
  if (failed) throw NumericalError(failure);
  return out;
}

RowMatrix sample_autoregressive(const MdmaModel& model, std::size_t n, std::uint64_t seed,
                                double inv_tol) {
  if (n < 1) throw InvalidArgument("sample count must be at least 1");
  if (!(inv_tol > 0.0)) throw InvalidArgument("inversion tolerance must be positive");
  const int d = model.d();
  const QueryEngine engine(model);
  RowMatrix out(static_cast<Eigen::Index>(n), d);

  bool failed = false;
  std::string failure;
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t s = 0; s < n; ++s) {
    try {
      std::mt19937_64 rng = sample_stream(seed, s);
      std::vector<Tag> tags(d, Tag::Marginalize);
      std::vector<double> x(d, 0.0);
      for (int j = 0; j < d; ++j) {
        const double log_den = j == 0 ? 0.0 : engine.log_contract(tags, x, 1)(0);
        if (!std::isfinite(log_den)) throw NumericalError("conditioning on zero-density event");
        tags[j] = Tag::Cdf;
        const double u = open_uniform(rng);
        x[j] = bisect_cdf(
            [&](double xj) {
              x[j] = xj;
              return std::exp(engine.log_contract(tags, x, 1)(0) - log_den);
            },
            u, inv_tol);
        tags[j] = Tag::Density;
        out(static_cast<Eigen::Index>(s), j) = x[j];
      }
    } catch (const std::exception& e) {
#pragma omp critical
      {
        failed = true;
        failure = e.what();
      }
    }
  }
  if (failed) throw NumericalError(failure);
  return out;
}

}  // namespace mdma
