#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mdma/ht_tree.hpp"
#include "mdma/model.hpp"
#include "mdma/query.hpp"

namespace mdma {

/// Default CDF-space tolerance of inverse-CDF sampling.
inline constexpr double kDefaultInvTol = 1e-9;

/// One mixture component of the tree: a categorical choice per internal node and the
/// component index each variable's CDF is drawn from.
struct ComponentPath {
  std::vector<std::vector<int>> node_choice;  // [level][node], bottom-up like TreeShape
  std::vector<int> leaf_component;            // indexed by variable
  int draws = 0;                              // categorical draws made
};

/// Independent generator for sample `index` of a run seeded with `seed`. Results do not
/// depend on how samples are distributed over threads.
std::mt19937_64 sample_stream(std::uint64_t seed, std::uint64_t index);

/// Uniform double in the open interval (0, 1).
double open_uniform(std::mt19937_64& rng);

/// Index drawn from the unnormalized nonnegative weights by an inverse-CDF walk.
int draw_categorical(std::span<const double> weights, double total, std::mt19937_64& rng);

/// Top-down descent: the root draws from its weight vector, every other node draws from
/// the row of its mixing matrix selected by its parent's choice.
ComponentPath sample_component(const NormalizedLambdas& lambdas, const TreeShape& tree,
                               std::span<const int> leaf_order, std::mt19937_64& rng);
ComponentPath sample_component(const HtTensor& ht, std::mt19937_64& rng);

/// n draws from the model: a component path per row, then independent inverse-CDF draws
/// per variable. Deterministic in `seed`.
RowMatrix sample(const MdmaModel& model, std::size_t n, std::uint64_t seed,
                 double inv_tol = kDefaultInvTol);

/// n draws by sequential inversion of x_j | x_1..x_{j-1} in variable order. Much slower;
/// serves as an independent check of `sample`.
RowMatrix sample_autoregressive(const MdmaModel& model, std::size_t n, std::uint64_t seed,
                                double inv_tol = kDefaultInvTol);

}  // namespace mdma
