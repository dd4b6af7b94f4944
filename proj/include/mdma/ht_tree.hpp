#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mdma {

/// Softplus sharpness applied to raw mixing weights.
inline constexpr double kLambdaBeta = 20.0;

/// One internal node of the hierarchical Tucker tree. Its children are the consecutive
/// items [first_child, first_child + child_count) of the level below (leaf positions for
/// the first level).
struct TreeNode {
  std::size_t first_child = 0;
  std::size_t child_count = 0;
  std::size_t lambda_offset = 0;  // into the mixing-weight parameter block
};

/// Level structure of the tree, bottom-up. The last level holds the single root.
struct TreeShape {
  int leaf_count = 0;
  int pool_size = 2;
  std::vector<std::vector<TreeNode>> levels;

  std::size_t depth() const { return levels.size(); }
  std::vector<std::size_t> node_counts() const;
  std::size_t internal_node_count() const;
  /// Number of raw mixing weights for mode width m: m*m per non-root node plus m at the root.
  std::size_t lambda_param_count(int m) const;
  const TreeNode& root() const { return levels.back().front(); }
};

/// Groups `d` leaves bottom-up, `pool_size` consecutive items per node; the last node of a
/// level takes whatever remains. d = 1 yields a single root over one leaf.
TreeShape build_tree(int d, int pool_size, int m = 1);

/// Non-owning view of the hierarchical mixing weights of a model.
struct HtTensor {
  int m = 1;
  const TreeShape* tree = nullptr;
  std::span<const int> leaf_order;       // leaf position -> variable
  std::span<const double> raw_lambda;    // tree.lambda_param_count(m) values
};

/// Effective (softplus + row-normalized) mixing weights.
///
/// For a non-root node, matrices[level][node](i, k) is the weight of child-product component
/// k in output component i; each row sums to one. The root's weights are `root` (sums to one).
struct NormalizedLambdas {
  std::vector<std::vector<Eigen::MatrixXd>> matrices;
  std::vector<std::vector<Eigen::VectorXd>> row_sums;  // softplus row sums before division
  Eigen::VectorXd root;
  double root_sum = 1.0;
};

NormalizedLambdas normalize_lambdas(const HtTensor& ht);

/// Accumulates the raw-parameter gradient of a node's weights from the gradient with
/// respect to its normalized weights.
void accumulate_lambda_raw_grad(std::span<const double> raw, const Eigen::MatrixXd& normalized,
                                const Eigen::VectorXd& row_sums, const Eigen::MatrixXd& g_normalized,
                                std::span<double> raw_grad);

/// Plain contraction <A^HT, factors>. `factors[v]` is the length-m factor vector of
/// variable v. No rescaling is applied.
double ht_contract(const HtTensor& ht, const std::vector<Eigen::VectorXd>& factors);

}  // namespace mdma
