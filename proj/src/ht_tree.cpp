#include "mdma/ht_tree.hpp"

#include <algorithm>

#include "mdma/errors.hpp"
#include "mdma/numerics.hpp"

namespace mdma {

std::vector<std::size_t> TreeShape::node_counts() const {
  std::vector<std::size_t> counts;
  counts.reserve(levels.size());
  for (const auto& level : levels) counts.push_back(level.size());
  return counts;
}

std::size_t TreeShape::internal_node_count() const {
  std::size_t total = 0;
  for (const auto& level : levels) total += level.size();
  return total;
}

std::size_t TreeShape::lambda_param_count(int m) const {
  const auto mm = static_cast<std::size_t>(m);
  return (internal_node_count() - 1) * mm * mm + mm;
}

TreeShape build_tree(int d, int pool_size, int m) {
  if (d < 1) throw InvalidArgument("tree needs at least one leaf");
  if (pool_size < 2) throw InvalidArgument("pool size must be at least 2");
  if (m < 1) throw InvalidArgument("mode width must be positive");
  TreeShape tree;
  tree.leaf_count = d;
  tree.pool_size = pool_size;
  const auto mm = static_cast<std::size_t>(m) * static_cast<std::size_t>(m);
  std::size_t items = static_cast<std::size_t>(d);
  std::size_t offset = 0;
  do {
    const std::size_t nodes = (items + pool_size - 1) / pool_size;
    std::vector<TreeNode> level;
    level.reserve(nodes);
    for (std::size_t j = 0; j < nodes; ++j) {
      TreeNode node;
      node.first_child = j * pool_size;
      node.child_count = std::min<std::size_t>(pool_size, items - node.first_child);
      level.push_back(node);
    }
    tree.levels.push_back(std::move(level));
    items = nodes;
  } while (items > 1);

  for (std::size_t l = 0; l + 1 < tree.levels.size(); ++l) {
    for (auto& node : tree.levels[l]) {
      node.lambda_offset = offset;
      offset += mm;
    }
  }
  tree.levels.back().front().lambda_offset = offset;
  return tree;
}

NormalizedLambdas normalize_lambdas(const HtTensor& ht) {
  const TreeShape& tree = *ht.tree;
  const int m = ht.m;
  if (ht.raw_lambda.size() != tree.lambda_param_count(m))
    throw InvalidArgument("mixing-weight parameter count does not match tree");
  NormalizedLambdas out;
  out.matrices.resize(tree.depth());
  out.row_sums.resize(tree.depth());
  for (std::size_t l = 0; l + 1 < tree.depth(); ++l) {
    for (const auto& node : tree.levels[l]) {
      Eigen::MatrixXd s(m, m);
      const double* raw = ht.raw_lambda.data() + node.lambda_offset;
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < m; ++k) s(i, k) = softplus(raw[i * m + k], kLambdaBeta);
      Eigen::VectorXd sums = s.rowwise().sum();
      for (int i = 0; i < m; ++i) s.row(i) /= sums(i);
      out.matrices[l].push_back(std::move(s));
      out.row_sums[l].push_back(std::move(sums));
    }
  }
  const double* raw = ht.raw_lambda.data() + tree.root().lambda_offset;
  out.root.resize(m);
  for (int k = 0; k < m; ++k) out.root(k) = softplus(raw[k], kLambdaBeta);
  out.root_sum = out.root.sum();
  out.root /= out.root_sum;
  return out;
}

void accumulate_lambda_raw_grad(std::span<const double> raw, const Eigen::MatrixXd& normalized,
                                const Eigen::VectorXd& row_sums,
                                const Eigen::MatrixXd& g_normalized, std::span<double> raw_grad) {
  const Eigen::Index rows = normalized.rows();
  const Eigen::Index cols = normalized.cols();
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double inner = g_normalized.row(i).dot(normalized.row(i));
    for (Eigen::Index k = 0; k < cols; ++k) {
      const std::size_t idx = static_cast<std::size_t>(i * cols + k);
      const double g_soft = (g_normalized(i, k) - inner) / row_sums(i);
      raw_grad[idx] += g_soft * softplus_grad(raw[idx], kLambdaBeta);
    }
  }
}

double ht_contract(const HtTensor& ht, const std::vector<Eigen::VectorXd>& factors) {
  const TreeShape& tree = *ht.tree;
  if (factors.size() != static_cast<std::size_t>(tree.leaf_count))
    throw InvalidArgument("one factor vector per variable is required");
  for (const auto& f : factors)
    if (f.size() != ht.m) throw InvalidArgument("factor vector length must equal m");
  const NormalizedLambdas lambdas = normalize_lambdas(ht);

  std::vector<Eigen::VectorXd> below(tree.leaf_count);
  for (int p = 0; p < tree.leaf_count; ++p) below[p] = factors[ht.leaf_order[p]];
  for (std::size_t l = 0; l < tree.depth(); ++l) {
    std::vector<Eigen::VectorXd> above;
    above.reserve(tree.levels[l].size());
    for (std::size_t j = 0; j < tree.levels[l].size(); ++j) {
      const TreeNode& node = tree.levels[l][j];
      Eigen::VectorXd prod = below[node.first_child];
      for (std::size_t c = 1; c < node.child_count; ++c)
        prod.array() *= below[node.first_child + c].array();
      if (l + 1 == tree.depth()) return lambdas.root.dot(prod);
      above.push_back(lambdas.matrices[l][j] * prod);
    }
    below = std::move(above);
  }
  return 0.0;  // unreachable: the last level is the root
}

}  // namespace mdma
