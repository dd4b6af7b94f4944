#include "mdma/contraction.hpp"

#include <cmath>
#include <limits>

#include "mdma/errors.hpp"

namespace mdma {

LeafBatch leaf_from_log_factors(const Eigen::MatrixXd& log_factors) {
  LeafBatch leaf;
  const Eigen::Index cols = log_factors.cols();
  leaf.values.resize(log_factors.rows(), cols);
  leaf.log_scale.resize(cols);
  for (Eigen::Index b = 0; b < cols; ++b) {
    double peak = log_factors.col(b).maxCoeff();
    if (!std::isfinite(peak)) peak = 0.0;  // all -inf stays zero; +inf/nan propagate
    leaf.log_scale(b) = peak;
    leaf.values.col(b) = (log_factors.col(b).array() - peak).exp().matrix();
  }
  return leaf;
}

HtContraction::HtContraction(const HtTensor& ht) : ht_(ht), lambdas_(normalize_lambdas(ht)) {}

namespace {

const Eigen::MatrixXd& child_value(const std::vector<LeafBatch>& leaves, const GradientTape& tape,
                                   std::size_t level, std::size_t child) {
  return level == 0 ? leaves[child].values : tape.outputs[level - 1][child];
}

}  // namespace

Eigen::VectorXd HtContraction::forward(const std::vector<LeafBatch>& leaves,
                                       GradientTape* tape_out) const {
  const TreeShape& tree = *ht_.tree;
  if (leaves.size() != static_cast<std::size_t>(tree.leaf_count))
    throw InvalidArgument("one leaf batch per variable is required");
  const Eigen::Index batch = leaves.front().values.cols();
  for (const auto& leaf : leaves) {
    if (leaf.values.rows() != ht_.m || leaf.values.cols() != batch)
      throw InvalidArgument("leaf batch shape mismatch");
  }

  GradientTape local;
  GradientTape& tape = tape_out ? *tape_out : local;
  tape.products.assign(tree.depth(), {});
  tape.scales.assign(tree.depth(), {});
  tape.outputs.assign(tree.depth(), {});

  Eigen::VectorXd log_total = Eigen::VectorXd::Zero(batch);
  for (const auto& leaf : leaves) log_total += leaf.log_scale;

  for (std::size_t l = 0; l < tree.depth(); ++l) {
    const auto& level = tree.levels[l];
    for (std::size_t j = 0; j < level.size(); ++j) {
      const TreeNode& node = level[j];
      Eigen::MatrixXd prod = child_value(leaves, tape, l, node.first_child);
      for (std::size_t c = 1; c < node.child_count; ++c)
        prod.array() *= child_value(leaves, tape, l, node.first_child + c).array();
      Eigen::VectorXd scale = prod.colwise().maxCoeff().transpose();
      for (Eigen::Index b = 0; b < batch; ++b) {
        if (!(scale(b) > 0.0) || !std::isfinite(scale(b))) scale(b) = 1.0;
        prod.col(b) /= scale(b);
        log_total(b) += std::log(scale(b));
      }
      if (l + 1 < tree.depth()) {
        tape.outputs[l].push_back(lambdas_.matrices[l][j] * prod);
      } else {
        tape.root_value = (lambdas_.root.transpose() * prod).transpose();
      }
      tape.products[l].push_back(std::move(prod));
      tape.scales[l].push_back(std::move(scale));
    }
    // Children of this level are no longer needed when not recording.
    if (!tape_out && l > 0) {
      for (auto& out : tape.outputs[l - 1]) out.resize(0, 0);
      for (auto& p : tape.products[l - 1]) p.resize(0, 0);
    }
  }
  return (tape.root_value.array().log() + log_total.array()).matrix();
}

void HtContraction::backward(const std::vector<LeafBatch>& leaves, const GradientTape& tape,
                             const Eigen::VectorXd& g_log, std::vector<Eigen::MatrixXd>& g_leaf_log,
                             std::span<double> raw_lambda_grad) const {
  const TreeShape& tree = *ht_.tree;
  const int m = ht_.m;
  const Eigen::Index batch = g_log.size();

  // Gradients w.r.t. the (rescaled) outputs of each level, propagated top-down.
  std::vector<Eigen::MatrixXd> g_above;
  for (std::size_t l = tree.depth(); l-- > 0;) {
    const auto& level = tree.levels[l];
    const std::size_t n_children =
        l == 0 ? static_cast<std::size_t>(tree.leaf_count) : tree.levels[l - 1].size();
    std::vector<Eigen::MatrixXd> g_below(n_children);
    for (std::size_t j = 0; j < level.size(); ++j) {
      const TreeNode& node = level[j];
      const Eigen::MatrixXd& prod = tape.products[l][j];
      const Eigen::VectorXd& scale = tape.scales[l][j];
      Eigen::MatrixXd g_prod;
      if (l + 1 == tree.depth()) {
        const Eigen::VectorXd g_root = g_log.array() / tape.root_value.array();
        const Eigen::VectorXd g_lambda = prod * g_root;
        Eigen::MatrixXd g_lambda_mat = g_lambda.transpose();
        Eigen::MatrixXd root_mat = lambdas_.root.transpose();
        Eigen::VectorXd root_sum(1);
        root_sum(0) = lambdas_.root_sum;
        accumulate_lambda_raw_grad(ht_.raw_lambda.subspan(node.lambda_offset, m), root_mat,
                                   root_sum, g_lambda_mat,
                                   raw_lambda_grad.subspan(node.lambda_offset, m));
        g_prod = lambdas_.root * g_root.transpose();
      } else {
        const Eigen::MatrixXd& g_out = g_above[j];
        const Eigen::MatrixXd& lam = lambdas_.matrices[l][j];
        const Eigen::MatrixXd g_lam = g_out * prod.transpose();
        const std::size_t mm = static_cast<std::size_t>(m) * m;
        accumulate_lambda_raw_grad(ht_.raw_lambda.subspan(node.lambda_offset, mm), lam,
                                   lambdas_.row_sums[l][j], g_lam,
                                   raw_lambda_grad.subspan(node.lambda_offset, mm));
        g_prod.noalias() = lam.transpose() * g_out;
      }
      for (Eigen::Index b = 0; b < batch; ++b) g_prod.col(b) /= scale(b);
      for (std::size_t c = 0; c < node.child_count; ++c) {
        Eigen::MatrixXd g_child = g_prod;
        for (std::size_t o = 0; o < node.child_count; ++o) {
          if (o == c) continue;
          g_child.array() *= child_value(leaves, tape, l, node.first_child + o).array();
        }
        g_below[node.first_child + c] = std::move(g_child);
      }
    }
    g_above = std::move(g_below);
  }

  g_leaf_log.resize(tree.leaf_count);
  for (int p = 0; p < tree.leaf_count; ++p)
    g_leaf_log[p] = (g_above[p].array() * leaves[p].values.array()).matrix();
}

}  // namespace mdma
