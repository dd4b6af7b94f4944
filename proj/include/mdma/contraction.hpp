#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mdma/ht_tree.hpp"

namespace mdma {

/// Factor vectors of one leaf position for a batch of B queries, stored rescaled:
/// the true factor of column b is values.col(b) * exp(log_scale(b)).
struct LeafBatch {
  Eigen::MatrixXd values;     // m x B
  Eigen::VectorXd log_scale;  // B
};

/// Turns per-column log factors (m x B) into a LeafBatch whose columns peak at 1.
LeafBatch leaf_from_log_factors(const Eigen::MatrixXd& log_factors);

/// Saved activations of one batched contraction, consumed by the reverse pass.
struct GradientTape {
  std::vector<std::vector<Eigen::MatrixXd>> products;  // rescaled child products per node
  std::vector<std::vector<Eigen::VectorXd>> scales;    // per-column rescaling factors
  std::vector<std::vector<Eigen::MatrixXd>> outputs;   // lambda * product, non-root nodes
  Eigen::VectorXd root_value;
};

/// Batched log-space contraction of leaf factors through the hierarchical Tucker tree.
///
/// Each node multiplies its children elementwise, divides every column by its maximum
/// and carries the logarithm of that factor separately, so results stay finite far below
/// the double range. Read-only after construction.
class HtContraction {
 public:
  explicit HtContraction(const HtTensor& ht);

  const NormalizedLambdas& lambdas() const { return lambdas_; }
  const HtTensor& ht() const { return ht_; }

  /// Log contraction per column. `leaves` is indexed by leaf position.
  Eigen::VectorXd forward(const std::vector<LeafBatch>& leaves, GradientTape* tape) const;

  /// Given g_log = d objective / d (log contraction) per column, writes
  /// d objective / d (log leaf factor) into g_leaf_log (per leaf position, m x B) and
  /// accumulates d objective / d raw mixing weights into raw_lambda_grad.
  void backward(const std::vector<LeafBatch>& leaves, const GradientTape& tape,
                const Eigen::VectorXd& g_log, std::vector<Eigen::MatrixXd>& g_leaf_log,
                std::span<double> raw_lambda_grad) const;

 private:
  HtTensor ht_;
  NormalizedLambdas lambdas_;
};

}  // namespace mdma
