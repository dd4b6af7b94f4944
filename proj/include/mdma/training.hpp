#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mdma/dataset.hpp"
#include "mdma/model.hpp"

namespace mdma {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 500;
  int epochs = 10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double validation_fraction = 0.1;
  double max_grad_norm = 0.0;  // global-norm clipping when > 0

  void validate() const;
};

/// Mean negative log (marginal) likelihood of `rows` and its exact gradient with respect to
/// every raw parameter. `grad` is overwritten and must have model.params().size() entries.
/// Throws NonFiniteLoss naming the first offending row.
double loss_and_grad(const MdmaModel& model, const Dataset& data, std::span<const std::size_t> rows,
                     std::span<double> grad);

/// Mean negative log (marginal) likelihood, forward pass only.
double mean_nll(const MdmaModel& model, const Dataset& data, std::span<const std::size_t> rows);

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  void step(std::span<double> params, std::span<const double> grad);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

/// Rescales `grad` in place so its Euclidean norm is at most max_norm; returns the old norm.
double clip_grad_norm(std::span<double> grad, double max_norm);

/// Greedy correlation-driven leaf order for a tree with the given pool size.
///
/// Repeatedly groups the most correlated items (|Pearson correlation|, coarse-grained to the
/// block mean between groups) so that strongly dependent variables share subtrees. Rows with
/// missing values are skipped. Ties go to the lowest index.
std::vector<int> adaptive_coupling(const Dataset& data, std::span<const std::size_t> rows,
                                   int pool_size);
/// Same, from an explicit correlation matrix.
std::vector<int> coupling_from_correlation(const Eigen::MatrixXd& correlation, int pool_size);

struct EpochRecord {
  int epoch = 0;  // 0 = before training
  double train_nll = 0.0;
  double validation_nll = 0.0;  // NaN without a validation split
};

struct FitResult {
  std::vector<EpochRecord> trace;
  int best_epoch = 0;
  bool diverged = false;
  std::string message;
};

/// Adam on the mean negative log marginal likelihood over shuffled minibatches.
///
/// The dataset is shuffled once with the config seed; the trailing validation_fraction of
/// that order is held out. With a validation split the best-validation parameters are
/// restored at the end. A non-finite loss stops training and sets `diverged`.
FitResult fit(MdmaModel& model, const Dataset& data, const TrainConfig& config,
              const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace mdma
