#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mdma/model.hpp"
#include "mdma/query.hpp"

namespace mdma {

/// Monte Carlo mutual information I(Y; Z) = mean over rows of
/// log f(x_{Y u Z}) - log f(x_Y) - log f(x_Z), every term an exact marginal of the model.
/// Columns outside Y u Z are never read.
double estimate_mi(const MdmaModel& model, const RowMatrix& data, std::span<const int> y,
                   std::span<const int> z);

struct CiTestResult {
  double statistic = 0.0;  // Kendall tau-b of (U1, U2)
  double z = 0.0;
  double p_value = 1.0;
  bool reject = false;
  Eigen::MatrixXd u1_u2;     // kept rows x 2
  std::size_t dropped = 0;   // rows whose conditioning density underflowed
};

/// Conditional CDF transforms U1 = F(x_i | x_cond), U2 = F(x_j | x_cond) per row, then
/// Kendall's tau test of their independence. Rows whose conditioning density underflows are
/// dropped; more than 10% dropped is an error.
CiTestResult ci_test(const MdmaModel& model, const RowMatrix& data, int i, int j,
                     std::span<const int> cond, double alpha);

/// The (U1, U2) pairs alone, with NaN rows where conditioning underflowed.
Eigen::MatrixXd conditional_cdf_pairs(const MdmaModel& model, const RowMatrix& data, int i, int j,
                                      std::span<const int> cond);

/// -log f(x) over the observed coordinates (mask nonzero = missing; empty = all observed).
double anomaly_score(const MdmaModel& model, std::span<const double> x,
                     std::span<const std::uint8_t> mask);
Eigen::VectorXd anomaly_scores(const MdmaModel& model, const RowMatrix& x,
                               std::span<const std::uint8_t> mask);

/// Non-marginalizable variant: v = x + T g(x) with T strictly upper triangular and
/// nonnegative, g(x)_k = x_k + a_k tanh(x_k), followed by independent univariate densities
/// of the v_j. The transform has unit Jacobian determinant.
///
/// Flat raw layout: d base networks (NetShape layout each), then the strict upper triangle of
/// T row by row (T = softplus(raw)), then d gate values (a = tanh(raw)).
class NmdmaModel {
 public:
  NmdmaModel(int d, NetShape shape, std::vector<double> params);

  int d() const { return d_; }
  const NetShape& net_shape() const { return shape_; }
  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }

  std::size_t net_offset(int j) const { return static_cast<std::size_t>(j) * shape_.param_count(); }
  std::size_t t_offset() const { return static_cast<std::size_t>(d_) * shape_.param_count(); }
  std::size_t t_index(int row, int col) const;  // position of T(row, col), row < col
  std::size_t gate_offset() const { return t_offset() + static_cast<std::size_t>(d_) * (d_ - 1) / 2; }

  Eigen::MatrixXd transform_matrix() const;
  Eigen::VectorXd gates() const;
  /// v = x + T g(x).
  Eigen::VectorXd transform(std::span<const double> x) const;

 private:
  int d_;
  NetShape shape_;
  std::vector<double> params_;
};

std::size_t nmdma_param_count(int d, const NetShape& shape);
/// Base nets as in init_model, raw T ~ N(-3, 0.01) (T near 0.05), raw gates ~ N(0, 1).
NmdmaModel init_nmdma(int d, const NetShape& shape, std::uint64_t seed);

double nmdma_log_density(const NmdmaModel& nm, std::span<const double> x);

/// Mean negative log-likelihood of complete rows and its exact raw-parameter gradient.
double nmdma_loss_and_grad(const NmdmaModel& nm, const RowMatrix& data,
                           std::span<const std::size_t> rows, std::span<double> grad);

}  // namespace mdma
