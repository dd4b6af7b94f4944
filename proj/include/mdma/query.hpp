#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mdma/contraction.hpp"
#include "mdma/model.hpp"

namespace mdma {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// What a variable contributes to a contraction.
enum class Tag : std::uint8_t {
  Cdf,               // phi(x): cumulative probability up to x
  Density,           // phi'(x): density at x
  Marginalize,       // 1: integrate the variable out
  ConditionDensity,  // phi'(x) in both numerator and denominator of a conditional
};

struct VariableQuery {
  Tag tag = Tag::Marginalize;
  double x = 0.0;

  static VariableQuery cdf(double x) { return {Tag::Cdf, x}; }
  static VariableQuery density(double x) { return {Tag::Density, x}; }
  static VariableQuery marginalize() { return {Tag::Marginalize, 0.0}; }
  static VariableQuery given(double x) { return {Tag::ConditionDensity, x}; }
};

/// One tag per variable.
using QuerySpec = std::vector<VariableQuery>;

/// Parses `c:<x>|d:<x>|m|given:<x>` items joined by commas.
QuerySpec parse_query(std::string_view text);
std::string format_query(const QuerySpec& query);

/// Missing-value mask: nonzero marks a missing coordinate.
using MissingMask = std::vector<std::uint8_t>;

/// Evaluates joint, marginal and conditional CDFs and densities of one model.
///
/// Caches effective network parameters and normalized mixing weights; must not outlive
/// the model. All methods are const and safe to call concurrently.
class QueryEngine {
 public:
  explicit QueryEngine(const MdmaModel& model);

  const MdmaModel& model() const { return *model_; }
  const HtContraction& contraction() const { return contraction_; }
  std::span<const double> effective_bank() const { return effective_bank_; }
  std::span<const double> effective_net(int component, int variable) const {
    return std::span<const double>(effective_bank_)
        .subspan(model_->net_offset(component, variable), model_->net_param_count());
  }

  /// Log factors (m x rows) of one variable under per-row tags.
  Eigen::MatrixXd log_factors(int variable, std::span<const Tag> tags, std::span<const double> x,
                              std::size_t rows) const;

  /// Log contraction for `rows` queries. tags and x are row-major rows x d;
  /// ConditionDensity is treated as Density.
  Eigen::VectorXd log_contract(std::span<const Tag> tags, std::span<const double> x,
                               std::size_t rows) const;

  /// Value of a query; conditional when any ConditionDensity tag is present.
  double evaluate(const QuerySpec& query) const;

  /// Log (marginal) density of the observed coordinates.
  double log_density(std::span<const double> x, std::span<const std::uint8_t> missing) const;

  /// Log marginal densities of several variable subsets at the same points: column s holds
  /// log f(x_S) for subsets[s] (nonzero entries mark members). Each network is evaluated
  /// once per point however many subsets use it.
  Eigen::MatrixXd log_marginals(const RowMatrix& x,
                                const std::vector<std::vector<char>>& subsets) const;

  /// Row-wise log_density. `missing` may be empty (all observed), else rows x d.
  Eigen::VectorXd log_density_batch(const RowMatrix& x,
                                    std::span<const std::uint8_t> missing) const;

 private:
  const MdmaModel* model_;
  std::vector<double> effective_bank_;
  HtContraction contraction_;
};

double evaluate(const MdmaModel& model, const QuerySpec& query);
double log_density(const MdmaModel& model, std::span<const double> x,
                   std::span<const std::uint8_t> missing);

/// Bivariate marginal density of (var1, var2) at the midpoints of a steps x steps grid over
/// [lo, hi]^2, every other variable marginalized. One row per cell: x_var1, x_var2, density,
/// with var1 varying slowest.
RowMatrix density_grid(const MdmaModel& model, int var1, int var2, double lo, double hi, int steps);

}  // namespace mdma
