#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mdma/ht_tree.hpp"
#include "mdma/univariate_cdf.hpp"

namespace mdma {

struct ModelDims {
  int d = 1;          // data dimension
  int m = 1;          // mode width (mixture components per leaf)
  int depth = 2;      // hidden layers of each univariate net
  int width = 3;      // hidden width of each univariate net
  int pool_size = 2;  // children merged per tree node

  bool operator==(const ModelDims&) const = default;
};

/// A marginalizable density model: an m x d bank of univariate CDF networks joined by a
/// hierarchical Tucker tensor.
///
/// All trainable values live in one flat raw-parameter vector: the network bank first
/// (variable-major, component-minor, NetShape layout per net), then the mixing weights
/// in TreeShape order.
class MdmaModel {
 public:
  MdmaModel(ModelDims dims, std::vector<int> leaf_order, std::vector<double> params);

  const ModelDims& dims() const { return dims_; }
  int d() const { return dims_.d; }
  int m() const { return dims_.m; }
  const NetShape& net_shape() const { return net_shape_; }
  const TreeShape& tree() const { return tree_; }
  std::span<const int> leaf_order() const { return leaf_order_; }
  void set_leaf_order(std::vector<int> order);

  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }

  std::size_t net_param_count() const { return net_shape_.param_count(); }
  std::size_t net_offset(int component, int variable) const {
    return (static_cast<std::size_t>(variable) * dims_.m + component) * net_param_count();
  }
  std::size_t bank_param_count() const {
    return static_cast<std::size_t>(dims_.d) * dims_.m * net_param_count();
  }
  std::span<const double> net_raw(int component, int variable) const {
    return std::span<const double>(params_).subspan(net_offset(component, variable),
                                                    net_param_count());
  }
  /// Standalone copy of network phi_{component, variable}.
  UnivariateCdfNet net(int component, int variable) const;

  std::size_t lambda_offset() const { return bank_param_count(); }
  std::span<const double> raw_lambda() const {
    return std::span<const double>(params_).subspan(lambda_offset());
  }
  HtTensor ht() const { return HtTensor{dims_.m, &tree_, leaf_order_, raw_lambda()}; }

  /// Effective parameters of the whole bank, same layout as the bank block of params().
  std::vector<double> effective_bank() const;

 private:
  ModelDims dims_;
  NetShape net_shape_;
  TreeShape tree_;
  std::vector<int> leaf_order_;
  std::vector<double> params_;
};

std::size_t model_param_count(const ModelDims& dims);

/// Fresh model: network weights ~ N(0, 1/fan_in), gates ~ N(0, 1), biases 0; non-root
/// mixing weights raw = m * identity; root raw ~ N(0, 0.3/m). Deterministic in `seed`.
MdmaModel init_model(const ModelDims& dims, std::uint64_t seed);

/// Identity permutation [0, d).
std::vector<int> identity_order(int d);

}  // namespace mdma
