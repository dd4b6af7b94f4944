#include "mdma/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mdma/errors.hpp"

namespace mdma {

namespace {

void check_permutation(std::span<const int> order, int d) {
  if (order.size() != static_cast<std::size_t>(d))
    throw InvalidArgument("leaf order must have one entry per variable");
  std::vector<char> seen(d, 0);
  for (int v : order) {
    if (v < 0 || v >= d || seen[v]) throw InvalidArgument("leaf order is not a permutation");
    seen[v] = 1;
  }
}

}  // namespace

std::vector<int> identity_order(int d) {
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  return order;
}

std::size_t model_param_count(const ModelDims& dims) {
  const NetShape shape(dims.depth, dims.width);
  const TreeShape tree = build_tree(dims.d, dims.pool_size, dims.m);
  return static_cast<std::size_t>(dims.d) * dims.m * shape.param_count() +
         tree.lambda_param_count(dims.m);
}

MdmaModel::MdmaModel(ModelDims dims, std::vector<int> leaf_order, std::vector<double> params)
    : dims_(dims),
      net_shape_(dims.depth, dims.width),
      tree_(build_tree(dims.d, dims.pool_size, dims.m)),
      leaf_order_(std::move(leaf_order)),
      params_(std::move(params)) {
  if (dims_.d < 1 || dims_.m < 1) throw InvalidArgument("d and m must be positive");
  check_permutation(leaf_order_, dims_.d);
  if (params_.size() != bank_param_count() + tree_.lambda_param_count(dims_.m))
    throw InvalidArgument("parameter vector size does not match model dimensions");
}

void MdmaModel::set_leaf_order(std::vector<int> order) {
  check_permutation(order, dims_.d);
  leaf_order_ = std::move(order);
}

UnivariateCdfNet MdmaModel::net(int component, int variable) const {
  if (component < 0 || component >= dims_.m || variable < 0 || variable >= dims_.d)
    throw InvalidArgument("network index out of range");
  auto raw = net_raw(component, variable);
  return UnivariateCdfNet(net_shape_, std::vector<double>(raw.begin(), raw.end()));
}

std::vector<double> MdmaModel::effective_bank() const {
  std::vector<double> eff(bank_param_count());
  const std::size_t np = net_param_count();
  for (std::size_t off = 0; off < eff.size(); off += np) {
    net_shape_.to_effective(std::span<const double>(params_).subspan(off, np),
                            std::span<double>(eff).subspan(off, np));
  }
  return eff;
}

MdmaModel init_model(const ModelDims& dims, std::uint64_t seed) {
  if (dims.d < 1 || dims.m < 1 || dims.depth < 1 || dims.width < 1 || dims.pool_size < 2)
    throw InvalidArgument("all model sizes must be positive and pool size at least 2");
  std::mt19937_64 rng(seed);
  std::vector<double> params(model_param_count(dims));
  const NetShape shape(dims.depth, dims.width);
  const std::size_t np = shape.param_count();
  const std::size_t bank = static_cast<std::size_t>(dims.d) * dims.m * np;
  for (std::size_t off = 0; off < bank; off += np)
    shape.init_raw(std::span<double>(params).subspan(off, np), rng);

  const TreeShape tree = build_tree(dims.d, dims.pool_size, dims.m);
  const int m = dims.m;
  for (std::size_t l = 0; l + 1 < tree.depth(); ++l) {
    for (const auto& node : tree.levels[l]) {
      double* raw = params.data() + bank + node.lambda_offset;
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < m; ++k) raw[i * m + k] = (i == k) ? static_cast<double>(m) : 0.0;
    }
  }
  std::normal_distribution<double> top(0.0, std::sqrt(0.3 / m));
  double* root = params.data() + bank + tree.root().lambda_offset;
  for (int k = 0; k < m; ++k) root[k] = top(rng);
  return MdmaModel(dims, identity_order(dims.d), std::move(params));
}

}  // namespace mdma
