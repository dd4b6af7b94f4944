#pragma once

// Independent reference computations used by the unit and acceptance tests. Nothing here
// calls the contraction or normalization code under test.

#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mdma/model.hpp"

namespace oracle {

inline double softplus(double x, double beta) {
  return std::log1p(std::exp(-std::abs(beta * x))) / beta + std::max(x, 0.0);
}

/// Full mixture tensor A[k_1..k_d] (variable-indexed, k_1 fastest) built by enumerating every
/// assignment of categorical choices to internal nodes and multiplying the weights along it.
inline std::vector<double> tensor_by_paths(const mdma::MdmaModel& model) {
  const int d = model.d();
  const int m = model.m();
  const auto& tree = model.tree();
  const auto raw = model.raw_lambda();
  const auto order = model.leaf_order();

  struct Node {
    int level;
    int index;
    int parent;  // flat index of parent, -1 for root
    std::size_t offset;
  };
  std::vector<Node> nodes;
  std::vector<std::vector<int>> flat_of(tree.depth());
  for (std::size_t l = 0; l < tree.depth(); ++l)
    for (std::size_t j = 0; j < tree.levels[l].size(); ++j) {
      flat_of[l].push_back(static_cast<int>(nodes.size()));
      nodes.push_back({static_cast<int>(l), static_cast<int>(j), -1, tree.levels[l][j].lambda_offset});
    }
  for (std::size_t l = 1; l < tree.depth(); ++l)
    for (std::size_t j = 0; j < tree.levels[l].size(); ++j) {
      const auto& node = tree.levels[l][j];
      for (std::size_t c = 0; c < node.child_count; ++c)
        nodes[flat_of[l - 1][node.first_child + c]].parent = flat_of[l][j];
    }

  auto weight = [&](const Node& node, int parent_choice, int choice) {
    if (node.parent < 0) {
      double total = 0.0;
      for (int k = 0; k < m; ++k) total += softplus(raw[node.offset + k], 20.0);
      return softplus(raw[node.offset + choice], 20.0) / total;
    }
    double total = 0.0;
    for (int k = 0; k < m; ++k) total += softplus(raw[node.offset + parent_choice * m + k], 20.0);
    return softplus(raw[node.offset + parent_choice * m + choice], 20.0) / total;
  };

  std::size_t cells = 1;
  for (int v = 0; v < d; ++v) cells *= static_cast<std::size_t>(m);
  std::vector<double> tensor(cells, 0.0);
  std::vector<int> choice(nodes.size(), 0);
  std::size_t paths = 1;
  for (std::size_t n = 0; n < nodes.size(); ++n) paths *= static_cast<std::size_t>(m);
  for (std::size_t p = 0; p < paths; ++p) {
    std::size_t rest = p;
    for (auto& c : choice) {
      c = static_cast<int>(rest % m);
      rest /= m;
    }
    double prob = 1.0;
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      const int parent_choice = nodes[n].parent < 0 ? 0 : choice[nodes[n].parent];
      prob *= weight(nodes[n], parent_choice, choice[n]);
    }
    std::vector<int> leaf(d);
    const auto& first = tree.levels.front();
    for (std::size_t j = 0; j < first.size(); ++j)
      for (std::size_t c = 0; c < first[j].child_count; ++c)
        leaf[order[first[j].first_child + c]] = choice[flat_of[0][j]];
    std::size_t cell = 0;
    for (int v = d - 1; v >= 0; --v) cell = cell * m + leaf[v];
    tensor[cell] += prob;
  }
  return tensor;
}

/// sum_k A[k] prod_v factors[v][k_v].
inline double contract_tensor(const std::vector<double>& tensor, int d, int m,
                              const std::vector<Eigen::VectorXd>& factors) {
  double total = 0.0;
  for (std::size_t cell = 0; cell < tensor.size(); ++cell) {
    std::size_t rest = cell;
    double prod = tensor[cell];
    for (int v = 0; v < d; ++v) {
      prod *= factors[v](static_cast<Eigen::Index>(rest % m));
      rest /= m;
    }
    total += prod;
  }
  return total;
}

/// Central differences of f at params, one coordinate at a time.
inline std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> params, double h = 1e-6) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = f(params);
    params[i] = saved - h;
    const double down = f(params);
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

/// |a - b| <= rel * max(|a|, |b|), with an absolute floor for coordinates whose true value
/// is at the level of finite-difference noise.
inline bool grad_close(double a, double b, double rel = 1e-4, double floor = 1e-7) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + floor;
}

/// Nodes and weights of composite Gauss-Legendre (5 points per panel) over [lo, hi].
struct QuadratureRule {
  std::vector<double> x, w;
};

inline QuadratureRule gauss_legendre(double lo, double hi, int panels) {
  static const double nodes[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                  0.5384693101056831, 0.9061798459386640};
  static const double weights[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                    0.4786286704993665, 0.2369268850561891};
  const double width = (hi - lo) / panels;
  QuadratureRule rule;
  for (int p = 0; p < panels; ++p) {
    const double mid = lo + (p + 0.5) * width;
    for (int q = 0; q < 5; ++q) {
      rule.x.push_back(mid + 0.5 * width * nodes[q]);
      rule.w.push_back(0.5 * width * weights[q]);
    }
  }
  return rule;
}

inline double integrate(const std::function<double(double)>& f, double lo, double hi, int panels) {
  const QuadratureRule rule = gauss_legendre(lo, hi, panels);
  double total = 0.0;
  for (std::size_t i = 0; i < rule.x.size(); ++i) total += rule.w[i] * f(rule.x[i]);
  return total;
}

/// Random raw parameters far from the structured initialization, so mixing weights are
/// not near the identity. Network weights are drawn so that effective weights are O(1)
/// and every density has its mass within a few units of the origin.
inline mdma::MdmaModel random_model(const mdma::ModelDims& dims, std::uint64_t seed) {
  mdma::MdmaModel model = mdma::init_model(dims, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::uniform_real_distribution<double> weight(0.3, 1.2);
  const mdma::NetShape& shape = model.net_shape();
  auto params = model.mutable_params();
  for (std::size_t i = model.lambda_offset(); i < params.size(); ++i) params[i] = noise(rng) / 3.0;
  for (int v = 0; v < dims.d; ++v) {
    for (int c = 0; c < dims.m; ++c) {
      const std::size_t base = model.net_offset(c, v);
      for (int k = 0; k <= shape.depth; ++k) {
        const double fan_in = static_cast<double>(shape.layer_in(k));
        for (std::size_t i = shape.weight_offset(k); i < shape.bias_offset(k); ++i)
          params[base + i] = weight(rng) / std::sqrt(fan_in);
        for (int o = 0; o < shape.layer_out(k); ++o) params[base + shape.bias_offset(k) + o] = noise(rng);
      }
      for (std::size_t i = shape.gate_offset(0); i < shape.param_count(); ++i) params[base + i] += noise(rng);
    }
  }
  return model;
}

}  // namespace oracle
