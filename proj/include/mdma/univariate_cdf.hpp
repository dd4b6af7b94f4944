#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

namespace mdma {

/// Softplus sharpness applied to raw layer weights.
inline constexpr double kWeightBeta = 10.0;

/// Layer geometry of a monotone scalar network with `depth` hidden layers of `width` units.
///
/// The network is sigmoid . L_l . g_{l-1} . L_{l-1} ... g_0 . L_0 with affine maps
/// L_k(z) = W_k z + b_k, W_k = softplus(raw W_k, 10) > 0, and gates
/// g_k(h) = h + a_k * tanh(h), a_k = tanh(raw a_k) in (-1, 1).
///
/// Flat parameter layout: for k = 0..l the weights W_k (row-major, out x in) then b_k;
/// afterwards the gate vectors a_0..a_{l-1}. Raw and effective parameters share the layout.
struct NetShape {
  static constexpr int kMaxDepth = 8;
  static constexpr int kMaxWidth = 32;

  int depth = 1;
  int width = 1;

  NetShape() = default;
  NetShape(int depth_l, int width_r);

  int layer_in(int k) const { return k == 0 ? 1 : width; }
  int layer_out(int k) const { return k == depth ? 1 : width; }
  std::size_t weight_offset(int k) const;
  std::size_t bias_offset(int k) const { return weight_offset(k) + layer_out(k) * layer_in(k); }
  std::size_t gate_offset(int k) const;
  std::size_t param_count() const;

  /// Maps raw parameters to effective ones (softplus on weights, tanh on gates).
  void to_effective(std::span<const double> raw, std::span<double> effective) const;
  /// Chains a gradient w.r.t. effective parameters back to raw parameters (accumulates).
  void accumulate_raw_grad(std::span<const double> raw, std::span<const double> effective_grad,
                           std::span<double> raw_grad) const;

  /// Raw initialization: weights ~ N(0, 1/fan_in), gates ~ N(0, 1), biases 0.
  void init_raw(std::span<double> raw, std::mt19937_64& rng) const;

  bool operator==(const NetShape&) const = default;
};

/// log phi(x) and log phi'(x) of one network.
struct NetLogValues {
  double log_cdf;
  double log_density;
};

/// Forward pass on effective parameters.
NetLogValues net_forward(const NetShape& shape, std::span<const double> effective, double x);

/// Reverse pass: given upstream gradients of a scalar objective with respect to log phi(x)
/// and log phi'(x), accumulates d objective / d effective parameters into `grad` and returns
/// d objective / dx.
double net_backward(const NetShape& shape, std::span<const double> effective, double x,
                    double g_log_cdf, double g_log_density, std::span<double> grad);

/// Batched net_forward over many inputs. log_cdf or log_density may be empty to skip them.
void net_forward_batch(const NetShape& shape, std::span<const double> effective,
                       std::span<const double> x, std::span<double> log_cdf,
                       std::span<double> log_density);

/// Batched net_backward: per-input upstream gradients (either may be empty, meaning zero).
/// Accumulates into `grad`; writes d objective / dx into g_x unless it is empty.
void net_backward_batch(const NetShape& shape, std::span<const double> effective,
                        std::span<const double> x, std::span<const double> g_log_cdf,
                        std::span<const double> g_log_density, std::span<double> grad,
                        std::span<double> g_x);

/// One monotone univariate CDF network phi : R -> (0, 1).
///
/// Immutable once constructed; safe to evaluate concurrently.
class UnivariateCdfNet {
 public:
  UnivariateCdfNet(NetShape shape, std::vector<double> raw_params);

  /// Randomly initialized network.
  static UnivariateCdfNet random(NetShape shape, std::mt19937_64& rng);

  /// Net whose effective weights are exactly those given (effective layout), gates a = tanh(raw).
  static UnivariateCdfNet from_effective(NetShape shape, std::span<const double> effective);

  const NetShape& shape() const { return shape_; }
  std::span<const double> raw_params() const { return raw_; }
  std::span<const double> effective_params() const { return effective_; }

  double cdf(double x) const;
  double density(double x) const;
  double log_density(double x) const;
  NetLogValues log_values(double x) const;
  /// x with |cdf(x) - u| <= tol (or the closest double when tol is below resolution).
  double inverse(double u, double tol) const;

 private:
  NetShape shape_;
  std::vector<double> raw_;
  std::vector<double> effective_;
};

}  // namespace mdma
