#include "mdma/univariate_cdf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "mdma/errors.hpp"
#include "mdma/numerics.hpp"

namespace mdma {

NetShape::NetShape(int depth_l, int width_r) : depth(depth_l), width(width_r) {
  if (depth < 1 || depth > kMaxDepth)
    throw InvalidArgument("network depth must be in [1, " + std::to_string(kMaxDepth) + "]");
  if (width < 1 || width > kMaxWidth)
    throw InvalidArgument("network width must be in [1, " + std::to_string(kMaxWidth) + "]");
}

std::size_t NetShape::weight_offset(int k) const {
  std::size_t off = 0;
  for (int i = 0; i < k; ++i) off += static_cast<std::size_t>(layer_out(i)) * (layer_in(i) + 1);
  return off;
}

std::size_t NetShape::gate_offset(int k) const {
  return weight_offset(depth + 1) + static_cast<std::size_t>(k) * width;
}

std::size_t NetShape::param_count() const { return gate_offset(depth); }

void NetShape::to_effective(std::span<const double> raw, std::span<double> effective) const {
  for (int k = 0; k <= depth; ++k) {
    const std::size_t w = weight_offset(k);
    const std::size_t b = bias_offset(k);
    for (std::size_t i = w; i < b; ++i) effective[i] = softplus(raw[i], kWeightBeta);
    for (int o = 0; o < layer_out(k); ++o) effective[b + o] = raw[b + o];
  }
  for (std::size_t i = gate_offset(0); i < param_count(); ++i) effective[i] = std::tanh(raw[i]);
}

void NetShape::accumulate_raw_grad(std::span<const double> raw,
                                   std::span<const double> effective_grad,
                                   std::span<double> raw_grad) const {
  for (int k = 0; k <= depth; ++k) {
    const std::size_t w = weight_offset(k);
    const std::size_t b = bias_offset(k);
    for (std::size_t i = w; i < b; ++i)
      raw_grad[i] += effective_grad[i] * softplus_grad(raw[i], kWeightBeta);
    for (int o = 0; o < layer_out(k); ++o) raw_grad[b + o] += effective_grad[b + o];
  }
  for (std::size_t i = gate_offset(0); i < param_count(); ++i) {
    const double a = std::tanh(raw[i]);
    raw_grad[i] += effective_grad[i] * (1.0 - a * a);
  }
}

void NetShape::init_raw(std::span<double> raw, std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k <= depth; ++k) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(layer_in(k)));
    const std::size_t w = weight_offset(k);
    const std::size_t b = bias_offset(k);
    for (std::size_t i = w; i < b; ++i) raw[i] = sd * normal(rng);
    for (int o = 0; o < layer_out(k); ++o) raw[b + o] = 0.0;
  }
  for (std::size_t i = gate_offset(0); i < param_count(); ++i) raw[i] = normal(rng);
}

namespace {

using Row = std::array<double, NetShape::kMaxWidth>;

// Activations of one forward pass. z/t are layer inputs and their x-derivatives,
// h/dh the pre-activations and their x-derivatives, th = tanh(h) for gated layers.
struct NetActivations {
  std::array<Row, NetShape::kMaxDepth + 1> z, t, h, dh, th;
};

void run_forward(const NetShape& s, std::span<const double> p, double x, NetActivations& act) {
  act.z[0][0] = x;
  act.t[0][0] = 1.0;
  for (int k = 0; k <= s.depth; ++k) {
    const int n_in = s.layer_in(k);
    const int n_out = s.layer_out(k);
    const double* w = p.data() + s.weight_offset(k);
    const double* b = p.data() + s.bias_offset(k);
    const Row& z = act.z[k];
    const Row& t = act.t[k];
    Row& h = act.h[k];
    Row& dh = act.dh[k];
    for (int o = 0; o < n_out; ++o) {
      double acc = b[o];
      double dacc = 0.0;
      for (int i = 0; i < n_in; ++i) {
        acc += w[o * n_in + i] * z[i];
        dacc += w[o * n_in + i] * t[i];
      }
      h[o] = acc;
      dh[o] = dacc;
    }
    if (k < s.depth) {
      const double* a = p.data() + s.gate_offset(k);
      Row& th = act.th[k];
      Row& zn = act.z[k + 1];
      Row& tn = act.t[k + 1];
      for (int o = 0; o < n_out; ++o) {
        th[o] = std::tanh(h[o]);
        zn[o] = h[o] + a[o] * th[o];
        tn[o] = (1.0 + a[o] * (1.0 - th[o] * th[o])) * dh[o];
      }
    }
  }
}

NetLogValues log_values_from(const NetShape& s, const NetActivations& act) {
  const double h = act.h[s.depth][0];
  const double dh = act.dh[s.depth][0];
  const double log_cdf = log_sigmoid(h);
  return {log_cdf, log_cdf + log_sigmoid(-h) + std::log(dh)};
}

}  // namespace

NetLogValues net_forward(const NetShape& shape, std::span<const double> effective, double x) {
  NetActivations act;
  run_forward(shape, effective, x, act);
  return log_values_from(shape, act);
}

double net_backward(const NetShape& s, std::span<const double> p, double x, double g_log_cdf,
                    double g_log_density, std::span<double> grad) {
  NetActivations act;
  run_forward(s, p, x, act);

  const double h_out = act.h[s.depth][0];
  const double sig = sigmoid(h_out);
  // d log sigmoid(h)/dh = 1 - sig; d log sigmoid'(h)/dh = 1 - 2 sig; d log(dh)/d(dh) = 1/dh.
  Row g_h{};
  Row g_dh{};
  g_h[0] = g_log_cdf * (1.0 - sig) + g_log_density * (1.0 - 2.0 * sig);
  g_dh[0] = g_log_density / act.dh[s.depth][0];

  Row g_z{};
  Row g_t{};
  for (int k = s.depth; k >= 0; --k) {
    const int n_in = s.layer_in(k);
    const int n_out = s.layer_out(k);
    const double* w = p.data() + s.weight_offset(k);
    double* gw = grad.data() + s.weight_offset(k);
    double* gb = grad.data() + s.bias_offset(k);
    const Row& z = act.z[k];
    const Row& t = act.t[k];
    for (int i = 0; i < n_in; ++i) {
      g_z[i] = 0.0;
      g_t[i] = 0.0;
    }
    for (int o = 0; o < n_out; ++o) {
      gb[o] += g_h[o];
      for (int i = 0; i < n_in; ++i) {
        gw[o * n_in + i] += g_h[o] * z[i] + g_dh[o] * t[i];
        g_z[i] += w[o * n_in + i] * g_h[o];
        g_t[i] += w[o * n_in + i] * g_dh[o];
      }
    }
    if (k == 0) break;
    // Through the gate of layer k-1: z = h + a tanh(h), t = (1 + a (1 - tanh^2 h)) dh.
    const int gk = k - 1;
    const double* a = p.data() + s.gate_offset(gk);
    double* ga = grad.data() + s.gate_offset(gk);
    const Row& dh = act.dh[gk];
    const Row& th = act.th[gk];
    for (int o = 0; o < s.layer_out(gk); ++o) {
      const double sech2 = 1.0 - th[o] * th[o];
      const double slope = 1.0 + a[o] * sech2;
      ga[o] += g_z[o] * th[o] + g_t[o] * dh[o] * sech2;
      g_dh[o] = g_t[o] * slope;
      g_h[o] = g_z[o] * slope + g_t[o] * dh[o] * a[o] * (-2.0 * th[o] * sech2);
    }
  }
  return g_z[0];
}

UnivariateCdfNet::UnivariateCdfNet(NetShape shape, std::vector<double> raw_params)
    : shape_(shape), raw_(std::move(raw_params)), effective_(shape_.param_count()) {
  if (raw_.size() != shape_.param_count())
    throw InvalidArgument("raw parameter count does not match network shape");
  shape_.to_effective(raw_, effective_);
}

UnivariateCdfNet UnivariateCdfNet::random(NetShape shape, std::mt19937_64& rng) {
  std::vector<double> raw(shape.param_count());
  shape.init_raw(raw, rng);
  return UnivariateCdfNet(shape, std::move(raw));
}

UnivariateCdfNet UnivariateCdfNet::from_effective(NetShape shape,
                                                  std::span<const double> effective) {
  if (effective.size() != shape.param_count())
    throw InvalidArgument("effective parameter count does not match network shape");
  std::vector<double> raw(effective.begin(), effective.end());
  for (int k = 0; k <= shape.depth; ++k) {
    for (std::size_t i = shape.weight_offset(k); i < shape.bias_offset(k); ++i) {
      if (!(effective[i] > 0.0)) throw InvalidArgument("effective weights must be positive");
      raw[i] = inverse_softplus(effective[i], kWeightBeta);
    }
  }
  for (std::size_t i = shape.gate_offset(0); i < shape.param_count(); ++i) {
    if (!(std::abs(effective[i]) < 1.0)) throw InvalidArgument("gates must lie in (-1, 1)");
    raw[i] = std::atanh(effective[i]);
  }
  return UnivariateCdfNet(shape, std::move(raw));
}

NetLogValues UnivariateCdfNet::log_values(double x) const {
  if (!std::isfinite(x)) throw InvalidArgument("non-finite input");
  return net_forward(shape_, effective_, x);
}

double UnivariateCdfNet::cdf(double x) const { return std::exp(log_values(x).log_cdf); }

double UnivariateCdfNet::density(double x) const { return std::exp(log_values(x).log_density); }

double UnivariateCdfNet::log_density(double x) const { return log_values(x).log_density; }

double UnivariateCdfNet::inverse(double u, double tol) const {
  return bisect_cdf([this](double x) { return std::exp(net_forward(shape_, effective_, x).log_cdf); },
                    u, tol);
}

}  // namespace mdma

namespace mdma {

namespace {

// The batched kernels work on blocks of kLanes inputs held in fixed-size arrays, so each
// activation lives in registers and every elementary function maps to packet operations.
constexpr int kLanes = 8;
using Lane = Eigen::Array<double, kLanes, 1>;

Lane tanh_of(const Lane& h) {
  const Lane e = (-2.0 * h.abs()).exp();
  const Lane t = (1.0 - e) / (1.0 + e);
  return (h < 0.0).select(-t, t);
}

Lane sigmoid_of(const Lane& h) {
  const Lane e = (-h.abs()).exp();
  return (h >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e));
}

struct BlockActivations {
  std::array<std::array<Lane, NetShape::kMaxWidth>, NetShape::kMaxDepth + 1> z, t, h, dh, th;
};

void run_block(const NetShape& s, std::span<const double> p, const Lane& x, BlockActivations& act) {
  act.z[0][0] = x;
  act.t[0][0] = Lane::Ones();
  for (int k = 0; k <= s.depth; ++k) {
    const int n_in = s.layer_in(k);
    const int n_out = s.layer_out(k);
    const double* w = p.data() + s.weight_offset(k);
    const double* b = p.data() + s.bias_offset(k);
    for (int o = 0; o < n_out; ++o) {
      Lane acc = Lane::Constant(b[o]);
      Lane dacc = Lane::Zero();
      for (int i = 0; i < n_in; ++i) {
        acc += w[o * n_in + i] * act.z[k][i];
        dacc += w[o * n_in + i] * act.t[k][i];
      }
      act.h[k][o] = acc;
      act.dh[k][o] = dacc;
    }
    if (k < s.depth) {
      const double* a = p.data() + s.gate_offset(k);
      for (int o = 0; o < n_out; ++o) {
        const Lane th = tanh_of(act.h[k][o]);
        act.th[k][o] = th;
        act.z[k + 1][o] = act.h[k][o] + a[o] * th;
        act.t[k + 1][o] = (1.0 + a[o] * (1.0 - th.square())) * act.dh[k][o];
      }
    }
  }
}

// Copies up to kLanes inputs, padding a short tail with its last value.
Lane load_lane(std::span<const double> v, std::size_t begin) {
  Lane out;
  const std::size_t count = std::min<std::size_t>(kLanes, v.size() - begin);
  for (std::size_t i = 0; i < kLanes; ++i) out(static_cast<Eigen::Index>(i)) = v[begin + std::min(i, count - 1)];
  return out;
}

Lane load_lane_or_zero(std::span<const double> v, std::size_t begin, std::size_t n) {
  Lane out = Lane::Zero();
  if (v.empty()) return out;
  const std::size_t count = std::min<std::size_t>(kLanes, n - begin);
  for (std::size_t i = 0; i < count; ++i) out(static_cast<Eigen::Index>(i)) = v[begin + i];
  return out;
}

void store_lane(const Lane& value, std::span<double> v, std::size_t begin) {
  const std::size_t count = std::min<std::size_t>(kLanes, v.size() - begin);
  for (std::size_t i = 0; i < count; ++i) v[begin + i] = value(static_cast<Eigen::Index>(i));
}

}  // namespace

void net_forward_batch(const NetShape& shape, std::span<const double> effective,
                       std::span<const double> x, std::span<double> log_cdf,
                       std::span<double> log_density) {
  BlockActivations act;
  for (std::size_t begin = 0; begin < x.size(); begin += kLanes) {
    run_block(shape, effective, load_lane(x, begin), act);
    const Lane& h = act.h[shape.depth][0];
    // log sigmoid(+-h) = -max(-+h, 0) - log(1 + exp(-|h|)); the log term is shared.
    const Lane tail = (1.0 + (-h.abs()).exp()).log();
    if (!log_cdf.empty()) store_lane(-(-h).max(0.0) - tail, log_cdf, begin);
    if (!log_density.empty())
      store_lane(-h.abs() - 2.0 * tail + act.dh[shape.depth][0].log(), log_density, begin);
  }
}

void net_backward_batch(const NetShape& s, std::span<const double> p, std::span<const double> x,
                        std::span<const double> g_log_cdf, std::span<const double> g_log_density,
                        std::span<double> grad, std::span<double> g_x) {
  const std::size_t n = x.size();
  const std::size_t n_params = s.param_count();
  // Per-lane parameter gradients, reduced once at the end.
  std::vector<Lane> lane_grad(n_params, Lane::Zero());
  BlockActivations act;
  std::array<Lane, NetShape::kMaxWidth> g_h, g_dh, g_z, g_t;
  for (std::size_t begin = 0; begin < n; begin += kLanes) {
    run_block(s, p, load_lane(x, begin), act);
    // Padded lanes carry zero upstream gradient.
    const Lane gc = load_lane_or_zero(g_log_cdf, begin, n);
    const Lane gd = load_lane_or_zero(g_log_density, begin, n);
    const Lane sig = sigmoid_of(act.h[s.depth][0]);
    g_h[0] = gc * (1.0 - sig) + gd * (1.0 - 2.0 * sig);
    g_dh[0] = gd / act.dh[s.depth][0];

    for (int k = s.depth; k >= 0; --k) {
      const int n_in = s.layer_in(k);
      const int n_out = s.layer_out(k);
      const double* w = p.data() + s.weight_offset(k);
      Lane* gw = lane_grad.data() + s.weight_offset(k);
      Lane* gb = lane_grad.data() + s.bias_offset(k);
      for (int i = 0; i < n_in; ++i) {
        g_z[i] = Lane::Zero();
        g_t[i] = Lane::Zero();
      }
      for (int o = 0; o < n_out; ++o) {
        gb[o] += g_h[o];
        for (int i = 0; i < n_in; ++i) {
          gw[o * n_in + i] += g_h[o] * act.z[k][i] + g_dh[o] * act.t[k][i];
          g_z[i] += w[o * n_in + i] * g_h[o];
          g_t[i] += w[o * n_in + i] * g_dh[o];
        }
      }
      if (k == 0) break;
      // Through the gate of layer k-1: z = h + a tanh(h), t = (1 + a (1 - tanh^2 h)) dh.
      const int gk = k - 1;
      const double* a = p.data() + s.gate_offset(gk);
      Lane* ga = lane_grad.data() + s.gate_offset(gk);
      for (int o = 0; o < n_in; ++o) {
        const Lane& th = act.th[gk][o];
        const Lane& dh = act.dh[gk][o];
        const Lane sech2 = 1.0 - th.square();
        const Lane slope = 1.0 + a[o] * sech2;
        ga[o] += g_z[o] * th + g_t[o] * dh * sech2;
        g_dh[o] = g_t[o] * slope;
        g_h[o] = g_z[o] * slope + g_t[o] * dh * a[o] * (-2.0 * th * sech2);
      }
    }
    if (!g_x.empty()) store_lane(g_z[0], g_x, begin);
  }
  for (std::size_t i = 0; i < n_params; ++i) grad[i] += lane_grad[i].sum();
}

}  // namespace mdma
