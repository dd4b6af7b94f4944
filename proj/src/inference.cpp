#include "mdma/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mdma/errors.hpp"
#include "mdma/numerics.hpp"
#include "mdma/stats.hpp"

namespace mdma {

namespace {

void check_index(int v, int d) {
  if (v < 0 || v >= d) throw InvalidArgument("variable index " + std::to_string(v) + " out of range");
}

}  // namespace

double estimate_mi(const MdmaModel& model, const RowMatrix& data, std::span<const int> y,
                   std::span<const int> z) {
  const int d = model.d();
  if (data.cols() != d) throw InvalidArgument("data must have d columns");
  if (data.rows() == 0) throw InvalidArgument("empty dataset");
  if (y.empty() || z.empty()) throw InvalidArgument("variable subsets must be nonempty");
  std::vector<char> in_y(d, 0), in_z(d, 0), in_both(d, 0);
  for (int v : y) {
    check_index(v, d);
    in_y[v] = 1;
  }
  for (int v : z) {
    check_index(v, d);
    if (in_y[v]) throw InvalidArgument("variable subsets overlap");
    in_z[v] = 1;
  }
  for (int v = 0; v < d; ++v) in_both[v] = in_y[v] || in_z[v];

  const Eigen::MatrixXd logs = QueryEngine(model).log_marginals(data, {in_both, in_y, in_z});
  const double mi = (logs.col(0) - logs.col(1) - logs.col(2)).mean();
  if (!std::isfinite(mi)) throw NumericalError("non-finite mutual information estimate");
  return mi;
}

Eigen::MatrixXd conditional_cdf_pairs(const MdmaModel& model, const RowMatrix& data, int i, int j,
                                      std::span<const int> cond) {
  const int d = model.d();
  if (data.cols() != d) throw InvalidArgument("data must have d columns");
  check_index(i, d);
  check_index(j, d);
  if (i == j) throw InvalidArgument("tested variables must differ");
  std::vector<Tag> base(d, Tag::Marginalize);
  for (int c : cond) {
    check_index(c, d);
    if (c == i || c == j) throw InvalidArgument("conditioning set contains a tested variable");
    base[c] = Tag::Density;
  }
  const auto n = static_cast<std::size_t>(data.rows());
  std::vector<Tag> den_tags(n * d), num1(n * d), num2(n * d);
  std::vector<double> x(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    for (int v = 0; v < d; ++v) {
      den_tags[r * d + v] = num1[r * d + v] = num2[r * d + v] = base[v];
      const bool used = base[v] != Tag::Marginalize || v == i || v == j;
      x[r * d + v] = used ? data(static_cast<Eigen::Index>(r), v) : 0.0;
    }
    num1[r * d + i] = Tag::Cdf;
    num2[r * d + j] = Tag::Cdf;
  }
  const QueryEngine engine(model);
  const Eigen::VectorXd log_den =
      cond.empty() ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)) : engine.log_contract(den_tags, x, n);
  const Eigen::VectorXd log_u1 = engine.log_contract(num1, x, n);
  const Eigen::VectorXd log_u2 = engine.log_contract(num2, x, n);
  const double floor = std::log(1e-300);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    if (!(log_den(r) >= floor)) {
      out.row(r).setConstant(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    out(r, 0) = std::clamp(std::exp(log_u1(r) - log_den(r)), 0.0, 1.0);
    out(r, 1) = std::clamp(std::exp(log_u2(r) - log_den(r)), 0.0, 1.0);
  }
  return out;
}

CiTestResult ci_test(const MdmaModel& model, const RowMatrix& data, int i, int j,
                     std::span<const int> cond, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must be in (0, 1)");
  const Eigen::MatrixXd pairs = conditional_cdf_pairs(model, data, i, j, cond);
  CiTestResult result;
  std::vector<double> u1, u2;
  for (Eigen::Index r = 0; r < pairs.rows(); ++r) {
    if (std::isnan(pairs(r, 0))) {
      ++result.dropped;
      continue;
    }
    u1.push_back(pairs(r, 0));
    u2.push_back(pairs(r, 1));
  }
  if (static_cast<double>(result.dropped) > 0.1 * static_cast<double>(pairs.rows()))
    throw NumericalError("unstable conditioning");
  const KendallResult k = kendall_tau(u1, u2);
  result.statistic = k.tau;
  result.z = k.z;
  result.p_value = k.p_value;
  result.reject = k.p_value < alpha;
  result.u1_u2.resize(static_cast<Eigen::Index>(u1.size()), 2);
  for (std::size_t r = 0; r < u1.size(); ++r) {
    result.u1_u2(static_cast<Eigen::Index>(r), 0) = u1[r];
    result.u1_u2(static_cast<Eigen::Index>(r), 1) = u2[r];
  }
  return result;
}

double anomaly_score(const MdmaModel& model, std::span<const double> x,
                     std::span<const std::uint8_t> mask) {
  return -log_density(model, x, mask);
}

Eigen::VectorXd anomaly_scores(const MdmaModel& model, const RowMatrix& x,
                               std::span<const std::uint8_t> mask) {
  return -QueryEngine(model).log_density_batch(x, mask);
}

NmdmaModel::NmdmaModel(int d, NetShape shape, std::vector<double> params)
    : d_(d), shape_(shape), params_(std::move(params)) {
  if (d < 1) throw InvalidArgument("dimension must be at least 1");
  if (params_.size() != nmdma_param_count(d, shape))
    throw InvalidArgument("parameter vector has wrong length");
}

std::size_t NmdmaModel::t_index(int row, int col) const {
  if (!(0 <= row && row < col && col < d_)) throw InvalidArgument("not a strict upper-triangle entry");
  // rows before `row` hold (d-1) + (d-2) + ... + (d-row) entries
  const std::size_t before = static_cast<std::size_t>(row) * (2 * d_ - row - 1) / 2;
  return t_offset() + before + static_cast<std::size_t>(col - row - 1);
}

Eigen::MatrixXd NmdmaModel::transform_matrix() const {
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(d_, d_);
  for (int r = 0; r < d_; ++r)
    for (int c = r + 1; c < d_; ++c) t(r, c) = softplus(params_[t_index(r, c)], 1.0);
  return t;
}

Eigen::VectorXd NmdmaModel::gates() const {
  Eigen::VectorXd a(d_);
  for (int k = 0; k < d_; ++k) a(k) = std::tanh(params_[gate_offset() + k]);
  return a;
}

Eigen::VectorXd NmdmaModel::transform(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(d_)) throw InvalidArgument("point must have d coordinates");
  const Eigen::VectorXd a = gates();
  Eigen::VectorXd g(d_), xv(d_);
  for (int k = 0; k < d_; ++k) {
    if (!std::isfinite(x[k])) throw InvalidArgument("non-finite input");
    xv(k) = x[k];
    g(k) = x[k] + a(k) * std::tanh(x[k]);
  }
  return xv + transform_matrix() * g;
}

std::size_t nmdma_param_count(int d, const NetShape& shape) {
  return static_cast<std::size_t>(d) * shape.param_count() + static_cast<std::size_t>(d) * (d - 1) / 2 +
         static_cast<std::size_t>(d);
}

NmdmaModel init_nmdma(int d, const NetShape& shape, std::uint64_t seed) {
  if (d < 1) throw InvalidArgument("dimension must be at least 1");
  std::mt19937_64 rng(seed);
  std::vector<double> params(nmdma_param_count(d, shape));
  const std::size_t np = shape.param_count();
  for (int j = 0; j < d; ++j) shape.init_raw(std::span<double>(params).subspan(j * np, np), rng);
  std::normal_distribution<double> t_dist(-3.0, 0.1);
  std::normal_distribution<double> gate_dist(0.0, 1.0);
  const std::size_t t_begin = d * np;
  const std::size_t gate_begin = t_begin + static_cast<std::size_t>(d) * (d - 1) / 2;
  for (std::size_t p = t_begin; p < gate_begin; ++p) params[p] = t_dist(rng);
  for (std::size_t p = gate_begin; p < params.size(); ++p) params[p] = gate_dist(rng);
  return NmdmaModel(d, shape, std::move(params));
}

double nmdma_log_density(const NmdmaModel& nm, std::span<const double> x) {
  const Eigen::VectorXd v = nm.transform(x);
  const NetShape& shape = nm.net_shape();
  std::vector<double> eff(shape.param_count());
  double total = 0.0;
  for (int j = 0; j < nm.d(); ++j) {
    shape.to_effective(nm.params().subspan(nm.net_offset(j), eff.size()), eff);
    total += net_forward(shape, eff, v(j)).log_density;
  }
  return total;
}

double nmdma_loss_and_grad(const NmdmaModel& nm, const RowMatrix& data,
                           std::span<const std::size_t> rows, std::span<double> grad) {
  const int d = nm.d();
  if (data.cols() != d) throw InvalidArgument("data must have d columns");
  if (rows.empty()) throw InvalidArgument("empty batch");
  if (grad.size() != nm.params().size()) throw InvalidArgument("gradient buffer size mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);

  const NetShape& shape = nm.net_shape();
  const std::size_t np = shape.param_count();
  std::vector<double> eff(d * np), eff_grad(d * np, 0.0);
  for (int j = 0; j < d; ++j)
    shape.to_effective(nm.params().subspan(nm.net_offset(j), np), std::span<double>(eff).subspan(j * np, np));
  const Eigen::MatrixXd t = nm.transform_matrix();
  const Eigen::VectorXd a = nm.gates();
  Eigen::MatrixXd g_t = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd g_a = Eigen::VectorXd::Zero(d);

  const double scale = -1.0 / static_cast<double>(rows.size());
  double total = 0.0;
  Eigen::VectorXd x(d), th(d), g(d), v(d), g_v(d);
  for (std::size_t r : rows) {
    if (r >= static_cast<std::size_t>(data.rows())) throw InvalidArgument("row index out of range");
    for (int k = 0; k < d; ++k) {
      x(k) = data(static_cast<Eigen::Index>(r), k);
      if (!std::isfinite(x(k))) throw InvalidArgument("non-finite input at row " + std::to_string(r));
      th(k) = std::tanh(x(k));
      g(k) = x(k) + a(k) * th(k);
    }
    v = x + t * g;
    double row_log = 0.0;
    for (int j = 0; j < d; ++j) {
      const auto e = std::span<const double>(eff).subspan(j * np, np);
      row_log += net_forward(shape, e, v(j)).log_density;
      g_v(j) = net_backward(shape, e, v(j), 0.0, scale, std::span<double>(eff_grad).subspan(j * np, np));
    }
    if (!std::isfinite(row_log)) throw NonFiniteLoss(r, "non-finite log-likelihood at row " + std::to_string(r));
    total += row_log;
    for (int j = 0; j < d; ++j) {
      for (int k = j + 1; k < d; ++k) {
        g_t(j, k) += g_v(j) * g(k);
        g_a(k) += g_v(j) * t(j, k) * th(k);
      }
    }
  }
  for (int j = 0; j < d; ++j)
    shape.accumulate_raw_grad(nm.params().subspan(nm.net_offset(j), np),
                              std::span<const double>(eff_grad).subspan(j * np, np),
                              grad.subspan(nm.net_offset(j), np));
  for (int j = 0; j < d; ++j)
    for (int k = j + 1; k < d; ++k) {
      const std::size_t p = nm.t_index(j, k);
      grad[p] += g_t(j, k) * softplus_grad(nm.params()[p], 1.0);
    }
  for (int k = 0; k < d; ++k) grad[nm.gate_offset() + k] += g_a(k) * (1.0 - a(k) * a(k));
  return -total / static_cast<double>(rows.size());
}

}  // namespace mdma
