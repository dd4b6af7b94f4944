#include "mdma/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mdma/contraction.hpp"
#include "mdma/errors.hpp"
#include "mdma/query.hpp"

namespace mdma {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
  if (epochs < 0) throw InvalidArgument("epochs must be nonnegative");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw InvalidArgument("validation fraction must be in [0, 1)");
}

namespace {

struct GatheredBatch {
  std::vector<Tag> tags;
  std::vector<double> x;
};

GatheredBatch gather(const Dataset& data, std::span<const std::size_t> rows) {
  const int d = data.cols();
  GatheredBatch batch;
  batch.tags.resize(rows.size() * d);
  batch.x.resize(rows.size() * d);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    const std::size_t r = rows[b];
    if (r >= data.rows()) throw InvalidArgument("row index out of range");
    bool any = false;
    for (int j = 0; j < d; ++j) {
      const bool miss = data.is_missing(r, j);
      batch.tags[b * d + j] = miss ? Tag::Marginalize : Tag::Density;
      batch.x[b * d + j] = miss ? 0.0 : data.values(r, j);
      any |= !miss;
    }
    if (!any) throw InvalidArgument("row " + std::to_string(r) + " fully missing");
  }
  return batch;
}

void check_finite(const Eigen::VectorXd& log_f, std::span<const std::size_t> rows) {
  for (Eigen::Index b = 0; b < log_f.size(); ++b) {
    if (!std::isfinite(log_f(b))) {
      const std::size_t r = rows[static_cast<std::size_t>(b)];
      throw NonFiniteLoss(r, "non-finite log-likelihood at row " + std::to_string(r));
    }
  }
}

}  // namespace

double loss_and_grad(const MdmaModel& model, const Dataset& data, std::span<const std::size_t> rows,
                     std::span<double> grad) {
  if (rows.empty()) throw InvalidArgument("empty batch");
  if (data.cols() != model.d()) throw InvalidArgument("data dimension does not match model");
  if (grad.size() != model.params().size()) throw InvalidArgument("gradient buffer size mismatch");
  std::fill(grad.begin(), grad.end(), 0.0);

  const int d = model.d();
  const int m = model.m();
  const std::size_t n = rows.size();
  const GatheredBatch batch = gather(data, rows);
  const QueryEngine engine(model);
  const auto order = model.leaf_order();

  std::vector<LeafBatch> leaves(d);
  for (int p = 0; p < d; ++p)
    leaves[p] = leaf_from_log_factors(engine.log_factors(order[p], batch.tags, batch.x, n));

  GradientTape tape;
  const Eigen::VectorXd log_f = engine.contraction().forward(leaves, &tape);
  check_finite(log_f, rows);
  const double nll = -log_f.mean();

  const Eigen::VectorXd g_log = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), -1.0 / n);
  std::vector<Eigen::MatrixXd> g_leaf_log;
  engine.contraction().backward(leaves, tape, g_log, g_leaf_log,
                                grad.subspan(model.lambda_offset()));

  const NetShape& shape = model.net_shape();
  const std::size_t np = model.net_param_count();
  const int nets = d * m;
#pragma omp parallel for schedule(dynamic, 8)
  for (int idx = 0; idx < nets; ++idx) {
    const int p = idx / m;
    const int i = idx % m;
    const int v = order[p];
    std::vector<double> xs, g_density;
    for (std::size_t b = 0; b < n; ++b) {
      if (batch.tags[b * d + v] == Tag::Marginalize) continue;
      xs.push_back(batch.x[b * d + v]);
      g_density.push_back(g_leaf_log[p](i, static_cast<Eigen::Index>(b)));
    }
    if (xs.empty()) continue;
    std::vector<double> eff_grad(np, 0.0);
    net_backward_batch(shape, engine.effective_net(i, v), xs, {}, g_density, eff_grad, {});
    shape.accumulate_raw_grad(model.net_raw(i, v), eff_grad, grad.subspan(model.net_offset(i, v), np));
  }
  return nll;
}

double mean_nll(const MdmaModel& model, const Dataset& data, std::span<const std::size_t> rows) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  const GatheredBatch batch = gather(data, rows);
  const QueryEngine engine(model);
  const Eigen::VectorXd log_f = engine.log_contract(batch.tags, batch.x, rows.size());
  check_finite(log_f, rows);
  return -log_f.mean();
}

AdamOptimizer::AdamOptimizer(std::size_t size, double learning_rate, double beta1, double beta2,
                             double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {}

void AdamOptimizer::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw InvalidArgument("optimizer state size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] -= lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

std::vector<int> coupling_from_correlation(const Eigen::MatrixXd& correlation, int pool_size) {
  const int d = static_cast<int>(correlation.rows());
  if (correlation.cols() != d) throw InvalidArgument("correlation matrix must be square");
  if (pool_size < 2) throw InvalidArgument("pool size must be at least 2");
  const Eigen::MatrixXd abs_corr = correlation.cwiseAbs();

  std::vector<std::vector<int>> items;
  for (int v = 0; v < d; ++v) items.push_back({v});
  std::size_t full_size = 1;

  auto block_mean = [&](const std::vector<int>& a, const std::vector<int>& b) {
    double s = 0.0;
    for (int i : a)
      for (int j : b) s += abs_corr(i, j);
    return s / static_cast<double>(a.size() * b.size());
  };

  while (items.size() > 1) {
    const std::size_t count = items.size();
    const std::size_t pool = static_cast<std::size_t>(pool_size);
    const std::size_t nodes = (count + pool - 1) / pool;
    const bool has_irregular = items.back().size() < full_size;
    const std::size_t regular = has_irregular ? count - 1 : count;
    const std::size_t full_groups = (count % pool == 0 && !has_irregular) ? nodes : nodes - 1;

    Eigen::MatrixXd coarse(count, count);
    for (std::size_t a = 0; a < count; ++a)
      for (std::size_t b = 0; b < count; ++b) coarse(a, b) = a == b ? 0.0 : block_mean(items[a], items[b]);

    std::vector<char> used(count, 0);
    std::vector<std::vector<std::size_t>> groups;
    for (std::size_t g = 0; g < full_groups; ++g) {
      std::size_t best_a = 0, best_b = 0;
      double best = -1.0;
      for (std::size_t a = 0; a < regular; ++a) {
        if (used[a]) continue;
        for (std::size_t b = a + 1; b < regular; ++b) {
          if (used[b]) continue;
          if (coarse(a, b) > best) {
            best = coarse(a, b);
            best_a = a;
            best_b = b;
          }
        }
      }
      std::vector<std::size_t> group{best_a, best_b};
      used[best_a] = used[best_b] = 1;
      while (group.size() < pool) {
        std::size_t pick = 0;
        double pick_score = -1.0;
        for (std::size_t c = 0; c < regular; ++c) {
          if (used[c]) continue;
          double s = 0.0;
          for (std::size_t member : group) s += coarse(c, member);
          s /= static_cast<double>(group.size());
          if (s > pick_score) {
            pick_score = s;
            pick = c;
          }
        }
        group.push_back(pick);
        used[pick] = 1;
      }
      groups.push_back(std::move(group));
    }
    std::vector<std::size_t> rest;
    for (std::size_t c = 0; c < regular; ++c)
      if (!used[c]) rest.push_back(c);
    if (has_irregular) rest.push_back(count - 1);
    if (!rest.empty()) groups.push_back(std::move(rest));

    std::vector<std::vector<int>> next;
    for (const auto& group : groups) {
      std::vector<int> vars;
      for (std::size_t member : group) vars.insert(vars.end(), items[member].begin(), items[member].end());
      next.push_back(std::move(vars));
    }
    items = std::move(next);
    full_size *= pool;
  }
  return items.front();
}

std::vector<int> adaptive_coupling(const Dataset& data, std::span<const std::size_t> rows,
                                   int pool_size) {
  const int d = data.cols();
  std::vector<std::size_t> complete;
  for (std::size_t r : rows) {
    bool ok = true;
    for (int j = 0; j < d && ok; ++j) ok = !data.is_missing(r, j);
    if (ok) complete.push_back(r);
  }
  if (complete.size() < 2) throw InvalidArgument("insufficient data for coupling");
  if (d == 1) return {0};

  Eigen::MatrixXd x(static_cast<Eigen::Index>(complete.size()), d);
  for (std::size_t b = 0; b < complete.size(); ++b) x.row(static_cast<Eigen::Index>(b)) = data.values.row(complete[b]);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::MatrixXd cov = x.transpose() * x;
  Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const double denom = std::sqrt(cov(i, i) * cov(j, j));
      corr(i, j) = denom > 0.0 ? cov(i, j) / denom : 0.0;
    }
  }
  return coupling_from_correlation(corr, pool_size);
}

FitResult fit(MdmaModel& model, const Dataset& data, const TrainConfig& config,
              const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (data.rows() == 0) throw InvalidArgument("empty dataset");
  if (data.cols() != model.d()) throw InvalidArgument("data dimension does not match model");

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * data.rows()));
  const std::size_t n_train = data.rows() - n_val;
  if (n_train == 0) throw InvalidArgument("validation split leaves no training rows");
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  FitResult result;
  auto record = [&](const EpochRecord& rec) {
    result.trace.push_back(rec);
    if (on_epoch) on_epoch(rec);
  };

  const double nan = std::numeric_limits<double>::quiet_NaN();
  EpochRecord initial{0, 0.0, nan};
  try {
    initial.train_nll = mean_nll(model, data, train);
    if (!val.empty()) initial.validation_nll = mean_nll(model, data, val);
  } catch (const NonFiniteLoss& e) {
    result.diverged = true;
    result.message = e.what();
    return result;
  }
  record(initial);

  std::vector<double> best_params(model.params().begin(), model.params().end());
  double best_val = val.empty() ? nan : initial.validation_nll;
  AdamOptimizer adam(model.params().size(), config.learning_rate, config.adam_beta1,
                     config.adam_beta2, config.adam_eps);
  std::vector<double> grad(model.params().size());

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double loss_sum = 0.0;
    try {
      for (std::size_t begin = 0; begin < n_train; begin += config.batch_size) {
        const std::size_t count = std::min(config.batch_size, n_train - begin);
        const std::span<const std::size_t> batch(train.data() + begin, count);
        const double loss = loss_and_grad(model, data, batch, grad);
        if (config.max_grad_norm > 0.0) clip_grad_norm(grad, config.max_grad_norm);
        adam.step(model.mutable_params(), grad);
        loss_sum += loss * static_cast<double>(count);
      }
    } catch (const NonFiniteLoss& e) {
      result.diverged = true;
      result.message = e.what();
      break;
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(n_train), nan};
    if (!val.empty()) {
      try {
        rec.validation_nll = mean_nll(model, data, val);
      } catch (const NonFiniteLoss& e) {
        result.diverged = true;
        result.message = e.what();
        break;
      }
      if (!(rec.validation_nll >= best_val)) {
        best_val = rec.validation_nll;
        best_params.assign(model.params().begin(), model.params().end());
        result.best_epoch = epoch;
      }
    } else {
      result.best_epoch = epoch;
    }
    record(rec);
  }
  if (!val.empty()) std::copy(best_params.begin(), best_params.end(), model.mutable_params().begin());
  return result;
}

}  // namespace mdma
