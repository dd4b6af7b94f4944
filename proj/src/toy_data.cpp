#include "mdma/toy_data.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "mdma/errors.hpp"

namespace mdma {

RowMatrix eight_gaussians_3d(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> blob(0, 7);
  std::normal_distribution<double> noise(0.0, 0.2);
  RowMatrix x(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const int k = blob(rng);
    const double angle = 2.0 * std::numbers::pi * k / 8.0;
    x(r, 0) = 2.0 * std::cos(angle) + noise(rng);
    x(r, 1) = 2.0 * std::sin(angle) + noise(rng);
    x(r, 2) = 0.5 * (k % 4) - 0.75 + noise(rng);
  }
  return x;
}

RowMatrix two_spirals_3d(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  RowMatrix x(static_cast<Eigen::Index>(n), 3);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double t = std::sqrt(unit(rng)) * 3.0 * std::numbers::pi;
    const double arm = unit(rng) < 0.5 ? -1.0 : 1.0;
    x(r, 0) = arm * -std::cos(t) * t / 3.0 + noise(rng);
    x(r, 1) = arm * std::sin(t) * t / 3.0 + noise(rng);
    x(r, 2) = arm * t / (3.0 * std::numbers::pi) + noise(rng);
  }
  return x;
}

RowMatrix gaussian_rows(std::size_t n, const Eigen::MatrixXd& covariance, std::uint64_t seed) {
  const Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) throw InvalidArgument("covariance is not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = covariance.rows();
  RowMatrix x(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd e(d);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index j = 0; j < d; ++j) e(j) = normal(rng);
    x.row(r) = (l * e).transpose();
  }
  return x;
}

Eigen::MatrixXd graded_covariance(int d) {
  Eigen::MatrixXd s(d, d);
  for (int i = 1; i <= d; ++i)
    for (int j = 1; j <= d; ++j) s(i - 1, j - 1) = i == j ? 1.0 : (i + j - 2) / (5.0 * d);
  return s;
}

RowMatrix power_like(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RowMatrix x(static_cast<Eigen::Index>(n), 6);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double time = unit(rng);
    const double load = std::exp(0.6 * normal(rng) + 0.8 * std::sin(2.0 * std::numbers::pi * time));
    x(r, 0) = load + 0.05 * normal(rng);
    x(r, 1) = 0.3 * load + 0.2 * std::abs(normal(rng));
    x(r, 2) = 240.0 + 3.0 * normal(rng) - 1.5 * load;
    x(r, 3) = unit(rng) < 0.7 ? 0.1 * unit(rng) : 1.0 + 0.2 * normal(rng);
    x(r, 4) = unit(rng) < 0.5 ? 0.05 * unit(rng) : load * (1.0 + 0.1 * normal(rng));
    x(r, 5) = std::cos(2.0 * std::numbers::pi * time) + 0.1 * normal(rng);
  }
  // Standardize columns like the usual preprocessing of such tables.
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  const Eigen::RowVectorXd sd = (x.array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    if (sd(j) > 0.0) x.col(j) /= sd(j);
  return x;
}

double gaussian_mutual_information(const Eigen::MatrixXd& covariance, std::span<const int> y,
                                   std::span<const int> z) {
  auto block = [&](std::span<const int> a, std::span<const int> b) {
    Eigen::MatrixXd s(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < b.size(); ++j) s(i, j) = covariance(a[i], b[j]);
    return s;
  };
  std::vector<int> yz(y.begin(), y.end());
  yz.insert(yz.end(), z.begin(), z.end());
  const double log_det_y = block(y, y).llt().matrixLLT().diagonal().array().log().sum() * 2.0;
  const double log_det_z = block(z, z).llt().matrixLLT().diagonal().array().log().sum() * 2.0;
  const double log_det_yz = block(yz, yz).llt().matrixLLT().diagonal().array().log().sum() * 2.0;
  return 0.5 * (log_det_y + log_det_z - log_det_yz);
}

double gaussian_mle_nll(const RowMatrix& train, const RowMatrix& test) {
  const auto d = train.cols();
  const Eigen::RowVectorXd mean = train.colwise().mean();
  const Eigen::MatrixXd centered = train.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(train.rows());
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("singular sample covariance");
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const Eigen::MatrixXd t = (test.rowwise() - mean).transpose();
  const Eigen::MatrixXd w = llt.matrixL().solve(t);
  const double quad = w.array().square().sum() / static_cast<double>(test.rows());
  return 0.5 * (quad + log_det + static_cast<double>(d) * std::log(2.0 * std::numbers::pi));
}

RowMatrix make_toy(const std::string& name, std::size_t n, std::uint64_t seed, int d) {
  if (name == "8gaussians") return eight_gaussians_3d(n, seed);
  if (name == "spirals") return two_spirals_3d(n, seed);
  if (name == "graded") return gaussian_rows(n, graded_covariance(d), seed);
  if (name == "power") return power_like(n, seed);
  throw InvalidArgument("unknown toy dataset '" + name + "'");
}

}  // namespace mdma
