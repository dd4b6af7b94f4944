#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "mdma/query.hpp"

namespace mdma {

/// Eight Gaussian blobs on a circle of radius 2 in (x1, x2), std 0.2; x3 is Gaussian around a
/// level that depends on the blob, so every pair of coordinates is dependent.
RowMatrix eight_gaussians_3d(std::size_t n, std::uint64_t seed);

/// Two interleaved spiral arms in (x1, x2) with noise 0.1; x3 grows along each arm with
/// opposite sign per arm.
RowMatrix two_spirals_3d(std::size_t n, std::uint64_t seed);

/// Zero-mean Gaussian rows with the given covariance.
RowMatrix gaussian_rows(std::size_t n, const Eigen::MatrixXd& covariance, std::uint64_t seed);

/// Covariance with unit diagonal and off-diagonal (i + j - 2) / (5d) for 1-based i, j.
Eigen::MatrixXd graded_covariance(int d);

/// Six-column stand-in for a household power-consumption table: skewed, heavy-tailed and
/// partly discrete-looking columns with nonlinear dependence.
RowMatrix power_like(std::size_t n, std::uint64_t seed);

/// Mutual information of two disjoint coordinate blocks of a Gaussian.
double gaussian_mutual_information(const Eigen::MatrixXd& covariance, std::span<const int> y,
                                   std::span<const int> z);

/// Mean negative log-likelihood on `test` of the full-covariance Gaussian fitted to `train`
/// by maximum likelihood.
double gaussian_mle_nll(const RowMatrix& train, const RowMatrix& test);

/// Names accepted by make_toy: "8gaussians", "spirals", "graded", "power".
RowMatrix make_toy(const std::string& name, std::size_t n, std::uint64_t seed, int d = 4);

}  // namespace mdma
