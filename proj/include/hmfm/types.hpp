// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef HMFM_TYPES_HPP
#define HMFM_TYPES_HPP

#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hmfm {

using Rng = std::mt19937_64;

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;
using Eigen::VectorXi;

// Failure classes; the CLI maps them onto exit codes 3 and 4.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Prior triple of a vector of finite Dirichlet processes: intensity of the
/// 1-shifted Poisson law on the number of components and one symmetric
/// Dirichlet concentration per group.
struct VecFdpParams {
  double lambda = 1.0;
  VectorXd gamma;

  VecFdpParams() = default;
  VecFdpParams(double lambda_, VectorXd gamma_) : lambda(lambda_), gamma(std::move(gamma_)) {}

  int d() const { return static_cast<int>(gamma.size()); }
  void validate() const;
};

/// Gamma(a_gamma, lambda * b_gamma) on each gamma_j and Gamma(a_lambda, b_lambda)
/// on lambda (shape/rate). With gamma_independent the gamma_j are
/// Gamma(a_gamma, b_gamma) independently of lambda.
struct HyperPriorParams {
  double a_gamma = 1.0;
  double b_gamma = 1.0;
  double a_lambda = 1.0;
  double b_lambda = 1.0;
  bool gamma_independent = false;

  double gamma_rate(double lambda) const { return gamma_independent ? b_gamma : lambda * b_gamma; }

  void validate() const;
};

struct ElicitationSpec {
  double lambda0 = 1.0;
  double v_lambda = 1.0;
  double gamma0 = 1.0;
  int d = 1;

  void validate() const;
};

/// Cluster-by-group occupancy: counts(j, k) observations of group j in global
/// cluster k.
struct GroupCounts {
  MatrixXi counts;  // d x K

  GroupCounts() = default;
  explicit GroupCounts(MatrixXi c) : counts(std::move(c)) {}

  int d() const { return static_cast<int>(counts.rows()); }
  int k() const { return static_cast<int>(counts.cols()); }
  VectorXi group_sizes() const { return counts.rowwise().sum(); }
  void validate() const;
};

}  // namespace hmfm

#endif  // HMFM_TYPES_HPP
