// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef HMFM_LIKELIHOOD_HPP
#define HMFM_LIKELIHOOD_HPP

#include <vector>

#include "hmfm/types.hpp"

namespace hmfm {

/// One observation: one or more repeated marks sharing a covariate row.
struct Observation {
  std::vector<double> y;
  VectorXd x;  // empty when the dataset has no covariates

  int marks() const { return static_cast<int>(y.size()); }
};

struct GroupedDataset {
  std::vector<std::vector<Observation>> groups;

  GroupedDataset() = default;
  explicit GroupedDataset(std::vector<std::vector<Observation>> g) : groups(std::move(g)) {}

  /// Scalar responses, one mark per observation, no covariates.
  static GroupedDataset from_values(const std::vector<std::vector<double>>& values);

  int d() const { return static_cast<int>(groups.size()); }
  int n(int j) const { return static_cast<int>(groups[j].size()); }
  int total() const;
  VectorXi group_sizes() const;
  /// Start of group j in the flat observation order (group-major).
  std::vector<int> offsets() const;
  int covariate_dim() const;
  bool has_covariates() const { return covariate_dim() > 0; }

  /// Mean of the marks of every observation, flat order.
  std::vector<double> observation_means() const;
  /// All marks pooled, flat order.
  std::vector<double> all_marks() const;

  /// Throws DataError on ragged covariates, empty observations or (when
  /// require_nonempty) empty groups.
  void validate(bool require_nonempty = true) const;
};

/// Normal-Inverse-Gamma prior in the Hoff parametrization:
/// 1/sigma^2 ~ Gamma(nu0/2, rate nu0 sigma0^2/2), mu | sigma^2 ~ N(mu0, sigma^2/k0).
struct NigParams {
  double mu0 = 0.0;
  double k0 = 1.0;
  double nu0 = 4.0;
  double sigma0_sq = 1.0;

  void validate() const;
};

/// Running count, sum and sum of squares.
struct ClusterSuffStats {
  int count = 0;
  double sum = 0.0;
  double sum_sq = 0.0;

  void add(double y) {
    ++count;
    sum += y;
    sum_sq += y * y;
  }
  void remove(double y) {
    --count;
    sum -= y;
    sum_sq -= y * y;
  }
  void add(const ClusterSuffStats& o) {
    count += o.count;
    sum += o.sum;
    sum_sq += o.sum_sq;
  }
  void remove(const ClusterSuffStats& o) {
    count -= o.count;
    sum -= o.sum;
    sum_sq -= o.sum_sq;
  }

  static ClusterSuffStats of(const std::vector<double>& ys);
};

struct RegressionSpec {
  VectorXd beta0;
  MatrixXd sigma_beta0;

  int r() const { return static_cast<int>(beta0.size()); }
  void validate() const;
};

struct NormalComponent {
  double mu = 0.0;
  double sigma_sq = 1.0;
};

/// Per-observation sufficient statistics of the marks, flat order.
std::vector<ClusterSuffStats> observation_stats(const GroupedDataset& data);

NigParams nig_posterior(const ClusterSuffStats& stats, const NigParams& prior);

double log_marginal(const ClusterSuffStats& stats, const NigParams& prior);

NormalComponent nig_draw(const NigParams& post, Rng& rng);

/// Log density of the Student-t posterior predictive of one new value.
double log_predictive(double y, const NigParams& post);

double log_normal_pdf(double y, double mu, double sigma_sq);

/// sum_h log N(y_h | mu, sigma^2) from the marks' sufficient statistics.
double log_normal_stats(const ClusterSuffStats& stats, double mu, double sigma_sq);

/// Data with every mark replaced by y - x' beta_j, together with the original
/// responses so that restore() is exact.
struct ResidualizedData {
  GroupedDataset data;
  GroupedDataset original;
};

ResidualizedData residualize(const GroupedDataset& data, const std::vector<VectorXd>& beta);
GroupedDataset restore(const ResidualizedData& res);

/// Conjugate Gaussian draw of beta_j given cluster-level (mu, sigma^2).
/// allocations are flat (group-major) component indices into components.
VectorXd beta_full_conditional_draw(const GroupedDataset& data, const std::vector<int>& allocations,
                                    const std::vector<NormalComponent>& components,
                                    const RegressionSpec& spec, int j, Rng& rng);

struct CenteredData {
  GroupedDataset data;
  std::vector<double> means;
};

/// Subtracts the per-group mean over all marks.
CenteredData center_groups(const GroupedDataset& data);

}  // namespace hmfm

#endif  // HMFM_LIKELIHOOD_HPP
