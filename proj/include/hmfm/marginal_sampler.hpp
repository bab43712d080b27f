// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef HMFM_MARGINAL_SAMPLER_HPP
#define HMFM_MARGINAL_SAMPLER_HPP

#include <vector>

#include "hmfm/chain.hpp"
#include "hmfm/likelihood.hpp"

namespace hmfm {

struct FranchiseCluster {
  VectorXi n;  // per-group counts, may contain zeros
  int total = 0;
  ClusterSuffStats stats;
  double log_ml = 0.0;  // cached log_marginal(stats)
};

struct FranchiseState {
  std::vector<int> c;  // flat, group-major, 0..K-1
  std::vector<int> group_of;
  std::vector<FranchiseCluster> clusters;
  VectorXd log_u;  // -inf for groups without observations
  VectorXd gamma;
  double lambda = 1.0;
  std::vector<VectorXd> beta;

  AdaptiveScale u_scale;
  AdaptiveScale gamma_scale;

  int d() const { return static_cast<int>(gamma.size()); }
  int k() const { return static_cast<int>(clusters.size()); }
  VectorXi group_sizes() const;
  GroupCounts counts() const;
  /// Throws std::logic_error if counts or cached statistics disagree with a
  /// recomputation from the allocations (statistics at tolerance tol).
  void check_invariants(const std::vector<ClusterSuffStats>& obs, double tol = 1e-8) const;
};

FranchiseState init_marginal(const GroupedDataset& data, const SamplerConfig& config, const Priors& priors,
                             const std::vector<ClusterSuffStats>& obs, Rng& rng);

/// Rebuilds per-cluster counts and statistics from the allocations.
void rebuild_clusters(FranchiseState& st, const std::vector<ClusterSuffStats>& obs, const NigParams& base,
                      bool prior_only);

/// Removes flat observation i and reassigns it from the predictive law.
void reassign_observation(FranchiseState& st, const std::vector<ClusterSuffStats>& obs, int i,
                          const NigParams& base, bool prior_only, Rng& rng);

struct LogDensityGrad {
  double value = 0.0;
  VectorXd grad;
};

/// Log full conditional of v = log u (Jacobian included) and its gradient.
/// Groups without observations hold u_j = 0 and contribute nothing.
LogDensityGrad log_u_target(const VectorXd& v, const GroupCounts& counts, double lambda, const VectorXd& gamma);

/// Log full conditional of w = log gamma (Jacobian included) and its gradient.
LogDensityGrad log_gamma_target(const VectorXd& w, const GroupCounts& counts, double lambda, const VectorXd& log_u,
                                const HyperPriorParams& hyper);

void step_u_mala(FranchiseState& st, Rng& rng);
void step_gamma_mala(FranchiseState& st, const HyperPriorParams& hyper, Rng& rng);
void step_lambda(FranchiseState& st, const HyperPriorParams& hyper, Rng& rng);

ChainOutput run_marginal(const GroupedDataset& data, const SamplerConfig& config, const Priors& priors);

}  // namespace hmfm

#endif  // HMFM_MARGINAL_SAMPLER_HPP
