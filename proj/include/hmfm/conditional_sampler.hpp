// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef HMFM_CONDITIONAL_SAMPLER_HPP
#define HMFM_CONDITIONAL_SAMPLER_HPP

#include <vector>

#include "hmfm/chain.hpp"
#include "hmfm/likelihood.hpp"

namespace hmfm {

/// Blocked Gibbs state. Components 0..K-1 are allocated, K..M-1 are not.
struct ConditionalState {
  std::vector<int> c;  // flat, group-major
  std::vector<int> group_of;
  int m = 1;
  int k = 1;
  VectorXd mu;
  VectorXd sigma_sq;
  MatrixXd log_s;  // d x M, log S_{j,m}
  VectorXd log_u;  // -inf for groups without observations
  double lambda = 1.0;
  VectorXd gamma;
  std::vector<VectorXd> beta;

  AdaptiveScale m_scale;
  std::vector<AdaptiveScale> gamma_scale;
  int m_cap_hits = 0;

  int d() const { return static_cast<int>(gamma.size()); }
  /// n_{j,m} over all M components.
  MatrixXi counts() const;
  VectorXi group_sizes() const;
  void check_invariants() const;
};

ConditionalState init_conditional(const GroupedDataset& data, const SamplerConfig& config,
                                  const Priors& priors, Rng& rng);

void step_allocations(ConditionalState& st, const std::vector<ClusterSuffStats>& obs,
                      bool prior_only, Rng& rng);
void step_tau(ConditionalState& st, const std::vector<ClusterSuffStats>& obs, const NigParams& base,
              bool prior_only, Rng& rng);
void step_s(ConditionalState& st, Rng& rng);
void step_lambda(ConditionalState& st, const HyperPriorParams& hyper, Rng& rng);
/// Draws M* from its law given (K, u, lambda), then the non-allocated weights and atoms.
void refresh_nonallocated(ConditionalState& st, const NigParams& base, Rng& rng);
void step_u(ConditionalState& st, Rng& rng);
void step_m(ConditionalState& st, const SamplerConfig& config, Rng& rng);
void step_gamma(ConditionalState& st, const HyperPriorParams& hyper, Rng& rng);
/// Redraws (u, S) from their law given (c, M, gamma) and the non-allocated atoms from P0.
void complete_weights(ConditionalState& st, const NigParams& base, Rng& rng);

/// Unnormalized log target of M* used by step_m.
double log_m_star_target(int m_star, int k, double lambda, const VectorXd& gamma, const VectorXi& n);

ChainOutput run_conditional(const GroupedDataset& data, const SamplerConfig& config, const Priors& priors);

}  // namespace hmfm

#endif  // HMFM_CONDITIONAL_SAMPLER_HPP
