// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef HMFM_CHAIN_HPP
#define HMFM_CHAIN_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hmfm/likelihood.hpp"
#include "hmfm/types.hpp"

namespace hmfm {

enum class Algorithm { kConditional, kMarginal };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

enum class InitPartition { kKMeans, kOneCluster };

struct SamplerConfig {
  int iterations = 1000;
  int burn_in = 500;
  int thin = 1;
  std::uint64_t seed = 1;
  bool prior_only = false;
  InitPartition init = InitPartition::kKMeans;
  int init_clusters = 20;
  double mh_target = 0.44;     // M* and gamma random walks
  double mala_target = 0.574;  // U and gamma Langevin moves
  double adapt_decay = 0.7;
  int max_m_star = 10000;
  bool keep_allocations = true;

  void validate() const;
};

/// Everything that parametrizes the posterior: base measure, hyperprior, the
/// starting (or fixed) process parameters and an optional regression prior.
struct Priors {
  NigParams base;
  HyperPriorParams hyper;
  VecFdpParams init;
  bool fix_lambda = false;
  bool fix_gamma = false;
  std::optional<RegressionSpec> regression;
};

struct IterationRecord {
  int iter = 0;
  int k = 0;
  int m = 0;  // equals k for the marginal sampler
  double lambda = 0.0;
  VectorXd gamma;
  VectorXd u;
  VectorXd log_u;
  std::vector<int> allocations;  // flat, group-major, 0-based cluster labels

  // conditional sampler: all M components
  VectorXd mu;
  VectorXd sigma_sq;
  MatrixXd s;  // d x M
  MatrixXd log_s;

  // marginal sampler: allocated clusters only
  MatrixXi counts;                   // d x K
  std::vector<NigParams> cluster_post;  // per-cluster NIG posterior

  std::vector<VectorXd> beta;
};

struct ChainOutput {
  Algorithm algorithm = Algorithm::kConditional;
  int d = 0;
  NigParams base;
  std::vector<IterationRecord> records;
  double m_acceptance = 0.0;
  VectorXd gamma_acceptance;
  double u_acceptance = 0.0;
  int m_cap_hits = 0;
};

/// Robbins-Monro log-scale adaptation of a proposal size toward a target
/// acceptance rate, with step iter^-decay; frozen once burn-in ends.
class AdaptiveScale {
 public:
  AdaptiveScale() = default;
  AdaptiveScale(double initial, double target, double decay)
      : log_scale_(std::log(initial)), target_(target), decay_(decay) {}

  double scale() const { return std::exp(log_scale_); }
  void update(double accept_prob);
  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  void record(bool accepted) {
    ++proposals_;
    accepted_ += accepted ? 1 : 0;
  }
  double acceptance_rate() const { return proposals_ == 0 ? 0.0 : double(accepted_) / proposals_; }
  void reset_counts() { proposals_ = accepted_ = 0; }

 private:
  double log_scale_ = 0.0;
  double target_ = 0.44;
  double decay_ = 0.7;
  long iter_ = 0;
  long proposals_ = 0;
  long accepted_ = 0;
  bool frozen_ = false;
};

struct LambdaMixture {
  double weight1 = 1.0;
  double shape1 = 1.0;
  double shape2 = 1.0;
  double rate = 1.0;

  double mean() const { return weight1 * shape1 / rate + (1.0 - weight1) * shape2 / rate; }
};

/// Full conditional of lambda given K, u and gamma, with M* integrated out.
LambdaMixture lambda_conditional(int k, double log_psi_bar, const VectorXd& gamma,
                                 const HyperPriorParams& hyper);

double draw_lambda(const LambdaMixture& mix, Rng& rng);

/// Initial flat labels 0..K-1 (k-means on observation means, or one cluster).
std::vector<int> initial_partition(const GroupedDataset& data, const SamplerConfig& config);

/// Relabels flat labels to 0..K-1 by first appearance; returns K.
int canonicalize(std::vector<int>& labels);

}  // namespace hmfm

#endif  // HMFM_CHAIN_HPP
