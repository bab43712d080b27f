// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "hmfm/chain.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "hmfm/numeric.hpp"

namespace hmfm {

std::string to_string(Algorithm a) {
  return a == Algorithm::kConditional ? "conditional" : "marginal";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "conditional") return Algorithm::kConditional;
  if (s == "marginal") return Algorithm::kMarginal;
  throw std::invalid_argument("unknown algorithm '" + s + "' (expected conditional or marginal)");
}

void SamplerConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) throw std::invalid_argument("burn-in must lie in [0, iterations)");
  if (thin < 1) throw std::invalid_argument("thin must be >= 1");
  if (init_clusters < 1) throw std::invalid_argument("init_clusters must be >= 1");
  if (max_m_star < 1) throw std::invalid_argument("max_m_star must be >= 1");
}

void AdaptiveScale::update(double accept_prob) {
  if (frozen_) return;
  ++iter_;
  const double step = std::pow(static_cast<double>(iter_), -decay_);
  log_scale_ += step * (accept_prob - target_);
  log_scale_ = std::clamp(log_scale_, -30.0, 10.0);
}

LambdaMixture lambda_conditional(int k, double log_psi_bar, const VectorXd& gamma,
                                 const HyperPriorParams& hyper) {
  const double a_star = hyper.a_lambda + (hyper.gamma_independent ? 0.0 : gamma.size() * hyper.a_gamma);
  const double b_star = hyper.b_lambda + (hyper.gamma_independent ? 0.0 : hyper.b_gamma * gamma.sum());
  const double pb = std::exp(log_psi_bar);
  LambdaMixture mix;
  mix.shape1 = a_star + k - 1.0;
  mix.shape2 = a_star + k;
  mix.rate = b_star + 1.0 - pb;
  // weights proportional to K Gamma(a*+K-1)/r^(a*+K-1) and psi_bar Gamma(a*+K)/r^(a*+K)
  const double c1 = k * mix.rate;
  const double c2 = pb * (a_star + k - 1.0);
  mix.weight1 = (k == 0) ? 0.0 : c1 / (c1 + c2);
  return mix;
}

double draw_lambda(const LambdaMixture& mix, Rng& rng) {
  const bool first = draw_uniform(rng) < mix.weight1;
  return draw_gamma(first ? mix.shape1 : mix.shape2, mix.rate, rng);
}

int canonicalize(std::vector<int>& labels) {
  std::unordered_map<int, int> map;
  for (int& c : labels) {
    auto it = map.find(c);
    if (it == map.end()) it = map.emplace(c, static_cast<int>(map.size())).first;
    c = it->second;
  }
  return static_cast<int>(map.size());
}

std::vector<int> initial_partition(const GroupedDataset& data, const SamplerConfig& config) {
  const std::vector<double> y = data.observation_means();
  const int n = static_cast<int>(y.size());
  std::vector<int> labels(n, 0);
  if (config.init == InitPartition::kOneCluster || n == 0) return labels;

  // Lloyd iterations in one dimension, centers seeded at evenly spaced quantiles
  const int k = std::min(config.init_clusters, n);
  std::vector<double> sorted = y;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> centers(k);
  for (int c = 0; c < k; ++c) centers[c] = sorted[static_cast<int>((c + 0.5) * n / k)];
  for (int it = 0; it < 100; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      for (int c = 1; c < k; ++c) {
        if (std::abs(y[i] - centers[c]) < std::abs(y[i] - centers[best])) best = c;
      }
      if (best != labels[i] || it == 0) {
        changed = changed || best != labels[i];
        labels[i] = best;
      }
    }
    std::vector<double> sum(k, 0.0);
    std::vector<int> cnt(k, 0);
    for (int i = 0; i < n; ++i) {
      sum[labels[i]] += y[i];
      ++cnt[labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (cnt[c] > 0) centers[c] = sum[c] / cnt[c];
    }
    if (!changed && it > 0) break;
  }
  canonicalize(labels);
  return labels;
}

}  // namespace hmfm
