// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef HMFM_EXPERIMENTS_HPP
#define HMFM_EXPERIMENTS_HPP

#include <cstdint>
#include <vector>

#include "hmfm/chain.hpp"
#include "hmfm/likelihood.hpp"
#include "hmfm/postprocess.hpp"

namespace hmfm {

/// Univariate Gaussian mixture; var holds variances. label[c] is the global
/// truth label of component c.
struct GaussianMixture {
  std::vector<double> weight;
  std::vector<double> mu;
  std::vector<double> var;
  std::vector<int> label;

  double pdf(double y) const;
};

struct ExperimentSpec {
  int id = 1;
  int n = 0;  // total sample size; 0 selects the design default
  std::uint64_t seed = 1;

  int resolved_n() const;
  void validate() const;
};

struct ExperimentData {
  GroupedDataset data;
  Partition truth;  // flat global labels
  std::vector<GaussianMixture> densities;  // one per group
  int true_k = 0;
};

ExperimentData generate_experiment(const ExperimentSpec& spec);

/// mu0 = mean of all marks, k0 = 1/range^2, nu0 = 4 and the given sigma0^2.
NigParams auto_base_measure(const GroupedDataset& data, double sigma0_sq = 0.5);

}  // namespace hmfm

#endif  // HMFM_EXPERIMENTS_HPP
