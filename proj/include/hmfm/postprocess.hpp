// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef HMFM_POSTPROCESS_HPP
#define HMFM_POSTPROCESS_HPP

#include <functional>
#include <vector>

#include "hmfm/chain.hpp"

namespace hmfm {

using Partition = std::vector<int>;

/// Posterior co-clustering frequencies; rows and columns follow the flat
/// group-major observation order.
MatrixXd similarity(const std::vector<Partition>& partitions);
MatrixXd similarity(const ChainOutput& chain);
MatrixXd similarity(const std::vector<ChainOutput>& chains);

std::vector<Partition> partitions_of(const ChainOutput& chain);

/// 0/1 co-clustering matrix of a single partition.
MatrixXd coclustering_matrix(const Partition& labels);

struct PartitionEstimate {
  Partition labels;  // contiguous 0..K-1
  int k = 0;

  /// Labels of group j given the group offsets of the dataset.
  Partition group(const std::vector<int>& offsets, int j) const;
};

/// Expected-VI lower bound of a partition against a similarity matrix.
double vi_score(const Partition& labels, const MatrixXd& sim);

/// Visited partition minimizing vi_score; ties go to the first occurrence.
PartitionEstimate min_vi(const std::vector<Partition>& partitions, const MatrixXd& sim);

double ari(const Partition& truth, const Partition& est);

/// (1/n) sum_lk |pi_lk - pi_hat_lk|.
double cce(const MatrixXd& truth, const MatrixXd& sim);

/// 512-point grid over [min - 4 sd, max + 4 sd].
std::vector<double> default_grid(const std::vector<double>& values, int points = 512);

/// Posterior mean of the group-j mixture density on the grid.
std::vector<double> predictive_density(const ChainOutput& chain, int j, const std::vector<double>& grid);
std::vector<double> predictive_density(const std::vector<ChainOutput>& chains, int j,
                                       const std::vector<double>& grid);

double trapezoid(const std::vector<double>& grid, const std::vector<double>& f);

struct PredictiveScore {
  double value = 0.0;
  bool coverage_ok = true;  // true density has < 1e-4 mass outside the grid
};

PredictiveScore predictive_score(const std::function<double(double)>& true_density, const std::vector<double>& est,
                                 const std::vector<double>& grid);

}  // namespace hmfm

#endif  // HMFM_POSTPROCESS_HPP
