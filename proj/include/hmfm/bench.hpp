// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef HMFM_BENCH_HPP
#define HMFM_BENCH_HPP

#include <cstdint>
#include <vector>

#include "hmfm/chain.hpp"
#include "hmfm/likelihood.hpp"

namespace hmfm {

struct BenchPoint {
  int n = 0;
  double seconds_per_iter = 0.0;
};

struct BenchResult {
  std::vector<BenchPoint> conditional;
  std::vector<BenchPoint> marginal;
  double slope_conditional = 0.0;
  double slope_marginal = 0.0;
};

/// Two groups of n/2 draws from 0.5 N(-4, 1) + 0.5 N(4, 1).
GroupedDataset bench_dataset(int n, std::uint64_t seed);

/// Least-squares slope of log(y) on log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

BenchResult run_bench(const std::vector<int>& sizes, int iterations, std::uint64_t seed);

}  // namespace hmfm

#endif  // HMFM_BENCH_HPP
