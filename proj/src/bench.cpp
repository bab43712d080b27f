// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "hmfm/bench.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "hmfm/conditional_sampler.hpp"
#include "hmfm/experiments.hpp"
#include "hmfm/marginal_sampler.hpp"
#include "hmfm/numeric.hpp"
#include "hmfm/prior_calculus.hpp"

namespace hmfm {

GroupedDataset bench_dataset(int n, std::uint64_t seed) {
  if (n < 2 || n % 2 != 0) throw std::invalid_argument("bench sizes must be even and >= 2");
  Rng rng(seed);
  std::vector<std::vector<double>> y(2);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < n / 2; ++i) {
      const double centre = draw_uniform(rng) < 0.5 ? -4.0 : 4.0;
      y[j].push_back(centre + draw_normal(rng));
    }
  }
  return GroupedDataset::from_values(y);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need two or more points");
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

BenchResult run_bench(const std::vector<int>& sizes, int iterations, std::uint64_t seed) {
  BenchResult res;
  const HyperPriorParams hyper = elicit(ElicitationSpec{5.0, 5.0, 0.5, 2});
  std::vector<double> xs, tc, tm;
  for (int n : sizes) {
    const GroupedDataset data = bench_dataset(n, seed);
    Priors priors;
    priors.base = auto_base_measure(data);
    priors.hyper = hyper;
    priors.init = VecFdpParams(5.0, VectorXd::Constant(2, 0.5));
    SamplerConfig cfg;
    cfg.iterations = iterations;
    cfg.burn_in = 0;
    cfg.seed = seed;
    cfg.keep_allocations = false;

    for (Algorithm algo : {Algorithm::kConditional, Algorithm::kMarginal}) {
      const auto t0 = std::chrono::steady_clock::now();
      if (algo == Algorithm::kConditional) {
        run_conditional(data, cfg, priors);
      } else {
        run_marginal(data, cfg, priors);
      }
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / iterations;
      (algo == Algorithm::kConditional ? res.conditional : res.marginal).push_back({n, sec});
      (algo == Algorithm::kConditional ? tc : tm).push_back(sec);
    }
    xs.push_back(n);
  }
  res.slope_conditional = loglog_slope(xs, tc);
  res.slope_marginal = loglog_slope(xs, tm);
  return res;
}

}  // namespace hmfm
