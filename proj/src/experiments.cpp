// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "hmfm/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>

#include "hmfm/numeric.hpp"

namespace hmfm {

double GaussianMixture::pdf(double y) const {
  double f = 0.0;
  for (std::size_t c = 0; c < weight.size(); ++c) f += weight[c] * std::exp(log_normal_pdf(y, mu[c], var[c]));
  return f;
}

int ExperimentSpec::resolved_n() const {
  if (n > 0) return n;
  switch (id) {
    case 1: return 600;
    case 2: return 200;
    default: return 450;
  }
}

void ExperimentSpec::validate() const {
  if (id < 1 || id > 3) throw std::invalid_argument("experiment id must be 1, 2 or 3");
  const int nn = resolved_n();
  if (n < 0) throw std::invalid_argument("experiment size must be positive");
  if (id != 3 && nn % 2 != 0) throw std::invalid_argument("experiments 1 and 2 need an even total size");
  if (id == 3 && nn % 15 != 0) throw std::invalid_argument("experiment 3 needs a total size divisible by 15");
}

namespace {

void sample_group(const GaussianMixture& mix, int n, Rng& rng, std::vector<Observation>& out, Partition& truth) {
  std::discrete_distribution<int> pick(mix.weight.begin(), mix.weight.end());
  for (int i = 0; i < n; ++i) {
    const int c = pick(rng);
    const double y = mix.mu[c] + std::sqrt(mix.var[c]) * draw_normal(rng);
    out.push_back(Observation{{y}, VectorXd()});
    truth.push_back(mix.label[c]);
  }
}

}  // namespace

ExperimentData generate_experiment(const ExperimentSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const int n = spec.resolved_n();
  ExperimentData out;
  std::vector<int> sizes;

  if (spec.id == 1) {
    out.densities.push_back({{0.5, 0.5}, {-3.0, 0.0}, {0.1, 0.5}, {0, 1}});
    out.densities.push_back({{0.2, 0.8}, {0.0, 1.75}, {0.5, 1.5}, {1, 2}});
    sizes = {n / 2, n / 2};
  } else if (spec.id == 2) {
    out.densities.push_back({{1.0}, {0.0}, {1.0}, {0}});
    out.densities.push_back({{1.0}, {1.0}, {1.0}, {1}});
    sizes = {n / 2, n / 2};
  } else {
    const double mus[3] = {-3.0, 0.0, 1.0};
    // non-empty subsets of size two or three, chosen uniformly
    const std::vector<std::vector<int>> subsets = {{0, 1}, {0, 2}, {1, 2}, {0, 1, 2}};
    std::uniform_int_distribution<int> k_pick(2, 3);
    std::uniform_int_distribution<int> pair_pick(0, 2);
    for (int j = 0; j < 12; ++j) {
      const int kj = k_pick(rng);
      const std::vector<int>& comps = kj == 3 ? subsets[3] : subsets[pair_pick(rng)];
      const bool has_middle = std::find(comps.begin(), comps.end(), 1) != comps.end();
      const double middle_w = kj == 3 ? 0.5 : 2.0 / 3.0;
      GaussianMixture mix;
      for (int c : comps) {
        double w = 1.0 / kj;
        if (has_middle) w = c == 1 ? middle_w : (1.0 - middle_w) / (kj - 1);
        mix.weight.push_back(w);
        mix.mu.push_back(mus[c]);
        mix.var.push_back(0.5);
        mix.label.push_back(c);
      }
      out.densities.push_back(mix);
    }
    for (int j = 12; j < 15; ++j) out.densities.push_back({{0.5, 0.5}, {-1.5, 1.5}, {0.5, 0.5}, {3, 4}});
    sizes.assign(15, n / 15);
  }

  out.data.groups.resize(sizes.size());
  for (std::size_t j = 0; j < sizes.size(); ++j) sample_group(out.densities[j], sizes[j], rng, out.data.groups[j], out.truth);
  out.true_k = static_cast<int>(std::set<int>(out.truth.begin(), out.truth.end()).size());
  return out;
}

NigParams auto_base_measure(const GroupedDataset& data, double sigma0_sq) {
  const std::vector<double> y = data.all_marks();
  if (y.empty()) throw DataError("auto base measure needs data");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  const double range = *hi - *lo;
  NigParams p;
  p.mu0 = std::accumulate(y.begin(), y.end(), 0.0) / y.size();
  p.k0 = range > 0.0 ? 1.0 / (range * range) : 1.0;
  p.nu0 = 4.0;
  p.sigma0_sq = sigma0_sq;
  return p;
}

}  // namespace hmfm
