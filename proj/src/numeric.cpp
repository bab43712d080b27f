// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "hmfm/numeric.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace hmfm {

double log_sum_exp(const std::vector<double>& x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  return mx + std::log(s);
}

namespace {

QuadratureRule build_gauss_legendre(int n) {
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    rule.nodes[i] = 0.5 * (1.0 - x);
    rule.weights[i] = 1.0 / ((1.0 - x * x) * dp * dp);
  }
  return rule;
}

}  // namespace

const QuadratureRule& gauss_legendre_unit(int n) {
  if (n < 1) throw std::domain_error("gauss_legendre_unit: n must be >= 1");
  static std::mutex mu;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, build_gauss_legendre(n)).first;
  return it->second;
}

int sample_log_categorical(std::vector<double>& log_w, Rng& rng) {
  const double mx = *std::max_element(log_w.begin(), log_w.end());
  if (!std::isfinite(mx)) throw NumericalError("sample_log_categorical: no finite weight");
  double total = 0.0;
  for (double& v : log_w) {
    v = std::exp(v - mx);
    total += v;
  }
  double r = draw_uniform(rng) * total;
  const int n = static_cast<int>(log_w.size());
  for (int i = 0; i < n; ++i) {
    r -= log_w[i];
    if (r < 0.0) return i;
  }
  for (int i = n - 1; i >= 0; --i) {
    if (log_w[i] > 0.0) return i;
  }
  return n - 1;
}

double draw_log_gamma(double shape, Rng& rng) {
  if (shape < 1.0) {
    std::gamma_distribution<double> g(shape + 1.0, 1.0);
    return std::log(g(rng)) + std::log(draw_uniform(rng)) / shape;
  }
  std::gamma_distribution<double> g(shape, 1.0);
  return std::log(g(rng));
}

double draw_gamma(double shape, double rate, Rng& rng) {
  double x = 0.0;
  if (shape < 1.0) {
    // G(a) = G(a + 1) U^(1/a), evaluated in log scale so that tiny shapes do not underflow early
    std::gamma_distribution<double> g(shape + 1.0, 1.0);
    const double lx = std::log(g(rng)) + std::log(draw_uniform(rng)) / shape;
    x = std::exp(lx);
  } else {
    std::gamma_distribution<double> g(shape, 1.0);
    x = g(rng);
  }
  if (x <= 0.0) x = std::numeric_limits<double>::min();
  return x / rate;
}

double draw_uniform(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double draw_normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace hmfm
