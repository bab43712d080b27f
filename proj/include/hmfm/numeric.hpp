// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef HMFM_NUMERIC_HPP
#define HMFM_NUMERIC_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "hmfm/types.hpp"

namespace hmfm {

/// log(exp(a) + exp(b)) without overflow; -inf operands are absorbing-neutral.
inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

/// log(1 + exp(x)) without overflow.
inline double softplus(double x) { return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double log_sum_exp(const std::vector<double>& x);

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule mapped to (0, 1). Rules are computed once and cached.
const QuadratureRule& gauss_legendre_unit(int n);

/// Draw an index with probability proportional to exp(log_w[i]). The vector is
/// overwritten with normalized probabilities.
int sample_log_categorical(std::vector<double>& log_w, Rng& rng);

/// Gamma(shape, rate) draw.
double draw_gamma(double shape, double rate, Rng& rng);

/// log of a Gamma(shape, 1) draw; finite even when the draw itself underflows.
double draw_log_gamma(double shape, Rng& rng);

double draw_uniform(Rng& rng);

double draw_normal(Rng& rng);

}  // namespace hmfm

#endif  // HMFM_NUMERIC_HPP
