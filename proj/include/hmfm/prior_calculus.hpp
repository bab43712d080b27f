// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#ifndef HMFM_PRIOR_CALCULUS_HPP
#define HMFM_PRIOR_CALCULUS_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "hmfm/types.hpp"

namespace hmfm {

// ---------------------------------------------------------------------------
// Laplace kernels of the Gamma(gamma, 1) weight law.
// ---------------------------------------------------------------------------

/// psi(u) = E[exp(-u S)] = (1 + u)^(-gamma).
template <typename Scalar>
Scalar psi(Scalar u, Scalar gamma) {
  if (!(u >= Scalar(0)) || !(gamma > Scalar(0))) {
    throw std::domain_error("psi: requires u >= 0 and gamma > 0");
  }
  using std::exp;
  using std::log1p;
  return exp(-gamma * log1p(u));
}

/// log of kappa(u, n) = E[exp(-u S) S^n] = Gamma(n + gamma) / Gamma(gamma) (1 + u)^-(n + gamma).
template <typename Scalar>
Scalar log_kappa(Scalar u, int n, Scalar gamma) {
  if (!(u >= Scalar(0)) || n < 0 || !(gamma > Scalar(0))) {
    throw std::domain_error("log_kappa: requires u >= 0, n >= 0 and gamma > 0");
  }
  using std::lgamma;
  using std::log1p;
  return lgamma(n + gamma) - lgamma(gamma) - (n + gamma) * log1p(u);
}

/// Product over groups of psi(u_j, gamma_j), in log scale.
double log_psi_bar(const VectorXd& u, const VectorXd& gamma);
/// Same from log u (entries of -inf stand for u = 0).
double log_psi_bar_log_u(const VectorXd& log_u, const VectorXd& gamma);

/// log Psi(k, u) = (k - 1) log(lambda) + log(k + lambda psi_bar) - lambda (1 - psi_bar).
double log_psi_big(int k, const VectorXd& u, const VecFdpParams& params);

// ---------------------------------------------------------------------------
// Central generalized factorial coefficients |C(n, k; -gamma)|.
// ---------------------------------------------------------------------------

/// Triangular table of log|C(n, k; -gamma)| for 0 <= k <= n <= n_max, filled by
///   |C(n+1, k)| = (n + k gamma) |C(n, k)| + gamma |C(n, k-1)|.
/// Structural zeros (k = 0 < n) are stored as -inf.
class GfcTable {
 public:
  GfcTable(int n_max, double gamma);

  int n_max() const { return n_max_; }
  double gamma() const { return gamma_; }

  double log_abs(int n, int k) const;
  double abs(int n, int k) const { return std::exp(log_abs(n, k)); }

 private:
  int n_max_;
  double gamma_;
  std::vector<double> values_;  // row-major triangle

  static std::size_t index(int n, int k) { return static_cast<std::size_t>(n) * (n + 1) / 2 + k; }
};

GfcTable gfc_table(int n_max, double gamma);

// ---------------------------------------------------------------------------
// Partially exchangeable partition probability function.
// ---------------------------------------------------------------------------

struct VIntegral {
  double log_value = 0.0;
  double rel_error = 0.0;  // quadrature estimate (d <= 3) or Monte Carlo relative SE
};

/// log V(K; gamma, lambda) by tensor Gauss-Legendre after x_j = (1 + u_j)^(-gamma_j).
/// Groups with n_j = 0 contribute u_j = 0. Above three integrated groups an
/// importance-sampling estimate with the given number of draws is returned.
VIntegral log_v_integral(const VectorXi& group_sizes, int k, const VecFdpParams& params,
                         int mc_draws = 200000, std::uint64_t mc_seed = 20240601);

/// log pEPPF of a cluster-by-group count configuration. Throws NumericalError
/// when the quadrature error estimate exceeds 1e-8 (d <= 3).
double log_peppf(const GroupCounts& counts, const VecFdpParams& params);

/// Unnormalized log-probability of a partition conditional on the auxiliary
/// vector u: log Psi(K, u) + sum_j sum_k log kappa_j(u_j, n_jk).
double log_partition_given_u(const GroupCounts& counts, const VectorXd& u,
                             const VecFdpParams& params);

// ---------------------------------------------------------------------------
// Prior law of the global number of clusters (one or two groups).
// ---------------------------------------------------------------------------

struct SeriesOptions {
  double rel_tol = 1e-12;
  int max_terms = 100000;
};

/// P(K_(n1, n2) = k). A single group size is treated as (n1, 0). params.d() must
/// equal n.size().
double prior_k(const std::vector<int>& n, const VecFdpParams& params, int k,
               const SeriesOptions& opts = {});

/// Full pmf over k = 1..n1+n2; entry i holds P(K = i + 1).
std::vector<double> prior_k_pmf(const std::vector<int>& n, const VecFdpParams& params,
                                const SeriesOptions& opts = {});

// ---------------------------------------------------------------------------
// Dependence functionals.
// ---------------------------------------------------------------------------

/// P(K_(1,1) = 1) = (1 - e^-lambda) / lambda.
double prob_shared_pair(double lambda);

/// P(K_j,(2) = 1) = (gamma + 1) int_0^1 (1 + lambda x) e^{-lambda (1 - x)} (1 - x^{1/gamma}) dx.
double prob_local_pair(double gamma, double lambda);

/// corr(P_j(A), P_l(A)); independent of A.
double correlation(const VecFdpParams& params, int j, int l);

/// E[P_j(A)^{nj} P_l(A)^{nl}] = sum_k p0A^k P(K_(nj,nl) = k), two-group params.
double mixed_moment(int n_j, int n_l, double p0a, const VecFdpParams& params);

/// cov(P_j(A), P_l(B)) = P(K_(1,1) = 1) (P0(A n B) - P0(A) P0(B)).
double mixed_covariance(double p0a, double p0b, double p0ab, double lambda);

/// Coskewness of P_1(A) over P_2(A) for two-group params.
double coskewness(const VecFdpParams& params, double p0a);

// ---------------------------------------------------------------------------
// Hyperparameter elicitation.
// ---------------------------------------------------------------------------

HyperPriorParams elicit(const ElicitationSpec& spec);

// ---------------------------------------------------------------------------
// Prior simulation.
// ---------------------------------------------------------------------------

struct PriorRealization {
  int m = 0;
  VectorXd atoms;    // M scalar atoms drawn from P0
  MatrixXd weights;  // d x M unnormalized weights S_jm

  /// P_j(A) for A given by an indicator on atoms.
  template <typename Pred>
  double measure(int j, Pred&& in_set) const {
    double num = 0.0;
    for (int m_ = 0; m_ < m; ++m_) {
      if (in_set(atoms(m_))) num += weights(j, m_);
    }
    return num / weights.row(j).sum();
  }
};

using AtomSampler = std::function<double(Rng&)>;

/// M ~ 1 + Poisson(lambda), S_jm ~ Gamma(gamma_j, 1), atoms ~ P0 (standard normal by default).
PriorRealization prior_simulate(const VecFdpParams& params, Rng& rng,
                                const AtomSampler& atom_sampler = {});

}  // namespace hmfm

#endif  // HMFM_PRIOR_CALCULUS_HPP
