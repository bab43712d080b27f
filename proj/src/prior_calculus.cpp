// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "hmfm/prior_calculus.hpp"

#include <algorithm>
#include <numbers>
#include <string>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "hmfm/numeric.hpp"

namespace hmfm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void require(bool cond, const char* what) {
  if (!cond) throw std::domain_error(what);
}

}  // namespace

// ---------------------------------------------------------------------------

void VecFdpParams::validate() const {
  require(gamma.size() >= 1, "VecFdpParams: d must be >= 1");
  require(lambda > 0.0 && std::isfinite(lambda), "VecFdpParams: lambda must be > 0");
  for (Eigen::Index j = 0; j < gamma.size(); ++j) {
    require(gamma(j) > 0.0 && std::isfinite(gamma(j)), "VecFdpParams: every gamma_j must be > 0");
  }
}

void HyperPriorParams::validate() const {
  require(a_gamma > 0 && b_gamma > 0 && a_lambda > 0 && b_lambda > 0,
          "HyperPriorParams: all parameters must be > 0");
}

void ElicitationSpec::validate() const {
  require(lambda0 > 0 && v_lambda > 0 && gamma0 > 0 && d >= 1,
          "ElicitationSpec: all inputs must be > 0");
}

void GroupCounts::validate() const {
  require(counts.rows() >= 1, "GroupCounts: d must be >= 1");
  require((counts.array() >= 0).all(), "GroupCounts: counts must be non-negative");
  for (Eigen::Index k = 0; k < counts.cols(); ++k) {
    require(counts.col(k).sum() >= 1, "GroupCounts: every cluster needs at least one member");
  }
}

// ---------------------------------------------------------------------------

double log_psi_bar(const VectorXd& u, const VectorXd& gamma) {
  require(u.size() == gamma.size(), "log_psi_bar: u and gamma differ in length");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    require(u(j) >= 0.0, "log_psi_bar: u must be non-negative");
    acc -= gamma(j) * std::log1p(u(j));
  }
  return acc;
}

double log_psi_bar_log_u(const VectorXd& log_u, const VectorXd& gamma) {
  require(log_u.size() == gamma.size(), "log_psi_bar_log_u: u and gamma differ in length");
  double acc = 0.0;
  for (Eigen::Index j = 0; j < log_u.size(); ++j) acc -= gamma(j) * softplus(log_u(j));
  return acc;
}

double log_psi_big(int k, const VectorXd& u, const VecFdpParams& params) {
  require(k >= 0, "log_psi_big: k must be >= 0");
  const double pb = std::exp(log_psi_bar(u, params.gamma));
  const double lam = params.lambda;
  return (k - 1) * std::log(lam) + std::log(k + lam * pb) - lam * (1.0 - pb);
}

// ---------------------------------------------------------------------------

GfcTable::GfcTable(int n_max, double gamma) : n_max_(n_max), gamma_(gamma) {
  require(n_max >= 0, "gfc_table: n_max must be >= 0");
  require(gamma > 0.0, "gfc_table: gamma must be > 0");
  values_.assign(index(n_max + 1, 0), kNegInf);
  values_[index(0, 0)] = 0.0;
  const double log_gamma = std::log(gamma);
  for (int n = 0; n < n_max; ++n) {
    for (int k = 1; k <= n + 1; ++k) {
      double stay = kNegInf;
      if (k <= n) stay = std::log(n + k * gamma) + values_[index(n, k)];
      const double grow = log_gamma + values_[index(n, k - 1)];
      values_[index(n + 1, k)] = log_add_exp(stay, grow);
    }
  }
}

double GfcTable::log_abs(int n, int k) const {
  if (n < 0 || n > n_max_ || k < 0) throw std::out_of_range("GfcTable: index out of range");
  if (k > n) return kNegInf;
  return values_[index(n, k)];
}

GfcTable gfc_table(int n_max, double gamma) { return GfcTable(n_max, gamma); }

// ---------------------------------------------------------------------------

namespace {

// Integrand of V(K) in the x-coordinates, without the constant prefactor.
// Each x_j is written as s_j^m_j so that x_j^(1/gamma_j) is smooth at 0.
struct VIntegrand {
  int k;
  double lambda;
  std::vector<int> n;  // sizes of integrated groups
  std::vector<double> inv_gamma;
  std::vector<int> power;

  double operator()(const double* s) const {
    double prod_x = 1.0;
    double local = 1.0;
    for (std::size_t j = 0; j < n.size(); ++j) {
      const double log_s = std::log(s[j]);
      const double x = std::exp(power[j] * log_s);
      prod_x *= x;
      const double one_minus = -std::expm1(power[j] * log_s * inv_gamma[j]);
      local *= std::pow(one_minus, n[j] - 1) * power[j] * std::exp((power[j] * k - 1) * log_s);
    }
    return (k + lambda * prod_x) * std::exp(-lambda * (1.0 - prod_x)) * local;
  }
};

double tensor_gauss_legendre(const VIntegrand& f, int nodes) {
  const auto& rule = gauss_legendre_unit(nodes);
  const std::size_t dim = f.n.size();
  if (dim == 0) {
    return f(nullptr);
  }
  std::vector<int> idx(dim, 0);
  std::vector<double> x(dim);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (std::size_t j = 0; j < dim; ++j) {
      x[j] = rule.nodes[idx[j]];
      w *= rule.weights[idx[j]];
    }
    total += w * f(x.data());
    std::size_t j = 0;
    while (j < dim && ++idx[j] == nodes) {
      idx[j] = 0;
      ++j;
    }
    if (j == dim) break;
  }
  return total;
}

}  // namespace

VIntegral log_v_integral(const VectorXi& group_sizes, int k, const VecFdpParams& params,
                         int mc_draws, std::uint64_t mc_seed) {
  params.validate();
  require(group_sizes.size() == params.d(), "log_v_integral: group sizes and params differ in d");
  require(k >= 1, "log_v_integral: K must be >= 1");

  VIntegrand f{k, params.lambda, {}, {}, {}};
  double log_const = (k - 1) * std::log(params.lambda);
  std::vector<double> active_gamma;
  for (int j = 0; j < params.d(); ++j) {
    const int nj = group_sizes(j);
    require(nj >= 0, "log_v_integral: negative group size");
    if (nj == 0) continue;
    f.n.push_back(nj);
    f.inv_gamma.push_back(1.0 / params.gamma(j));
    f.power.push_back(std::max(1, static_cast<int>(std::ceil(6.0 * params.gamma(j)))));
    active_gamma.push_back(params.gamma(j));
    log_const -= std::log(params.gamma(j)) + std::lgamma(static_cast<double>(nj));
  }

  if (f.n.size() <= 3) {
    const double fine = tensor_gauss_legendre(f, 128);
    const double coarse = tensor_gauss_legendre(f, 64);
    if (!(fine > 0.0)) throw NumericalError("log_v_integral: non-positive quadrature value");
    return {log_const + std::log(fine), std::abs(fine - coarse) / fine};
  }

  // Importance sampling: with B_j ~ Beta(n_j, K gamma_j) and u_j = B_j / (1 - B_j),
  // V = prod_j Gamma(K gamma_j) / Gamma(n_j + K gamma_j) * E[Psi(K, u)].
  Rng rng(mc_seed);
  double log_norm = 0.0;
  std::vector<std::gamma_distribution<double>> ga, gb;
  for (std::size_t j = 0; j < f.n.size(); ++j) {
    const double shape_b = k * active_gamma[j];
    log_norm += std::lgamma(shape_b) - std::lgamma(f.n[j] + shape_b);
    ga.emplace_back(static_cast<double>(f.n[j]), 1.0);
    gb.emplace_back(shape_b, 1.0);
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int t = 0; t < mc_draws; ++t) {
    double log_pb = 0.0;
    for (std::size_t j = 0; j < f.n.size(); ++j) {
      const double a = ga[j](rng);
      const double b = gb[j](rng);
      // log(1 - B) = log(b / (a + b))
      log_pb += active_gamma[j] * (std::log(b) - std::log(a + b));
    }
    const double pb = std::exp(log_pb);
    const double val = (k + params.lambda * pb) * std::exp(-params.lambda * (1.0 - pb));
    sum += val;
    sum_sq += val * val;
  }
  const double mean = sum / mc_draws;
  const double var = std::max(0.0, sum_sq / mc_draws - mean * mean);
  const double se = std::sqrt(var / mc_draws);
  return {(k - 1) * std::log(params.lambda) + log_norm + std::log(mean), se / mean};
}

double log_peppf(const GroupCounts& counts, const VecFdpParams& params) {
  counts.validate();
  params.validate();
  require(counts.d() == params.d(), "log_peppf: counts and params differ in d");
  const int k = counts.k();
  const VectorXi sizes = counts.group_sizes();
  require(sizes.sum() >= 1, "log_peppf: empty sample");

  const VIntegral v = log_v_integral(sizes, k, params);
  int integrated = 0;
  for (int j = 0; j < sizes.size(); ++j) integrated += sizes(j) > 0 ? 1 : 0;
  if (integrated <= 3 && v.rel_error > 1e-8) {
    throw NumericalError("log_peppf: quadrature did not converge (relative error " +
                         std::to_string(v.rel_error) + ")");
  }
  double acc = v.log_value;
  for (int j = 0; j < counts.d(); ++j) {
    const double g = params.gamma(j);
    for (int c = 0; c < k; ++c) acc += std::lgamma(counts.counts(j, c) + g) - std::lgamma(g);
  }
  return acc;
}

double log_partition_given_u(const GroupCounts& counts, const VectorXd& u,
                             const VecFdpParams& params) {
  double acc = log_psi_big(counts.k(), u, params);
  for (int j = 0; j < counts.d(); ++j) {
    for (int c = 0; c < counts.k(); ++c) acc += log_kappa(u(j), counts.counts(j, c), params.gamma(j));
  }
  return acc;
}

// ---------------------------------------------------------------------------

namespace {

struct TwoGroupSetup {
  int n1 = 0;
  int n2 = 0;
  double g1 = 1.0;
  double g2 = 1.0;
};

TwoGroupSetup two_group_setup(const std::vector<int>& n, const VecFdpParams& params) {
  params.validate();
  require(n.size() == 1 || n.size() == 2, "prior_k: supports one or two groups");
  require(static_cast<int>(n.size()) == params.d(), "prior_k: params.d() must equal n.size()");
  TwoGroupSetup s;
  s.n1 = n[0];
  s.g1 = params.gamma(0);
  if (n.size() == 2) {
    s.n2 = n[1];
    s.g2 = params.gamma(1);
  }
  require(s.n1 >= 0 && s.n2 >= 0 && s.n1 + s.n2 >= 1, "prior_k: invalid group sizes");
  return s;
}

// log of sum_{r1, r2} (K-r1)!(K-r2)! / (r1! r2! (K-r1-r2)!) |C(n1, K-r1)| |C(n2, K-r2)|
double log_composition_sum(int k, const TwoGroupSetup& s, const GfcTable& t1, const GfcTable& t2) {
  double acc = kNegInf;
  for (int r1 = 0; r1 <= k; ++r1) {
    const int k1 = k - r1;
    if (k1 > s.n1) continue;
    const double c1 = t1.log_abs(s.n1, k1);
    if (c1 == kNegInf) continue;
    for (int r2 = 0; r2 <= k - r1; ++r2) {
      const int k2 = k - r2;
      if (k2 > s.n2) continue;
      const double c2 = t2.log_abs(s.n2, k2);
      if (c2 == kNegInf) continue;
      const double comb = std::lgamma(k1 + 1.0) + std::lgamma(k2 + 1.0) - std::lgamma(r1 + 1.0) -
                          std::lgamma(r2 + 1.0) - std::lgamma(k - r1 - r2 + 1.0);
      acc = log_add_exp(acc, comb + c1 + c2);
    }
  }
  return acc;
}

// log of sum_m (m+K) e^-lambda lambda^(m+K-1) / m! prod_j Gamma(g_j (m+K)) / Gamma(g_j (m+K) + n_j)
double log_outer_series(int k, const TwoGroupSetup& s, double lambda, const SeriesOptions& opts) {
  const double log_lambda = std::log(lambda);
  auto term = [&](int m) {
    const double mk = m + k;
    double t = std::log(mk) - lambda + (mk - 1.0) * log_lambda - std::lgamma(m + 1.0);
    t += std::lgamma(s.g1 * mk) - std::lgamma(s.g1 * mk + s.n1);
    t += std::lgamma(s.g2 * mk) - std::lgamma(s.g2 * mk + s.n2);
    return t;
  };
  double acc = kNegInf;
  double prev = kNegInf;
  const double log_tol = std::log(opts.rel_tol);
  for (int m = 0; m < opts.max_terms; ++m) {
    const double t = term(m);
    acc = log_add_exp(acc, t);
    if (m > 0 && t < prev && t - acc < log_tol) return acc;
    prev = t;
  }
  throw NumericalError("prior_k: series truncation not reached within the term cap");
}

}  // namespace

std::vector<double> prior_k_pmf(const std::vector<int>& n, const VecFdpParams& params,
                                const SeriesOptions& opts) {
  const TwoGroupSetup s = two_group_setup(n, params);
  const GfcTable t1(s.n1, s.g1);
  const GfcTable t2(s.n2, s.g2);
  std::vector<double> pmf(static_cast<std::size_t>(s.n1 + s.n2), 0.0);
  for (int k = 1; k <= s.n1 + s.n2; ++k) {
    const double comp = log_composition_sum(k, s, t1, t2);
    if (comp == kNegInf) continue;
    pmf[k - 1] = std::exp(comp + log_outer_series(k, s, params.lambda, opts));
  }
  return pmf;
}

double prior_k(const std::vector<int>& n, const VecFdpParams& params, int k,
               const SeriesOptions& opts) {
  const TwoGroupSetup s = two_group_setup(n, params);
  require(k >= 1 && k <= s.n1 + s.n2, "prior_k: k must lie in 1..n1+n2");
  const GfcTable t1(s.n1, s.g1);
  const GfcTable t2(s.n2, s.g2);
  const double comp = log_composition_sum(k, s, t1, t2);
  if (comp == kNegInf) return 0.0;
  return std::exp(comp + log_outer_series(k, s, params.lambda, opts));
}

// ---------------------------------------------------------------------------

double prob_shared_pair(double lambda) {
  require(lambda > 0.0, "prob_shared_pair: lambda must be > 0");
  return -std::expm1(-lambda) / lambda;
}

double prob_local_pair(double gamma, double lambda) {
  require(gamma > 0.0 && lambda > 0.0, "prob_local_pair: gamma and lambda must be > 0");
  const double inv_gamma = 1.0 / gamma;
  auto integrand = [&](double x) {
    if (x <= 0.0) return std::exp(-lambda);
    const double one_minus = -std::expm1(std::log(x) * inv_gamma);
    return (1.0 + lambda * x) * std::exp(-lambda * (1.0 - x)) * one_minus;
  };
  boost::math::quadrature::tanh_sinh<double> integrator(15);
  double err = 0.0;
  double l1 = 0.0;
  const double value = integrator.integrate(integrand, 0.0, 1.0, 1e-13, &err, &l1);
  if (!(value > 0.0) || err > 1e-8 * l1) {
    throw NumericalError("prob_local_pair: adaptive quadrature failed to converge");
  }
  return (gamma + 1.0) * value;
}

double correlation(const VecFdpParams& params, int j, int l) {
  params.validate();
  require(j != l, "correlation: requires two distinct groups");
  require(j >= 0 && l >= 0 && j < params.d() && l < params.d(), "correlation: group index out of range");
  const double num = prob_shared_pair(params.lambda);
  const double den = std::sqrt(prob_local_pair(params.gamma(j), params.lambda) *
                               prob_local_pair(params.gamma(l), params.lambda));
  return num / den;
}

double mixed_moment(int n_j, int n_l, double p0a, const VecFdpParams& params) {
  require(params.d() == 2, "mixed_moment: two-group params required");
  require(n_j >= 0 && n_l >= 0 && n_j + n_l >= 1, "mixed_moment: n_j + n_l must be >= 1");
  require(p0a >= 0.0 && p0a <= 1.0, "mixed_moment: p0A must be a probability");
  const std::vector<double> pmf = prior_k_pmf({n_j, n_l}, params);
  double acc = 0.0;
  double pw = 1.0;
  for (double p : pmf) {
    pw *= p0a;
    acc += pw * p;
  }
  return acc;
}

double mixed_covariance(double p0a, double p0b, double p0ab, double lambda) {
  return prob_shared_pair(lambda) * (p0ab - p0a * p0b);
}

double coskewness(const VecFdpParams& params, double p0a) {
  require(params.d() == 2, "coskewness: two-group params required");
  require(p0a > 0.0 && p0a < 1.0, "coskewness: p0A must lie in (0, 1)");
  const double p = p0a;
  const double ex2y = mixed_moment(2, 1, p, params);
  const double ex2 = mixed_moment(2, 0, p, params);
  const double exy = mixed_moment(1, 1, p, params);
  const double third = ex2y - p * ex2 - 2.0 * p * exy + 2.0 * p * p * p;
  const double var_x = prior_k({2, 0}, params, 1) * p * (1.0 - p);
  const double var_y = prior_k({0, 2}, params, 1) * p * (1.0 - p);
  return third / (var_x * std::sqrt(var_y));
}

// ---------------------------------------------------------------------------

HyperPriorParams elicit(const ElicitationSpec& spec) {
  spec.validate();
  HyperPriorParams h;
  h.a_lambda = spec.lambda0 * spec.lambda0 / spec.v_lambda;
  h.b_lambda = spec.lambda0 / spec.v_lambda;
  h.a_gamma = h.a_lambda / spec.d;
  h.b_gamma = h.a_gamma / (spec.gamma0 * spec.lambda0);
  return h;
}

PriorRealization prior_simulate(const VecFdpParams& params, Rng& rng, const AtomSampler& atom_sampler) {
  params.validate();
  PriorRealization out;
  std::poisson_distribution<int> pois(params.lambda);
  out.m = 1 + pois(rng);
  out.atoms.resize(out.m);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  for (int m = 0; m < out.m; ++m) out.atoms(m) = atom_sampler ? atom_sampler(rng) : std_normal(rng);
  out.weights.resize(params.d(), out.m);
  for (int j = 0; j < params.d(); ++j) {
    std::gamma_distribution<double> ga(params.gamma(j), 1.0);
    for (int m = 0; m < out.m; ++m) out.weights(j, m) = ga(rng);
  }
  return out;
}

}  // namespace hmfm
