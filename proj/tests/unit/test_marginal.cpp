// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include <doctest.h>

#include "hmfm/conditional_sampler.hpp"
#include "hmfm/experiments.hpp"
#include "hmfm/io.hpp"
#include "hmfm/marginal_sampler.hpp"
#include "hmfm/numeric.hpp"
#include "hmfm/prior_calculus.hpp"
#include "oracles.hpp"

using namespace hmfm;

namespace {

FranchiseState make_state(const std::vector<int>& group_sizes, const std::vector<int>& labels,
                          const std::vector<ClusterSuffStats>& obs, double lambda, const VectorXd& gamma,
                          const VectorXd& u, const NigParams& base, bool prior_only) {
  FranchiseState st;
  for (std::size_t j = 0; j < group_sizes.size(); ++j) st.group_of.insert(st.group_of.end(), group_sizes[j], int(j));
  st.c = labels;
  st.gamma = gamma;
  st.lambda = lambda;
  st.log_u = u.array().log();
  st.u_scale = AdaptiveScale(0.5, 0.574, 0.7);
  st.gamma_scale = AdaptiveScale(0.2, 0.574, 0.7);
  rebuild_clusters(st, obs, base, prior_only);
  return st;
}

Priors fixed_priors(int d, double lambda, double gamma) {
  Priors p;
  p.base = NigParams{0.0, 0.1, 4.0, 1.0};
  p.init = VecFdpParams(lambda, VectorXd::Constant(d, gamma));
  p.fix_lambda = true;
  p.fix_gamma = true;
  return p;
}

double max_rel_error(const VectorXd& a, const VectorXd& b) {
  double e = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a(i) - b(i)) / std::max(1.0, std::abs(b(i))));
  return e;
}

}  // namespace

TEST_SUITE("sampler_marginal") {

TEST_CASE("a lone observation always opens cluster one") {
  Rng rng(1);
  const NigParams base{};
  const auto obs = observation_stats(GroupedDataset::from_values({{0.7}}));
  FranchiseState st = make_state({1}, {0}, obs, 2.0, VectorXd::Ones(1), VectorXd::Zero(1), base, false);
  for (int r = 0; r < 20; ++r) {
    reassign_observation(st, obs, 0, base, false, rng);
    CHECK(st.k() == 1);
    CHECK(st.c[0] == 0);
  }
}

TEST_CASE("new-cluster weight at u = 0") {
  // One other observation sits alone in a cluster: existing weight 1 + g,
  // new weight g L (2 + L) / (1 + L) under a flat likelihood.
  Rng rng(2);
  const NigParams base{};
  const double g = 0.6, lambda = 1.7;
  const auto obs = observation_stats(GroupedDataset::from_values({{0.0, 0.0}}));
  const double w_new = g * lambda * (2.0 + lambda) / (1.0 + lambda);
  const double p_new = w_new / (w_new + 1.0 + g);
  const int draws = 100000;
  int opened = 0;
  for (int r = 0; r < draws; ++r) {
    FranchiseState st =
        make_state({2}, {0, 0}, obs, lambda, VectorXd::Constant(1, g), VectorXd::Zero(1), base, true);
    reassign_observation(st, obs, 1, base, true, rng);
    opened += st.k() == 2;
  }
  CHECK(std::abs(double(opened) / draws - p_new) < 4.0 * std::sqrt(p_new * (1 - p_new) / draws));
}

TEST_CASE("reassignment targets the partition law given u") {
  Rng rng(3);
  const NigParams base{};
  const std::vector<int> n{2, 2};
  const VectorXd g = (VectorXd(2) << 0.8, 1.5).finished();
  const VectorXd u = (VectorXd(2) << 0.7, 2.0).finished();
  const double lambda = 2.5;
  const auto obs = observation_stats(GroupedDataset::from_values({{0.0, 0.0}, {0.0, 0.0}}));
  FranchiseState st = make_state(n, {0, 0, 0, 0}, obs, lambda, g, u, base, true);
  const auto exact = oracle::partition_law_given_u(n, lambda, g, u);
  std::map<std::vector<int>, double> freq;
  const int sweeps = 200000;
  for (int s = 0; s < 1000 + sweeps; ++s) {
    for (int i = 0; i < 4; ++i) reassign_observation(st, obs, i, base, true, rng);
    if (s < 1000) continue;
    std::vector<int> lab = st.c;
    canonicalize(lab);
    freq[lab] += 1.0 / sweeps;
  }
  double tv = 0.0;
  for (const auto& [lab, p] : exact) tv += std::abs(p - freq[lab]);
  CHECK(0.5 * tv < 0.02);
  st.check_invariants(obs);
}

TEST_CASE("cached statistics stay consistent") {
  Rng rng(4);
  const ExperimentData ex = generate_experiment({1, 100, 2});
  const auto obs = observation_stats(ex.data);
  const NigParams base = auto_base_measure(ex.data);
  std::vector<int> labels(obs.size());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = int(i % 4);
  FranchiseState st = make_state({50, 50}, labels, obs, 3.0, VectorXd::Constant(2, 0.5),
                                 VectorXd::Constant(2, 10.0), base, false);
  for (int s = 0; s < 30; ++s) {
    for (int i = 0; i < 100; ++i) reassign_observation(st, obs, i, base, false, rng);
    st.check_invariants(obs, 1e-8);
    for (const auto& f : st.clusters) CHECK(f.log_ml == doctest::Approx(log_marginal(f.stats, base)).epsilon(1e-10));
    const GroupCounts c = st.counts();
    CHECK_NOTHROW(c.validate());
    CHECK(c.group_sizes() == (VectorXi(2) << 50, 50).finished());
  }
}

TEST_CASE("Langevin gradients match finite differences") {
  Rng rng(5);
  std::uniform_real_distribution<double> unif(0.1, 3.0);
  std::uniform_int_distribution<int> cnt(0, 4);
  for (int rep = 0; rep < 20; ++rep) {
    MatrixXi m(2, 3);
    for (int j = 0; j < 2; ++j) {
      for (int h = 0; h < 3; ++h) m(j, h) = cnt(rng);
    }
    for (int h = 0; h < 3; ++h) m(0, h) = std::max(m(0, h), 1);
    const GroupCounts counts(m);
    const double lambda = 3.0 * unif(rng);
    const VectorXd g = (VectorXd(2) << unif(rng), unif(rng)).finished();
    const VectorXd v = (VectorXd(2) << std::log(unif(rng)), std::log(unif(rng))).finished();
    const HyperPriorParams h{unif(rng), unif(rng), 1.0, 1.0};

    const LogDensityGrad a = log_u_target(v, counts, lambda, g);
    const VectorXd fa = oracle::fd_gradient([&](const VectorXd& x) { return log_u_target(x, counts, lambda, g).value; }, v);
    CHECK(max_rel_error(a.grad, fa) < 1e-5);

    const VectorXd w = g.array().log();
    const LogDensityGrad b = log_gamma_target(w, counts, lambda, v, h);
    const VectorXd fb =
        oracle::fd_gradient([&](const VectorXd& x) { return log_gamma_target(x, counts, lambda, v, h).value; }, w);
    CHECK(max_rel_error(b.grad, fb) < 1e-5);
  }
}

TEST_CASE("u target agrees with the auxiliary-variable density") {
  // differences in log target equal differences of
  // sum_j [n_j log u_j - (n_j + K g_j) log(1 + u_j)] + log(K + L psibar) + L psibar
  const GroupCounts counts((MatrixXi(2, 2) << 2, 1, 0, 3).finished());
  const VectorXd g = (VectorXd(2) << 0.5, 2.0).finished();
  auto direct = [&](const VectorXd& u) {
    double t = 0.0, lpb = 0.0;
    const VectorXi n = counts.group_sizes();
    for (int j = 0; j < 2; ++j) {
      t += n(j) * std::log(u(j)) - (n(j) + 2 * g(j)) * std::log1p(u(j));
      lpb -= g(j) * std::log1p(u(j));
    }
    return t + std::log(2 + 1.3 * std::exp(lpb)) + 1.3 * std::exp(lpb);
  };
  const VectorXd u1 = (VectorXd(2) << 0.4, 3.0).finished();
  const VectorXd u2 = (VectorXd(2) << 1.9, 0.2).finished();
  const double a = log_u_target(u1.array().log(), counts, 1.3, g).value - log_u_target(u2.array().log(), counts, 1.3, g).value;
  CHECK(a == doctest::Approx(direct(u1) - direct(u2)).epsilon(1e-12));
}

TEST_CASE("u chain matches its Beta law in one dimension") {
  // d = 1, K = 1, g = 1, L -> 0: density of u is proportional to u^(n-1) (1+u)^-(n+1)
  Rng rng(6);
  const int n = 4;
  const auto obs = observation_stats(GroupedDataset::from_values({{0.0, 0.0, 0.0, 0.0}}));
  FranchiseState st = make_state({n}, {0, 0, 0, 0}, obs, 1e-9, VectorXd::Ones(1), VectorXd::Ones(1), NigParams{}, true);
  // u has infinite mean here; u / (1 + u) is Beta(n, 1)
  auto stat = [](double u) { return u / (1.0 + u); };
  const double target = double(n) / (n + 1);
  const int burn = 5000, steps = 200000;
  double s = 0;
  for (int r = 0; r < burn + steps; ++r) {
    step_u_mala(st, rng);
    if (r == burn) st.u_scale.freeze();
    if (r >= burn) s += stat(std::exp(st.log_u(0)));
  }
  CHECK(s / steps == doctest::Approx(target).epsilon(0.02));
}

TEST_CASE("gamma chain without data samples the prior") {
  Rng rng(7);
  const HyperPriorParams h{4.0, 2.0, 1.0, 1.0};
  FranchiseState st;
  st.group_of = {};
  st.gamma = VectorXd::Ones(1);
  st.lambda = 1.5;
  st.log_u = VectorXd::Constant(1, -std::numeric_limits<double>::infinity());
  st.gamma_scale = AdaptiveScale(0.2, 0.574, 0.7);
  FranchiseCluster f;
  f.n = VectorXi::Zero(1);
  f.total = 1;
  st.clusters.push_back(f);
  const int burn = 5000, steps = 200000;
  double s = 0, s2 = 0;
  for (int r = 0; r < burn + steps; ++r) {
    step_gamma_mala(st, h, rng);
    if (r == burn) st.gamma_scale.freeze();
    if (r >= burn) {
      s += st.gamma(0);
      s2 += st.gamma(0) * st.gamma(0);
    }
  }
  const double rate = 1.5 * 2.0;
  CHECK(s / steps == doctest::Approx(4.0 / rate).epsilon(0.02));
  CHECK(s2 / steps - (s / steps) * (s / steps) == doctest::Approx(4.0 / (rate * rate)).epsilon(0.05));
}

TEST_CASE("symmetric groups give symmetric gamma posteriors") {
  GroupedDataset data = GroupedDataset::from_values({{-2.0, -1.9, 2.0, 2.1, 0.1}, {-2.0, -1.9, 2.0, 2.1, 0.1}});
  Priors p = fixed_priors(2, 2.0, 0.5);
  p.fix_gamma = false;
  p.hyper = elicit({5.0, 5.0, 0.5, 2});
  SamplerConfig cfg;
  cfg.iterations = 40000;
  cfg.burn_in = 2000;
  cfg.keep_allocations = false;
  const ChainOutput out = run_marginal(data, cfg, p);
  std::vector<double> g0, g1;
  for (const auto& r : out.records) {
    g0.push_back(r.gamma(0));
    g1.push_back(r.gamma(1));
  }
  const double m0 = std::accumulate(g0.begin(), g0.end(), 0.0) / g0.size();
  const double m1 = std::accumulate(g1.begin(), g1.end(), 0.0) / g1.size();
  CHECK(m0 == doctest::Approx(m1).epsilon(0.1));
}

TEST_CASE("seed determinism") {
  const ExperimentData ex = generate_experiment({2, 40, 1});
  Priors p = fixed_priors(2, 2.0, 0.5);
  p.fix_gamma = false;
  p.fix_lambda = false;
  p.hyper = elicit({10.0, 2.0, 0.01, 2});
  SamplerConfig cfg;
  cfg.iterations = 150;
  cfg.burn_in = 50;
  cfg.seed = 42;
  std::ostringstream a, b;
  write_scalars_csv(a, run_marginal(ex.data, cfg, p));
  write_scalars_csv(b, run_marginal(ex.data, cfg, p));
  CHECK(a.str() == b.str());
}

TEST_CASE("prior-only chain reproduces the prior law of K") {
  const GroupedDataset data = GroupedDataset::from_values({{0, 0, 0}, {0, 0, 0}});
  const Priors p = fixed_priors(2, 2.0, 1.0);
  SamplerConfig cfg;
  cfg.iterations = 60000;
  cfg.burn_in = 1000;
  cfg.prior_only = true;
  cfg.keep_allocations = false;
  const ChainOutput out = run_marginal(data, cfg, p);
  std::vector<double> freq(6, 0.0);
  for (const auto& r : out.records) freq[r.k - 1] += 1.0 / out.records.size();
  CHECK(oracle::total_variation(freq, prior_k_pmf({3, 3}, p.init)) < 0.02);
}

TEST_CASE("one-group chain targets the exact posterior") {
  const std::vector<std::vector<double>> values{{-2.1, -1.8, 0.1, 0.3, 2.2, 1.9, 2.4}};
  const Priors p = fixed_priors(1, 1.5, 0.8);
  const auto exact = oracle::k_posterior_enumerated(values, 1.5, p.init.gamma, p.base.mu0, p.base.k0, p.base.nu0,
                                                    p.base.sigma0_sq);
  SamplerConfig cfg;
  cfg.iterations = 60000;
  cfg.burn_in = 2000;
  cfg.init = InitPartition::kOneCluster;
  cfg.keep_allocations = false;
  const ChainOutput out = run_marginal(GroupedDataset::from_values(values), cfg, p);
  std::vector<double> freq(exact.size(), 0.0);
  for (const auto& r : out.records) freq[r.k - 1] += 1.0 / out.records.size();
  CHECK(oracle::total_variation(freq, exact) < 0.03);
}

TEST_CASE("regression variant runs and moves the coefficients") {
  Rng rng(8);
  GroupedDataset data;
  data.groups.resize(2);
  std::normal_distribution<double> z(0.0, 0.3);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 40; ++i) {
      Observation o;
      o.x = VectorXd::Constant(1, i % 2);
      o.y = {(i % 3 == 0 ? -2.0 : 2.0) + (j == 0 ? 1.5 : -1.0) * o.x(0) + z(rng)};
      data.groups[j].push_back(o);
    }
  }
  Priors p = fixed_priors(2, 3.0, 0.5);
  p.base = auto_base_measure(data);
  p.regression = RegressionSpec{VectorXd::Zero(1), MatrixXd::Identity(1, 1)};
  SamplerConfig cfg;
  cfg.iterations = 1500;
  cfg.burn_in = 500;
  for (const Algorithm a : {Algorithm::kConditional, Algorithm::kMarginal}) {
    const ChainOutput out = a == Algorithm::kConditional ? run_conditional(data, cfg, p) : run_marginal(data, cfg, p);
    double b0 = 0, b1 = 0;
    for (const auto& r : out.records) {
      b0 += r.beta[0](0);
      b1 += r.beta[1](0);
    }
    CAPTURE(to_string(a));
    CHECK(b0 / out.records.size() == doctest::Approx(1.5).epsilon(0.15));
    CHECK(b1 / out.records.size() == doctest::Approx(-1.0).epsilon(0.15));
  }
}

TEST_CASE("two-group chain targets the exact posterior") {
  const std::vector<std::vector<double>> values{{-2.0, -1.7, 0.2, 2.1}, {0.1, 1.8, 2.5}};
  const VectorXd g = (VectorXd(2) << 0.4, 1.2).finished();
  Priors p = fixed_priors(2, 2.5, 1.0);
  p.init.gamma = g;
  const auto exact =
      oracle::k_posterior_enumerated(values, 2.5, g, p.base.mu0, p.base.k0, p.base.nu0, p.base.sigma0_sq);
  SamplerConfig cfg;
  cfg.iterations = 100000;
  cfg.burn_in = 2000;
  cfg.keep_allocations = false;
  const ChainOutput out = run_marginal(GroupedDataset::from_values(values), cfg, p);
  std::vector<double> freq(exact.size(), 0.0);
  for (const auto& r : out.records) freq[r.k - 1] += 1.0 / out.records.size();
  CHECK(oracle::total_variation(freq, exact) < 0.03);
}

TEST_CASE("prior-only chain with random hyperparameters reproduces the marginal prior") {
  Priors p = fixed_priors(2, 3.0, 0.5);
  p.fix_lambda = p.fix_gamma = false;
  p.hyper = elicit({3.0, 2.0, 0.5, 2});
  SUBCASE("gamma rate scaled by lambda") {}
  SUBCASE("gamma independent of lambda") {
    p.hyper = HyperPriorParams{2.0, 3.0, 9.0, 3.0, true};
  }
  // average of the exact law of K over hyperprior draws
  Rng rng(77);
  std::vector<double> mixed(6, 0.0);
  const int draws = 20000;
  for (int r = 0; r < draws; ++r) {
    const double lambda = draw_gamma(p.hyper.a_lambda, p.hyper.b_lambda, rng);
    VectorXd g(2);
    for (auto& x : g) x = draw_gamma(p.hyper.a_gamma, p.hyper.gamma_rate(lambda), rng);
    const auto pmf = prior_k_pmf({3, 3}, VecFdpParams(lambda, g));
    for (int k = 0; k < 6; ++k) mixed[k] += pmf[k] / draws;
  }
  SamplerConfig cfg;
  cfg.iterations = 150000;
  cfg.burn_in = 5000;
  cfg.prior_only = true;
  cfg.keep_allocations = false;
  const ChainOutput out = run_marginal(GroupedDataset::from_values({{0, 0, 0}, {0, 0, 0}}), cfg, p);
  std::vector<double> freq(6, 0.0);
  double lambda_mean = 0.0;
  for (const auto& r : out.records) {
    freq[r.k - 1] += 1.0 / out.records.size();
    lambda_mean += r.lambda / out.records.size();
  }
  CHECK(oracle::total_variation(freq, mixed) < 0.02);
  CHECK(lambda_mean == doctest::Approx(p.hyper.a_lambda / p.hyper.b_lambda).epsilon(0.05));
}

}  // TEST_SUITE
