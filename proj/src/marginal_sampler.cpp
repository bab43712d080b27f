// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "hmfm/marginal_sampler.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/digamma.hpp>

#include "hmfm/numeric.hpp"
#include "hmfm/prior_calculus.hpp"

namespace hmfm {

VectorXi FranchiseState::group_sizes() const {
  VectorXi n = VectorXi::Zero(d());
  for (int g : group_of) ++n(g);
  return n;
}

GroupCounts FranchiseState::counts() const {
  MatrixXi m(d(), k());
  for (int h = 0; h < k(); ++h) m.col(h) = clusters[h].n;
  return GroupCounts(m);
}

void FranchiseState::check_invariants(const std::vector<ClusterSuffStats>& obs, double tol) const {
  std::vector<FranchiseCluster> fresh(k());
  for (auto& f : fresh) f.n = VectorXi::Zero(d());
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] < 0 || c[i] >= k()) throw std::logic_error("franchise state: label out of range");
    ++fresh[c[i]].n(group_of[i]);
    ++fresh[c[i]].total;
    fresh[c[i]].stats.add(obs[i]);
  }
  for (int h = 0; h < k(); ++h) {
    const FranchiseCluster& a = clusters[h];
    const FranchiseCluster& b = fresh[h];
    if (b.total < 1) throw std::logic_error("franchise state: empty global cluster");
    if (a.n != b.n || a.total != b.total || a.stats.count != b.stats.count) {
      throw std::logic_error("franchise state: cached counts disagree");
    }
    const double scale = 1.0 + std::abs(b.stats.sum_sq);
    if (std::abs(a.stats.sum - b.stats.sum) > tol * scale || std::abs(a.stats.sum_sq - b.stats.sum_sq) > tol * scale) {
      throw std::logic_error("franchise state: cached statistics drifted");
    }
  }
}

void rebuild_clusters(FranchiseState& st, const std::vector<ClusterSuffStats>& obs, const NigParams& base,
                      bool prior_only) {
  const int k = canonicalize(st.c);
  st.clusters.assign(k, FranchiseCluster{});
  for (auto& f : st.clusters) f.n = VectorXi::Zero(st.d());
  for (std::size_t i = 0; i < st.c.size(); ++i) {
    FranchiseCluster& f = st.clusters[st.c[i]];
    ++f.n(st.group_of[i]);
    ++f.total;
    f.stats.add(obs[i]);
  }
  for (auto& f : st.clusters) f.log_ml = prior_only ? 0.0 : log_marginal(f.stats, base);
}

FranchiseState init_marginal(const GroupedDataset& data, const SamplerConfig& config, const Priors& priors,
                             const std::vector<ClusterSuffStats>& obs, Rng& rng) {
  priors.init.validate();
  if (priors.init.d() != data.d()) throw DataError("prior d does not match the number of groups");
  FranchiseState st;
  st.lambda = priors.init.lambda;
  st.gamma = priors.init.gamma;
  st.c = initial_partition(data, config);
  for (int j = 0; j < data.d(); ++j) st.group_of.insert(st.group_of.end(), data.n(j), j);
  if (priors.regression) st.beta.assign(data.d(), priors.regression->beta0);
  rebuild_clusters(st, obs, priors.base, config.prior_only);
  st.log_u = VectorXd::Constant(data.d(), -std::numeric_limits<double>::infinity());
  for (int j = 0; j < data.d(); ++j) {
    if (data.n(j) == 0) continue;
    st.log_u(j) = draw_log_gamma(data.n(j), rng) - draw_log_gamma(st.k() * st.gamma(j), rng);
  }
  st.u_scale = AdaptiveScale(0.5, config.mala_target, config.adapt_decay);
  st.gamma_scale = AdaptiveScale(0.2, config.mala_target, config.adapt_decay);
  return st;
}

void reassign_observation(FranchiseState& st, const std::vector<ClusterSuffStats>& obs, int i,
                          const NigParams& base, bool prior_only, Rng& rng) {
  const int j = st.group_of[i];
  const ClusterSuffStats& o = obs[i];

  // removal
  {
    const int h = st.c[i];
    FranchiseCluster& f = st.clusters[h];
    --f.n(j);
    --f.total;
    f.stats.remove(o);
    if (f.total == 0) {
      const int last = st.k() - 1;
      if (h != last) {
        st.clusters[h] = std::move(st.clusters[last]);
        for (int& lab : st.c) {
          if (lab == last) lab = h;
        }
      }
      st.clusters.pop_back();
    } else if (!prior_only) {
      f.log_ml = log_marginal(f.stats, base);
    }
  }

  const int k = st.k();
  const double gj = st.gamma(j);
  const double log_pb = log_psi_bar_log_u(st.log_u, st.gamma);
  const double x = st.lambda * std::exp(log_pb);
  std::vector<double> w(k + 1);
  for (int h = 0; h < k; ++h) {
    const FranchiseCluster& f = st.clusters[h];
    double lw = std::log(f.n(j) + gj);
    if (!prior_only) {
      ClusterSuffStats joined = f.stats;
      joined.add(o);
      lw += log_marginal(joined, base) - f.log_ml;
    }
    w[h] = lw;
  }
  w[k] = log_pb + std::log(gj) + std::log(st.lambda) + std::log(k + 1.0 + x) - std::log(k + x);
  if (!prior_only) w[k] += log_marginal(o, base);

  const int pick = sample_log_categorical(w, rng);
  if (pick == k) {
    FranchiseCluster f;
    f.n = VectorXi::Zero(st.d());
    st.clusters.push_back(std::move(f));
  }
  FranchiseCluster& f = st.clusters[pick];
  ++f.n(j);
  ++f.total;
  f.stats.add(o);
  if (!prior_only) f.log_ml = log_marginal(f.stats, base);
  st.c[i] = pick;
}

// ---------------------------------------------------------------------------

LogDensityGrad log_u_target(const VectorXd& v, const GroupCounts& counts, double lambda, const VectorXd& gamma) {
  const int d = static_cast<int>(v.size());
  const int k = counts.k();
  const VectorXi n = counts.group_sizes();
  LogDensityGrad out;
  out.grad = VectorXd::Zero(d);
  double log_pb = 0.0;
  VectorXd frac(d);  // u / (1 + u)
  for (int j = 0; j < d; ++j) {
    if (n(j) == 0) {  // u_j is held at 0
      frac(j) = 0.0;
      continue;
    }
    const double l1p = softplus(v(j));
    frac(j) = 1.0 / (1.0 + std::exp(-v(j)));
    log_pb -= gamma(j) * l1p;
    out.value += n(j) * v(j) - (n(j) + k * gamma(j)) * l1p;
    out.grad(j) = n(j) - (n(j) + k * gamma(j)) * frac(j);
  }
  const double pb = std::exp(log_pb);
  out.value += std::log(k + lambda * pb) + lambda * pb;
  const double coef = lambda / (k + lambda * pb) + lambda;
  for (int j = 0; j < d; ++j) out.grad(j) -= coef * pb * gamma(j) * frac(j);
  return out;
}

LogDensityGrad log_gamma_target(const VectorXd& w, const GroupCounts& counts, double lambda, const VectorXd& log_u,
                                const HyperPriorParams& hyper) {
  const int d = static_cast<int>(w.size());
  const int k = counts.k();
  LogDensityGrad out;
  out.grad = VectorXd::Zero(d);
  double log_pb = 0.0;
  VectorXd g = w.array().exp();
  for (int j = 0; j < d; ++j) {
    const double l1p = softplus(log_u(j));
    log_pb -= g(j) * l1p;
    const double rate = hyper.gamma_rate(lambda);
    out.value += hyper.a_gamma * w(j) - rate * g(j) - k * g(j) * l1p;
    out.grad(j) = hyper.a_gamma - rate * g(j) - k * g(j) * l1p;
    const double lg = std::lgamma(g(j));
    const double dg = boost::math::digamma(g(j));
    for (int h = 0; h < k; ++h) {
      const int njh = counts.counts(j, h);
      if (njh == 0) continue;
      out.value += std::lgamma(g(j) + njh) - lg;
      out.grad(j) += g(j) * (boost::math::digamma(g(j) + njh) - dg);
    }
  }
  const double pb = std::exp(log_pb);
  out.value += std::log(k + lambda * pb) + lambda * pb;
  const double coef = lambda / (k + lambda * pb) + lambda;
  for (int j = 0; j < d; ++j) out.grad(j) -= coef * pb * g(j) * softplus(log_u(j));
  return out;
}

namespace {

// One MALA move on x with identity mass; entries with active[j] == false stay fixed.
template <typename Target>
bool mala_move(VectorXd& x, const std::vector<bool>& active, AdaptiveScale& scale, Target&& target, Rng& rng) {
  const double eps = scale.scale();
  const LogDensityGrad cur = target(x);
  VectorXd prop = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (active[j]) prop(j) = x(j) + 0.5 * eps * eps * cur.grad(j) + eps * draw_normal(rng);
  }
  double accept_prob = 0.0;
  const LogDensityGrad nxt = target(prop);
  if (std::isfinite(nxt.value) && nxt.grad.allFinite()) {
    double log_q_fwd = 0.0;
    double log_q_bwd = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (!active[j]) continue;
      const double f = prop(j) - x(j) - 0.5 * eps * eps * cur.grad(j);
      const double b = x(j) - prop(j) - 0.5 * eps * eps * nxt.grad(j);
      log_q_fwd += -0.5 * f * f / (eps * eps);
      log_q_bwd += -0.5 * b * b / (eps * eps);
    }
    const double log_r = nxt.value - cur.value + log_q_bwd - log_q_fwd;
    accept_prob = log_r >= 0.0 ? 1.0 : std::exp(log_r);
  }
  const bool accepted = draw_uniform(rng) < accept_prob;
  scale.update(accept_prob);
  scale.record(accepted);
  if (accepted) x = prop;
  return accepted;
}

}  // namespace

void step_u_mala(FranchiseState& st, Rng& rng) {
  const GroupCounts counts = st.counts();
  const VectorXi n = counts.group_sizes();
  std::vector<bool> active(st.d());
  VectorXd v = VectorXd::Zero(st.d());
  for (int j = 0; j < st.d(); ++j) {
    active[j] = n(j) > 0;
    if (active[j]) v(j) = st.log_u(j);
  }
  auto target = [&](const VectorXd& x) { return log_u_target(x, counts, st.lambda, st.gamma); };
  mala_move(v, active, st.u_scale, target, rng);
  for (int j = 0; j < st.d(); ++j) st.log_u(j) = active[j] ? v(j) : -std::numeric_limits<double>::infinity();
}

void step_gamma_mala(FranchiseState& st, const HyperPriorParams& hyper, Rng& rng) {
  const GroupCounts counts = st.counts();
  std::vector<bool> active(st.d(), true);
  VectorXd w = st.gamma.array().log();
  auto target = [&](const VectorXd& x) { return log_gamma_target(x, counts, st.lambda, st.log_u, hyper); };
  mala_move(w, active, st.gamma_scale, target, rng);
  st.gamma = w.array().exp();
}

void step_lambda(FranchiseState& st, const HyperPriorParams& hyper, Rng& rng) {
  const LambdaMixture mix = lambda_conditional(st.k(), log_psi_bar_log_u(st.log_u, st.gamma), st.gamma, hyper);
  st.lambda = draw_lambda(mix, rng);
}

// ---------------------------------------------------------------------------

ChainOutput run_marginal(const GroupedDataset& data, const SamplerConfig& config, const Priors& priors) {
  config.validate();
  data.validate(!config.prior_only);
  priors.base.validate();
  priors.hyper.validate();
  if (priors.regression) {
    priors.regression->validate();
    if (data.covariate_dim() != priors.regression->r()) {
      throw DataError("regression prior dimension does not match the covariates");
    }
  }

  Rng rng(config.seed);
  std::vector<ClusterSuffStats> obs;
  if (priors.regression) {
    std::vector<VectorXd> beta0(data.d(), priors.regression->beta0);
    obs = observation_stats(residualize(data, beta0).data);
  } else {
    obs = observation_stats(data);
  }
  FranchiseState st = init_marginal(data, config, priors, obs, rng);

  ChainOutput out;
  out.algorithm = Algorithm::kMarginal;
  out.d = data.d();
  out.base = priors.base;
  out.records.reserve((config.iterations - config.burn_in) / config.thin + 1);
  auto freeze_adaptation = [&st]() {
    st.u_scale.freeze();
    st.u_scale.reset_counts();
    st.gamma_scale.freeze();
    st.gamma_scale.reset_counts();
  };
  if (config.burn_in == 0) freeze_adaptation();

  const int n_total = static_cast<int>(obs.size());
  for (int it = 1; it <= config.iterations; ++it) {
    try {
      for (int i = 0; i < n_total; ++i) reassign_observation(st, obs, i, priors.base, config.prior_only, rng);
      if (priors.regression && !config.prior_only) {
        std::vector<NormalComponent> comps(st.k());
        for (int h = 0; h < st.k(); ++h) comps[h] = nig_draw(nig_posterior(st.clusters[h].stats, priors.base), rng);
        for (int j = 0; j < st.d(); ++j) {
          st.beta[j] = beta_full_conditional_draw(data, st.c, comps, *priors.regression, j, rng);
        }
        obs = observation_stats(residualize(data, st.beta).data);
        rebuild_clusters(st, obs, priors.base, config.prior_only);
      }
      step_u_mala(st, rng);
      if (!priors.fix_gamma) step_gamma_mala(st, priors.hyper, rng);
      if (!priors.fix_lambda) step_lambda(st, priors.hyper, rng);
#ifndef NDEBUG
      st.check_invariants(obs);
#endif
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
    }

    if (it == config.burn_in) freeze_adaptation();
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      IterationRecord rec;
      rec.iter = it;
      rec.k = st.k();
      rec.m = st.k();
      rec.lambda = st.lambda;
      rec.gamma = st.gamma;
      rec.log_u = st.log_u;
      rec.u = st.log_u.array().exp();
      if (config.keep_allocations) rec.allocations = st.c;
      rec.counts = st.counts().counts;
      rec.cluster_post.reserve(st.k());
      for (const auto& f : st.clusters) {
        rec.cluster_post.push_back(config.prior_only ? priors.base : nig_posterior(f.stats, priors.base));
      }
      rec.beta = st.beta;
      out.records.push_back(std::move(rec));
    }
  }
  out.u_acceptance = st.u_scale.acceptance_rate();
  out.gamma_acceptance = VectorXd::Constant(st.d(), st.gamma_scale.acceptance_rate());
  return out;
}

}  // namespace hmfm
