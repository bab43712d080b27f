// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "hmfm/conditional_sampler.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "hmfm/numeric.hpp"
#include "hmfm/prior_calculus.hpp"

namespace hmfm {

MatrixXi ConditionalState::counts() const {
  MatrixXi n = MatrixXi::Zero(d(), m);
  for (std::size_t i = 0; i < c.size(); ++i) ++n(group_of[i], c[i]);
  return n;
}

VectorXi ConditionalState::group_sizes() const {
  VectorXi n = VectorXi::Zero(d());
  for (int g : group_of) ++n(g);
  return n;
}

void ConditionalState::check_invariants() const {
  if (k > m || k < 0) throw std::logic_error("conditional state: K > M");
  const MatrixXi n = counts();
  for (int h = 0; h < m; ++h) {
    const bool occupied = n.col(h).sum() > 0;
    if (occupied != (h < k)) throw std::logic_error("conditional state: allocated components not contiguous");
  }
  if (mu.size() != m || sigma_sq.size() != m || log_s.cols() != m) {
    throw std::logic_error("conditional state: component arrays out of sync with M");
  }
  if (!(log_s.allFinite() && (log_u.array() < std::numeric_limits<double>::infinity()).all() && lambda > 0 &&
        (gamma.array() > 0).all())) {
    throw std::logic_error("conditional state: non-positive weight or parameter");
  }
}

namespace {

// Moves allocated components to the front, preserving their relative order.
void relabel(ConditionalState& st) {
  std::vector<int> used(st.m, 0);
  for (int c : st.c) used[c] = 1;
  std::vector<int> order;
  order.reserve(st.m);
  for (int h = 0; h < st.m; ++h) {
    if (used[h]) order.push_back(h);
  }
  st.k = static_cast<int>(order.size());
  for (int h = 0; h < st.m; ++h) {
    if (!used[h]) order.push_back(h);
  }
  std::vector<int> new_index(st.m);
  for (int h = 0; h < st.m; ++h) new_index[order[h]] = h;
  for (int& c : st.c) c = new_index[c];
  VectorXd mu(st.m), s2(st.m);
  MatrixXd s(st.d(), st.m);
  for (int h = 0; h < st.m; ++h) {
    mu(h) = st.mu(order[h]);
    s2(h) = st.sigma_sq(order[h]);
    s.col(h) = st.log_s.col(order[h]);
  }
  st.mu = std::move(mu);
  st.sigma_sq = std::move(s2);
  st.log_s = std::move(s);
}

void resize_components(ConditionalState& st, int m) {
  st.mu.conservativeResize(m);
  st.sigma_sq.conservativeResize(m);
  st.log_s.conservativeResize(Eigen::NoChange, m);
  st.m = m;
}

void draw_nonallocated_atoms(ConditionalState& st, const NigParams& base, Rng& rng) {
  for (int h = st.k; h < st.m; ++h) {
    const NormalComponent c = nig_draw(base, rng);
    st.mu(h) = c.mu;
    st.sigma_sq(h) = c.sigma_sq;
  }
}

}  // namespace

ConditionalState init_conditional(const GroupedDataset& data, const SamplerConfig& config,
                                  const Priors& priors, Rng& rng) {
  priors.init.validate();
  if (priors.init.d() != data.d()) throw DataError("prior d does not match the number of groups");
  ConditionalState st;
  st.lambda = priors.init.lambda;
  st.gamma = priors.init.gamma;
  st.c = initial_partition(data, config);
  st.group_of.reserve(st.c.size());
  for (int j = 0; j < data.d(); ++j) st.group_of.insert(st.group_of.end(), data.n(j), j);
  st.k = 0;
  for (int c : st.c) st.k = std::max(st.k, c + 1);
  st.m = st.k + 1;
  st.mu = VectorXd::Zero(st.m);
  st.sigma_sq = VectorXd::Ones(st.m);
  st.log_s = MatrixXd::Zero(data.d(), st.m);
  st.log_u = VectorXd::Constant(data.d(), -std::numeric_limits<double>::infinity());
  if (priors.regression) {
    st.beta.assign(data.d(), priors.regression->beta0);
  }
  const std::vector<ClusterSuffStats> obs =
      priors.regression ? observation_stats(residualize(data, st.beta).data) : observation_stats(data);
  step_tau(st, obs, priors.base, config.prior_only, rng);
  complete_weights(st, priors.base, rng);

  st.m_scale = AdaptiveScale(2.0, config.mh_target, config.adapt_decay);
  st.gamma_scale.assign(data.d(), AdaptiveScale(0.5, config.mh_target, config.adapt_decay));
  return st;
}

void step_allocations(ConditionalState& st, const std::vector<ClusterSuffStats>& obs,
                      bool prior_only, Rng& rng) {
  const MatrixXd& log_s = st.log_s;
  VectorXd log_var = st.sigma_sq.array().log().matrix();
  std::vector<double> w(st.m);
  for (std::size_t i = 0; i < st.c.size(); ++i) {
    const int j = st.group_of[i];
    const ClusterSuffStats& o = obs[i];
    for (int h = 0; h < st.m; ++h) {
      double lw = log_s(j, h);
      if (!prior_only) {
        const double quad = o.sum_sq - 2.0 * st.mu(h) * o.sum + o.count * st.mu(h) * st.mu(h);
        lw += -0.5 * o.count * log_var(h) - 0.5 * quad / st.sigma_sq(h);
      }
      w[h] = lw;
    }
    st.c[i] = sample_log_categorical(w, rng);
  }
  relabel(st);
}

void step_tau(ConditionalState& st, const std::vector<ClusterSuffStats>& obs, const NigParams& base,
              bool prior_only, Rng& rng) {
  std::vector<ClusterSuffStats> pooled(st.k);
  if (!prior_only) {
    for (std::size_t i = 0; i < st.c.size(); ++i) pooled[st.c[i]].add(obs[i]);
  }
  for (int h = 0; h < st.m; ++h) {
    const NigParams post = h < st.k ? nig_posterior(pooled[h], base) : base;
    const NormalComponent c = nig_draw(post, rng);
    st.mu(h) = c.mu;
    st.sigma_sq(h) = c.sigma_sq;
  }
}

void step_s(ConditionalState& st, Rng& rng) {
  const MatrixXi n = st.counts();
  for (int j = 0; j < st.d(); ++j) {
    const double log_rate = softplus(st.log_u(j));
    for (int h = 0; h < st.m; ++h) st.log_s(j, h) = draw_log_gamma(st.gamma(j) + n(j, h), rng) - log_rate;
  }
}

void step_lambda(ConditionalState& st, const HyperPriorParams& hyper, Rng& rng) {
  const LambdaMixture mix = lambda_conditional(st.k, log_psi_bar_log_u(st.log_u, st.gamma), st.gamma, hyper);
  st.lambda = draw_lambda(mix, rng);
}

void refresh_nonallocated(ConditionalState& st, const NigParams& base, Rng& rng) {
  const double x = st.lambda * std::exp(log_psi_bar_log_u(st.log_u, st.gamma));
  const bool shifted = draw_uniform(rng) < x / (x + st.k);
  int m_star = std::poisson_distribution<int>(x)(rng) + (shifted ? 1 : 0);
  resize_components(st, st.k + m_star);
  for (int j = 0; j < st.d(); ++j) {
    const double log_rate = softplus(st.log_u(j));
    for (int h = st.k; h < st.m; ++h) st.log_s(j, h) = draw_log_gamma(st.gamma(j), rng) - log_rate;
  }
  draw_nonallocated_atoms(st, base, rng);
}

void step_u(ConditionalState& st, Rng& rng) {
  const VectorXi n = st.group_sizes();
  for (int j = 0; j < st.d(); ++j) {
    if (n(j) == 0) {
      st.log_u(j) = -std::numeric_limits<double>::infinity();
    } else {
      std::vector<double> row(st.log_s.row(j).begin(), st.log_s.row(j).end());
      st.log_u(j) = draw_log_gamma(n(j), rng) - log_sum_exp(row);
    }
  }
}

double log_m_star_target(int m_star, int k, double lambda, const VectorXd& gamma, const VectorXi& n) {
  const double mk = m_star + k;
  double t = std::log(mk) - std::lgamma(m_star + 1.0) + m_star * std::log(lambda);
  for (Eigen::Index j = 0; j < gamma.size(); ++j) {
    t += std::lgamma(gamma(j) * mk) - std::lgamma(gamma(j) * mk + n(j));
  }
  return t;
}

void step_m(ConditionalState& st, const SamplerConfig& config, Rng& rng) {
  const VectorXi n = st.group_sizes();
  const int cur = st.m - st.k;
  const int prop = cur + static_cast<int>(std::lround(st.m_scale.scale() * draw_normal(rng)));
  double accept_prob = 0.0;
  if (prop > config.max_m_star) {
    ++st.m_cap_hits;
  } else if (prop >= 0) {
    const double log_r = log_m_star_target(prop, st.k, st.lambda, st.gamma, n) -
                         log_m_star_target(cur, st.k, st.lambda, st.gamma, n);
    accept_prob = log_r >= 0.0 ? 1.0 : std::exp(log_r);
  }
  const bool accepted = draw_uniform(rng) < accept_prob;
  st.m_scale.update(accept_prob);
  st.m_scale.record(accepted);
  if (accepted) resize_components(st, st.k + prop);
}

namespace {

double log_gamma_target(double g, int j, const ConditionalState& st, const MatrixXi& n, int nj,
                        const HyperPriorParams& hyper) {
  double t = std::lgamma(g * st.m) - std::lgamma(g * st.m + nj);
  const double lg = std::lgamma(g);
  for (int h = 0; h < st.k; ++h) {
    if (n(j, h) > 0) t += std::lgamma(n(j, h) + g) - lg;
  }
  // gamma prior plus the Jacobian of g = exp(w)
  t += hyper.a_gamma * std::log(g) - hyper.gamma_rate(st.lambda) * g;
  return t;
}

}  // namespace

void step_gamma(ConditionalState& st, const HyperPriorParams& hyper, Rng& rng) {
  const MatrixXi n = st.counts();
  const VectorXi sizes = st.group_sizes();
  for (int j = 0; j < st.d(); ++j) {
    AdaptiveScale& sc = st.gamma_scale[j];
    const double cur = st.gamma(j);
    const double prop = cur * std::exp(sc.scale() * draw_normal(rng));
    double accept_prob = 0.0;
    if (prop > 0.0 && std::isfinite(prop)) {
      const double log_r = log_gamma_target(prop, j, st, n, sizes(j), hyper) -
                           log_gamma_target(cur, j, st, n, sizes(j), hyper);
      accept_prob = log_r >= 0.0 ? 1.0 : std::exp(log_r);
    }
    const bool accepted = draw_uniform(rng) < accept_prob;
    sc.update(accept_prob);
    sc.record(accepted);
    if (accepted) st.gamma(j) = prop;
  }
}

void complete_weights(ConditionalState& st, const NigParams& base, Rng& rng) {
  const VectorXi sizes = st.group_sizes();
  for (int j = 0; j < st.d(); ++j) {
    // u = B / (1 - B) with B ~ Beta(n_j, M gamma_j)
    st.log_u(j) = sizes(j) == 0 ? -std::numeric_limits<double>::infinity()
                                : draw_log_gamma(sizes(j), rng) - draw_log_gamma(st.m * st.gamma(j), rng);
  }
  step_s(st, rng);
  draw_nonallocated_atoms(st, base, rng);
}

ChainOutput run_conditional(const GroupedDataset& data, const SamplerConfig& config, const Priors& priors) {
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
  ConditionalState st = init_conditional(data, config, priors, rng);
  std::vector<ClusterSuffStats> obs =
      priors.regression ? observation_stats(residualize(data, st.beta).data) : observation_stats(data);

  ChainOutput out;
  out.algorithm = Algorithm::kConditional;
  out.d = data.d();
  out.base = priors.base;
  out.records.reserve((config.iterations - config.burn_in) / config.thin + 1);
  auto freeze_adaptation = [&st]() {
    st.m_scale.freeze();
    st.m_scale.reset_counts();
    for (auto& g : st.gamma_scale) {
      g.freeze();
      g.reset_counts();
    }
  };
  if (config.burn_in == 0) freeze_adaptation();

  for (int it = 1; it <= config.iterations; ++it) {
    try {
      step_allocations(st, obs, config.prior_only, rng);
      step_tau(st, obs, priors.base, config.prior_only, rng);
      if (priors.regression && !config.prior_only) {
        std::vector<NormalComponent> comps(st.m);
        for (int h = 0; h < st.m; ++h) comps[h] = {st.mu(h), st.sigma_sq(h)};
        for (int j = 0; j < st.d(); ++j) {
          st.beta[j] = beta_full_conditional_draw(data, st.c, comps, *priors.regression, j, rng);
        }
        obs = observation_stats(residualize(data, st.beta).data);
      }
      step_s(st, rng);
      if (!priors.fix_lambda) step_lambda(st, priors.hyper, rng);
      refresh_nonallocated(st, priors.base, rng);
      step_u(st, rng);
      step_m(st, config, rng);
      if (!priors.fix_gamma) step_gamma(st, priors.hyper, rng);
      complete_weights(st, priors.base, rng);
#ifndef NDEBUG
      st.check_invariants();
#endif
    } catch (const NumericalError& e) {
      throw NumericalError("iteration " + std::to_string(it) + ": " + e.what());
    }

    if (it == config.burn_in) freeze_adaptation();
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      IterationRecord rec;
      rec.iter = it;
      rec.k = st.k;
      rec.m = st.m;
      rec.lambda = st.lambda;
      rec.gamma = st.gamma;
      rec.log_u = st.log_u;
      rec.u = st.log_u.array().exp();
      if (config.keep_allocations) rec.allocations = st.c;
      rec.mu = st.mu;
      rec.sigma_sq = st.sigma_sq;
      rec.log_s = st.log_s;
      rec.s = st.log_s.array().exp();
      rec.beta = st.beta;
      out.records.push_back(std::move(rec));
    }
  }
  out.m_acceptance = st.m_scale.acceptance_rate();
  out.gamma_acceptance = VectorXd(st.d());
  for (int j = 0; j < st.d(); ++j) out.gamma_acceptance(j) = st.gamma_scale[j].acceptance_rate();
  out.m_cap_hits = st.m_cap_hits;
  return out;
}

}  // namespace hmfm
