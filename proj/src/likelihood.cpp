// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "hmfm/likelihood.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hmfm/numeric.hpp"

namespace hmfm {

GroupedDataset GroupedDataset::from_values(const std::vector<std::vector<double>>& values) {
  GroupedDataset out;
  out.groups.resize(values.size());
  for (std::size_t j = 0; j < values.size(); ++j) {
    out.groups[j].reserve(values[j].size());
    for (double v : values[j]) out.groups[j].push_back(Observation{{v}, VectorXd()});
  }
  return out;
}

int GroupedDataset::total() const {
  int t = 0;
  for (const auto& g : groups) t += static_cast<int>(g.size());
  return t;
}

VectorXi GroupedDataset::group_sizes() const {
  VectorXi n(d());
  for (int j = 0; j < d(); ++j) n(j) = this->n(j);
  return n;
}

std::vector<int> GroupedDataset::offsets() const {
  std::vector<int> off(d() + 1, 0);
  for (int j = 0; j < d(); ++j) off[j + 1] = off[j] + n(j);
  return off;
}

int GroupedDataset::covariate_dim() const {
  for (const auto& g : groups) {
    if (!g.empty()) return static_cast<int>(g.front().x.size());
  }
  return 0;
}

std::vector<double> GroupedDataset::observation_means() const {
  std::vector<double> out;
  out.reserve(total());
  for (const auto& g : groups) {
    for (const auto& o : g) {
      double s = 0.0;
      for (double v : o.y) s += v;
      out.push_back(s / o.marks());
    }
  }
  return out;
}

std::vector<double> GroupedDataset::all_marks() const {
  std::vector<double> out;
  for (const auto& g : groups) {
    for (const auto& o : g) out.insert(out.end(), o.y.begin(), o.y.end());
  }
  return out;
}

void GroupedDataset::validate(bool require_nonempty) const {
  if (groups.empty()) throw DataError("dataset has no groups");
  const int r = covariate_dim();
  for (int j = 0; j < d(); ++j) {
    if (require_nonempty && groups[j].empty()) {
      throw DataError("group " + std::to_string(j + 1) + " is empty");
    }
    for (int i = 0; i < n(j); ++i) {
      const auto& o = groups[j][i];
      if (o.y.empty()) throw DataError("observation without responses");
      if (o.x.size() != r) throw DataError("ragged covariate rows");
      for (double v : o.y) {
        if (!std::isfinite(v)) throw DataError("non-finite response");
      }
    }
  }
}

void NigParams::validate() const {
  if (!(k0 > 0 && nu0 > 0 && sigma0_sq > 0) || !std::isfinite(mu0)) {
    throw std::domain_error("NigParams: k0, nu0, sigma0_sq must be > 0");
  }
}

ClusterSuffStats ClusterSuffStats::of(const std::vector<double>& ys) {
  ClusterSuffStats s;
  for (double v : ys) s.add(v);
  return s;
}

void RegressionSpec::validate() const {
  if (sigma_beta0.rows() != beta0.size() || sigma_beta0.cols() != beta0.size()) {
    throw std::domain_error("RegressionSpec: covariance dimension mismatch");
  }
  if (!sigma_beta0.isApprox(sigma_beta0.transpose())) {
    throw std::domain_error("RegressionSpec: covariance must be symmetric");
  }
  Eigen::LLT<MatrixXd> llt(sigma_beta0);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("RegressionSpec: covariance must be positive definite");
  }
}

std::vector<ClusterSuffStats> observation_stats(const GroupedDataset& data) {
  std::vector<ClusterSuffStats> out;
  out.reserve(data.total());
  for (const auto& g : data.groups) {
    for (const auto& o : g) out.push_back(ClusterSuffStats::of(o.y));
  }
  return out;
}

// ---------------------------------------------------------------------------

NigParams nig_posterior(const ClusterSuffStats& stats, const NigParams& prior) {
  if (stats.count == 0) return prior;
  const double n = stats.count;
  const double mean = stats.sum / n;
  NigParams post;
  post.k0 = prior.k0 + n;
  post.mu0 = (prior.k0 * prior.mu0 + stats.sum) / post.k0;
  post.nu0 = prior.nu0 + n;
  const double ss = std::max(0.0, stats.sum_sq - stats.sum * mean);
  const double dev = mean - prior.mu0;
  post.sigma0_sq = (prior.nu0 * prior.sigma0_sq + ss + prior.k0 * n * dev * dev / post.k0) / post.nu0;
  return post;
}

double log_marginal(const ClusterSuffStats& stats, const NigParams& prior) {
  if (stats.count == 0) return 0.0;
  const NigParams post = nig_posterior(stats, prior);
  const double n = stats.count;
  return -0.5 * n * std::log(std::numbers::pi) + std::lgamma(0.5 * post.nu0) -
         std::lgamma(0.5 * prior.nu0) + 0.5 * std::log(prior.k0 / post.k0) +
         0.5 * prior.nu0 * std::log(prior.nu0 * prior.sigma0_sq) -
         0.5 * post.nu0 * std::log(post.nu0 * post.sigma0_sq);
}

NormalComponent nig_draw(const NigParams& post, Rng& rng) {
  const double precision = draw_gamma(0.5 * post.nu0, 0.5 * post.nu0 * post.sigma0_sq, rng);
  NormalComponent c;
  c.sigma_sq = 1.0 / precision;
  c.mu = post.mu0 + std::sqrt(c.sigma_sq / post.k0) * draw_normal(rng);
  return c;
}

double log_predictive(double y, const NigParams& post) {
  const double nu = post.nu0;
  const double scale_sq = post.sigma0_sq * (1.0 + 1.0 / post.k0);
  const double z = (y - post.mu0) * (y - post.mu0) / (nu * scale_sq);
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
         0.5 * std::log(nu * std::numbers::pi * scale_sq) - 0.5 * (nu + 1.0) * std::log1p(z);
}

double log_normal_pdf(double y, double mu, double sigma_sq) {
  const double z = y - mu;
  return -0.5 * std::log(2.0 * std::numbers::pi * sigma_sq) - 0.5 * z * z / sigma_sq;
}

double log_normal_stats(const ClusterSuffStats& stats, double mu, double sigma_sq) {
  const double n = stats.count;
  const double quad = stats.sum_sq - 2.0 * mu * stats.sum + n * mu * mu;
  return -0.5 * n * std::log(2.0 * std::numbers::pi * sigma_sq) - 0.5 * quad / sigma_sq;
}

// ---------------------------------------------------------------------------

ResidualizedData residualize(const GroupedDataset& data, const std::vector<VectorXd>& beta) {
  const int r = data.covariate_dim();
  if (r == 0) throw DataError("residualize: dataset has no covariates");
  if (static_cast<int>(beta.size()) != data.d()) throw DataError("residualize: one beta per group required");
  ResidualizedData out{data, data};
  for (int j = 0; j < data.d(); ++j) {
    if (beta[j].size() != r) throw DataError("residualize: beta dimension mismatch");
    for (auto& o : out.data.groups[j]) {
      const double shift = o.x.dot(beta[j]);
      for (double& v : o.y) v -= shift;
    }
  }
  return out;
}

GroupedDataset restore(const ResidualizedData& res) { return res.original; }

VectorXd beta_full_conditional_draw(const GroupedDataset& data, const std::vector<int>& allocations,
                                    const std::vector<NormalComponent>& components,
                                    const RegressionSpec& spec, int j, Rng& rng) {
  const int r = spec.r();
  if (data.covariate_dim() != r) throw DataError("beta draw: covariate dimension mismatch");
  const std::vector<int> off = data.offsets();
  const Eigen::LLT<MatrixXd> prior_llt(spec.sigma_beta0);
  if (prior_llt.info() != Eigen::Success) throw NumericalError("beta draw: prior covariance not SPD");
  const MatrixXd prior_prec = prior_llt.solve(MatrixXd::Identity(r, r));
  MatrixXd prec = prior_prec;
  VectorXd rhs = prior_prec * spec.beta0;
  for (int i = 0; i < data.n(j); ++i) {
    const Observation& o = data.groups[j][i];
    const NormalComponent& comp = components.at(allocations.at(off[j] + i));
    const double h = o.marks();
    double resid = 0.0;
    for (double v : o.y) resid += v - comp.mu;
    prec.noalias() += (h / comp.sigma_sq) * o.x * o.x.transpose();
    rhs.noalias() += (resid / comp.sigma_sq) * o.x;
  }
  const Eigen::LLT<MatrixXd> llt(prec);
  if (llt.info() != Eigen::Success) throw NumericalError("beta draw: singular posterior precision");
  const VectorXd mean = llt.solve(rhs);
  VectorXd z(r);
  for (int k = 0; k < r; ++k) z(k) = draw_normal(rng);
  // prec = L L'  =>  L'^{-1} z ~ N(0, prec^{-1})
  return mean + llt.matrixU().solve(z);
}

CenteredData center_groups(const GroupedDataset& data) {
  CenteredData out{data, std::vector<double>(data.d(), 0.0)};
  for (int j = 0; j < data.d(); ++j) {
    double s = 0.0;
    int cnt = 0;
    for (const auto& o : data.groups[j]) {
      for (double v : o.y) {
        s += v;
        ++cnt;
      }
    }
    if (cnt == 0) continue;
    const double mean = s / cnt;
    out.means[j] = mean;
    for (auto& o : out.data.groups[j]) {
      for (double& v : o.y) v -= mean;
    }
  }
  return out;
}

}  // namespace hmfm
