// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include "hmfm/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "hmfm/likelihood.hpp"
#include "hmfm/prior_calculus.hpp"

namespace hmfm {

namespace {

void require_nonempty(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// members[h] = indices of cluster h
std::vector<std::vector<int>> members_of(const Partition& labels) {
  Partition canon = labels;
  const int k = canonicalize(canon);
  std::vector<std::vector<int>> members(k);
  for (std::size_t i = 0; i < canon.size(); ++i) members[canon[i]].push_back(static_cast<int>(i));
  return members;
}

void accumulate(MatrixXd& acc, const Partition& labels) {
  for (const auto& m : members_of(labels)) {
    for (int a : m) {
      for (int b : m) acc(a, b) += 1.0;
    }
  }
}

}  // namespace

MatrixXd similarity(const std::vector<Partition>& partitions) {
  require_nonempty(!partitions.empty(), "similarity: no retained iterations");
  const auto n = static_cast<Eigen::Index>(partitions.front().size());
  MatrixXd acc = MatrixXd::Zero(n, n);
  for (const auto& p : partitions) {
    if (static_cast<Eigen::Index>(p.size()) != n) throw std::invalid_argument("similarity: ragged partitions");
    accumulate(acc, p);
  }
  return acc / static_cast<double>(partitions.size());
}

std::vector<Partition> partitions_of(const ChainOutput& chain) {
  std::vector<Partition> out;
  out.reserve(chain.records.size());
  for (const auto& r : chain.records) out.push_back(r.allocations);
  return out;
}

MatrixXd similarity(const ChainOutput& chain) { return similarity(partitions_of(chain)); }

MatrixXd similarity(const std::vector<ChainOutput>& chains) {
  std::vector<Partition> all;
  for (const auto& c : chains) {
    auto p = partitions_of(c);
    all.insert(all.end(), p.begin(), p.end());
  }
  return similarity(all);
}

MatrixXd coclustering_matrix(const Partition& labels) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  MatrixXd m = MatrixXd::Zero(n, n);
  accumulate(m, labels);
  return m;
}

Partition PartitionEstimate::group(const std::vector<int>& offsets, int j) const {
  return Partition(labels.begin() + offsets[j], labels.begin() + offsets[j + 1]);
}

double vi_score(const Partition& labels, const MatrixXd& sim) {
  const auto members = members_of(labels);
  const auto n = sim.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw std::invalid_argument("vi_score: size mismatch");
  const VectorXd row_sums = sim.rowwise().sum();
  double score = 0.0;
  for (Eigen::Index l = 0; l < n; ++l) score += std::log2(row_sums(l));
  for (const auto& m : members) {
    const double size_term = std::log2(static_cast<double>(m.size()));
    for (int l : m) {
      double joint = 0.0;
      for (int k : m) joint += sim(l, k);
      score += size_term - 2.0 * std::log2(joint);
    }
  }
  return score;
}

PartitionEstimate min_vi(const std::vector<Partition>& partitions, const MatrixXd& sim) {
  require_nonempty(!partitions.empty(), "min_vi: no retained iterations");
  std::map<Partition, double> seen;
  Partition best_canon;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& p : partitions) {
    Partition canon = p;
    canonicalize(canon);
    auto it = seen.find(canon);
    if (it != seen.end()) continue;
    const double s = vi_score(canon, sim);
    seen.emplace(canon, s);
    if (s < best_score) {
      best_score = s;
      best_canon = std::move(canon);
    }
  }
  PartitionEstimate est;
  est.labels = best_canon;
  est.k = canonicalize(est.labels);
  return est;
}

double ari(const Partition& truth, const Partition& est) {
  if (truth.size() != est.size()) throw std::invalid_argument("ari: length mismatch");
  const double n = static_cast<double>(truth.size());
  Partition a = truth;
  Partition b = est;
  const int ka = canonicalize(a);
  const int kb = canonicalize(b);
  MatrixXd table = MatrixXd::Zero(ka, kb);
  for (std::size_t i = 0; i < a.size(); ++i) table(a[i], b[i]) += 1.0;
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0;
  for (int i = 0; i < ka; ++i) {
    for (int j = 0; j < kb; ++j) index += pairs(table(i, j));
  }
  double sa = 0.0;
  double sb = 0.0;
  for (int i = 0; i < ka; ++i) sa += pairs(table.row(i).sum());
  for (int j = 0; j < kb; ++j) sb += pairs(table.col(j).sum());
  const double expected = sa * sb / pairs(n);
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double cce(const MatrixXd& truth, const MatrixXd& sim) {
  if (truth.rows() != sim.rows() || truth.cols() != sim.cols()) throw std::invalid_argument("cce: shape mismatch");
  return (truth - sim).cwiseAbs().sum() / static_cast<double>(truth.rows());
}

std::vector<double> default_grid(const std::vector<double>& values, int points) {
  require_nonempty(!values.empty() && points >= 2, "default_grid: need values and at least two points");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = values.size() > 1 ? std::sqrt(var / (values.size() - 1)) : 1.0;
  const double lo = *lo_it - 4.0 * sd;
  const double hi = *hi_it + 4.0 * sd;
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) grid[i] = lo + (hi - lo) * i / (points - 1);
  return grid;
}

namespace {

void add_record_density(const IterationRecord& r, Algorithm algo, const NigParams& base, int j,
                        const std::vector<double>& grid, std::vector<double>& acc) {
  if (algo == Algorithm::kConditional) {
    const double top = r.log_s.row(j).maxCoeff();
    const VectorXd scaled = (r.log_s.row(j).array() - top).exp().transpose();
    const double total = scaled.sum();
    for (int h = 0; h < r.m; ++h) {
      const double w = scaled(h) / total;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        acc[g] += w * std::exp(log_normal_pdf(grid[g], r.mu(h), r.sigma_sq(h)));
      }
    }
    return;
  }
  const int k = r.k;
  const double log_pb = log_psi_bar_log_u(r.log_u, r.gamma);
  const double x = r.lambda * std::exp(log_pb);
  std::vector<double> w(k + 1);
  for (int h = 0; h < k; ++h) w[h] = r.counts(j, h) + r.gamma(j);
  w[k] = std::exp(log_pb) * r.gamma(j) * r.lambda * (k + 1.0 + x) / (k + x);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (int h = 0; h <= k; ++h) {
    const NigParams& post = h < k ? r.cluster_post[h] : base;
    const double wh = w[h] / total;
    for (std::size_t g = 0; g < grid.size(); ++g) acc[g] += wh * std::exp(log_predictive(grid[g], post));
  }
}

}  // namespace

std::vector<double> predictive_density(const std::vector<ChainOutput>& chains, int j,
                                       const std::vector<double>& grid) {
  require_nonempty(!grid.empty(), "predictive_density: empty grid");
  std::vector<double> acc(grid.size(), 0.0);
  std::size_t count = 0;
  for (const auto& c : chains) {
    if (j < 0 || j >= c.d) throw std::out_of_range("predictive_density: group index out of range");
    for (const auto& r : c.records) {
      add_record_density(r, c.algorithm, c.base, j, grid, acc);
      ++count;
    }
  }
  require_nonempty(count > 0, "predictive_density: no retained iterations");
  for (double& v : acc) v /= static_cast<double>(count);
  return acc;
}

std::vector<double> predictive_density(const ChainOutput& chain, int j, const std::vector<double>& grid) {
  return predictive_density(std::vector<ChainOutput>{chain}, j, grid);
}

double trapezoid(const std::vector<double>& grid, const std::vector<double>& f) {
  double s = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) s += 0.5 * (f[i] + f[i - 1]) * (grid[i] - grid[i - 1]);
  return s;
}

PredictiveScore predictive_score(const std::function<double(double)>& true_density, const std::vector<double>& est,
                                 const std::vector<double>& grid) {
  if (est.size() != grid.size() || grid.size() < 2) throw std::invalid_argument("predictive_score: size mismatch");
  std::vector<double> truth(grid.size());
  std::vector<double> diff(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    truth[i] = true_density(grid[i]);
    diff[i] = std::abs(truth[i] - est[i]);
  }
  PredictiveScore ps;
  ps.value = trapezoid(grid, diff);
  ps.coverage_ok = 1.0 - trapezoid(grid, truth) < 1e-4;
  return ps;
}

}  // namespace hmfm
