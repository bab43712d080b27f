// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <numeric>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <doctest.h>

#include "hmfm/prior_calculus.hpp"
#include "oracles.hpp"

using namespace hmfm;

namespace {

VecFdpParams params2(double lambda, double g1, double g2) { return VecFdpParams(lambda, (VectorXd(2) << g1, g2).finished()); }

double kappa_quadrature(double u, int n, double gamma) {
  boost::math::quadrature::exp_sinh<double> q;
  auto f = [&](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp(-u * s + (n + gamma - 1.0) * std::log(s) - s - std::lgamma(gamma));
  };
  return q.integrate(f, 1e-13);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double v = 0.0;
  for (double xi : x) v += (xi - m) * (xi - m);
  return {m, std::sqrt(v / (n - 1.0) / n)};
}

}  // namespace

TEST_SUITE("prior_calculus") {

TEST_CASE("psi closed form") {
  CHECK(psi(0.0, 2.7) == doctest::Approx(1.0));
  CHECK(psi(1.0, 1.0) == doctest::Approx(0.5));
  CHECK(psi(3.0, 2.0) == doctest::Approx(0.0625));
  CHECK_THROWS_AS(psi(-1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(psi(1.0, 0.0), std::domain_error);
}

TEST_CASE("psi is a decreasing Laplace transform") {
  for (double g : {0.1, 1.0, 3.0}) {
    double prev = 1.0;
    for (double u = 0.0; u < 50.0; u += 0.37) {
      const double p = psi(u, g);
      CHECK(p > 0.0);
      CHECK(p <= prev);
      prev = p;
    }
    CHECK(psi(2.0, g) == doctest::Approx(kappa_quadrature(2.0, 0, g)).epsilon(1e-8));
  }
}

TEST_CASE("kappa matches quadrature of the gamma Laplace moment") {
  CHECK(std::exp(log_kappa(0.0, 0, 1.3)) == doctest::Approx(1.0));
  CHECK(std::exp(log_kappa(1.0, 2, 1.0)) == doctest::Approx(0.25));
  CHECK(std::exp(log_kappa(0.0, 1, 3.0)) == doctest::Approx(3.0));
  for (double u : {0.0, 0.5, 1.0, 5.0}) {
    for (int n = 0; n <= 5; ++n) {
      for (double g : {0.1, 1.0, 3.0}) {
        CAPTURE(u);
        CAPTURE(n);
        CAPTURE(g);
        CHECK(std::exp(log_kappa(u, n, g)) == doctest::Approx(kappa_quadrature(u, n, g)).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("Psi closed form against the series") {
  VecFdpParams p = params2(2.0, 1.0, 1.0);
  CHECK(log_psi_big(1, VectorXd::Zero(2), p) == doctest::Approx(std::log(3.0)));
  CHECK(log_psi_big(0, VectorXd::Zero(2), p) == doctest::Approx(0.0));
  Rng rng(7);
  std::uniform_real_distribution<double> unif(0.0, 4.0);
  for (double lambda : {0.5, 2.0, 10.0}) {
    for (int k = 0; k <= 5; ++k) {
      p = params2(lambda, 0.3 + unif(rng), 0.3 + unif(rng));
      const VectorXd u = (VectorXd(2) << unif(rng), unif(rng)).finished();
      const double pb = std::exp(log_psi_bar(u, p.gamma));
      const double series = oracle::log_psi_series(k, pb, lambda);
      CHECK(std::abs(log_psi_big(k, u, p) - series) <= 1e-10 * std::max(1.0, std::abs(series)));
    }
  }
}

TEST_CASE("generalized factorial coefficients") {
  const GfcTable t1(4, 0.7);
  CHECK(t1.abs(1, 1) == doctest::Approx(0.7));
  const GfcTable t(2, 1.0);
  CHECK(t.abs(2, 1) == doctest::Approx(2.0));
  CHECK(t.abs(2, 2) == doctest::Approx(1.0));
  CHECK_THROWS(GfcTable(-1, 1.0));
  for (double g : {0.05, 0.5, 1.0, 2.5}) {
    const GfcTable tab(10, g);
    CHECK(tab.abs(0, 0) == doctest::Approx(1.0));
    for (int n = 1; n <= 10; ++n) {
      CHECK(tab.abs(n, 0) == 0.0);
      CHECK(tab.log_abs(n, n) == doctest::Approx(n * std::log(g)).epsilon(1e-12));
      double row = 0.0;
      for (int k = 1; k <= n; ++k) {
        CAPTURE(n);
        CAPTURE(k);
        CHECK(std::abs(tab.log_abs(n, k) - std::log(oracle::gfc_brute(n, k, g))) < 1e-10);
        row += tab.abs(n, k) * std::exp(std::lgamma(13.0) - std::lgamma(13.0 - k));
      }
      // weighting by the falling factorial (12)_k gives the rising factorial (12 g)_n
      CHECK(std::log(row) == doctest::Approx(std::lgamma(12 * g + n) - std::lgamma(12 * g)).epsilon(1e-10));
    }
  }
}

TEST_CASE("pEPPF values and normalization") {
  CHECK(log_peppf(GroupCounts((MatrixXi(1, 1) << 1).finished()), VecFdpParams(1.3, VectorXd::Constant(1, 0.4))) ==
        doctest::Approx(0.0).epsilon(1e-9));
  for (double g : {0.2, 1.0, 5.0}) {
    const double v = log_peppf(GroupCounts((MatrixXi(2, 1) << 1, 1).finished()), params2(1.0, g, g));
    CHECK(std::exp(v) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-9));
  }
  auto total = [](const std::vector<int>& n, const VecFdpParams& p) {
    std::vector<int> group_of;
    for (std::size_t j = 0; j < n.size(); ++j) group_of.insert(group_of.end(), n[j], int(j));
    double s = 0.0;
    oracle::for_each_set_partition(int(group_of.size()), [&](const std::vector<int>& lab, int k) {
      s += std::exp(log_peppf(GroupCounts(oracle::counts_of(lab, group_of, k, p.d())), p));
    });
    return s;
  };
  CHECK(total({2, 2}, params2(2.0, 1.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(total({2, 2}, params2(0.7, 0.3, 2.0)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(total({4}, VecFdpParams(3.0, VectorXd::Constant(1, 0.5))) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("pEPPF integral agrees with the series over M") {
  Rng rng(11);
  std::uniform_real_distribution<double> unif(0.2, 3.0);
  const std::vector<MatrixXi> configs = {
      (MatrixXi(2, 2) << 2, 0, 1, 3).finished(),
      (MatrixXi(2, 3) << 1, 1, 0, 0, 2, 2).finished(),
      (MatrixXi(3, 2) << 2, 1, 0, 3, 1, 1).finished(),
      (MatrixXi(1, 3) << 4, 1, 2).finished(),
  };
  for (const auto& c : configs) {
    VectorXd g(c.rows());
    for (auto& x : g) x = unif(rng);
    const double lambda = 3.0 * unif(rng);
    const double a = log_peppf(GroupCounts(c), VecFdpParams(lambda, g));
    CHECK(a == doctest::Approx(oracle::log_peppf_series(c, lambda, g)).epsilon(1e-8));
  }
}

TEST_CASE("pEPPF for many groups uses Monte Carlo with a reported error") {
  const MatrixXi c = (MatrixXi(4, 2) << 1, 1, 2, 0, 0, 1, 1, 1).finished();
  const VectorXd g = VectorXd::Constant(4, 0.8);
  const VIntegral v = log_v_integral(c.rowwise().sum(), 2, VecFdpParams(2.0, g));
  CHECK(v.rel_error > 0.0);
  CHECK(v.rel_error < 0.02);
  const double local = 5 * (std::lgamma(1.8) - std::lgamma(0.8)) + (std::lgamma(2.8) - std::lgamma(0.8));
  const double oracle_v = oracle::log_peppf_series(c, 2.0, g) - local;
  CHECK(std::abs(v.log_value - oracle_v) < 4.0 * v.rel_error);
}

TEST_CASE("prior on K") {
  CHECK(prior_k({1, 1}, params2(1.0, 1.0, 1.0), 1) == doctest::Approx(0.632121).epsilon(1e-6));
  CHECK_THROWS_AS(prior_k({1, 1}, params2(1.0, 1.0, 1.0), 3), std::domain_error);
  CHECK_THROWS_AS(prior_k({1, 1}, params2(1.0, 1.0, 1.0), 0), std::domain_error);
  struct Case {
    std::vector<int> n;
    double lambda, g1, g2;
  };
  for (const Case& c : {Case{{3, 3}, 2.0, 1.0, 1.0}, Case{{2, 1}, 2.0, 0.5, 0.5}, Case{{4, 2}, 0.3, 2.0, 0.1},
                        Case{{1, 5}, 9.0, 0.05, 1.5}}) {
    const VecFdpParams p = params2(c.lambda, c.g1, c.g2);
    const auto pmf = prior_k_pmf(c.n, p);
    CHECK(std::accumulate(pmf.begin(), pmf.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-8));
    const auto ref = oracle::prior_k_enumerated(c.n, c.lambda, p.gamma);
    for (std::size_t k = 0; k < pmf.size(); ++k) CHECK(pmf[k] == doctest::Approx(ref[k]).epsilon(1e-8));
  }
}

TEST_CASE("prior on K for one group reduces to the MFM law") {
  for (int n1 = 1; n1 <= 6; ++n1) {
    const VectorXd g = VectorXd::Constant(1, 0.7);
    const auto ref = oracle::prior_k_enumerated({n1}, 2.5, g);
    const auto pmf = prior_k_pmf({n1}, VecFdpParams(2.5, g));
    REQUIRE(pmf.size() == ref.size());
    for (std::size_t k = 0; k < pmf.size(); ++k) CHECK(pmf[k] == doctest::Approx(ref[k]).epsilon(1e-8));
    // the two-group formula with an empty second group agrees
    const auto pmf2 = prior_k_pmf({n1, 0}, params2(2.5, 0.7, 1.9));
    for (std::size_t k = 0; k < pmf.size(); ++k) CHECK(pmf2[k] == doctest::Approx(ref[k]).epsilon(1e-8));
  }
}

TEST_CASE("prior on K agrees with forward simulation") {
  const VecFdpParams p = params2(2.0, 0.5, 0.5);
  Rng rng(99);
  const int draws = 100000;
  const auto freq = oracle::prior_k_simulated({2, 1}, 2.0, p.gamma, draws, rng);
  const double pk = prior_k({2, 1}, p, 2);
  CHECK(std::abs(freq[1] - pk) < 3.0 * std::sqrt(pk * (1.0 - pk) / draws));
}

TEST_CASE("correlation limits") {
  CHECK(correlation(params2(1.0, 1e-6, 1e-6), 0, 1) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-3));
  CHECK(correlation(params2(5.0, 1e4, 1e4), 0, 1) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK_THROWS(correlation(params2(1.0, 1.0, 1.0), 0, 0));
}

TEST_CASE("correlation agrees with Monte Carlo and does not depend on the set") {
  const VecFdpParams p = params2(2.0, 1.0, 1.0);
  const double rho = correlation(p, 0, 1);
  const int draws = 100000;
  for (double pa : {0.5, 0.682689492137086}) {  // A = (-inf, 0] and A = (-1, 1) under N(0,1)
    Rng rng(5);
    std::vector<double> x(draws), y(draws);
    for (int s = 0; s < draws; ++s) {
      const VectorXd v = oracle::measure_draw(2.0, p.gamma, pa, rng);
      x[s] = v(0);
      y[s] = v(1);
    }
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / draws;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / draws;
    double sxy = 0, sxx = 0, syy = 0;
    for (int s = 0; s < draws; ++s) {
      sxy += (x[s] - mx) * (y[s] - my);
      sxx += (x[s] - mx) * (x[s] - mx);
      syy += (y[s] - my) * (y[s] - my);
    }
    const double r = sxy / std::sqrt(sxx * syy);
    const double se = (1.0 - r * r) / std::sqrt(draws - 3.0);
    CAPTURE(pa);
    CHECK(std::abs(r - rho) < 3.0 * se);
  }
}

TEST_CASE("mixed moments") {
  const VecFdpParams p = params2(1.0, 1.0, 1.0);
  CHECK(mixed_moment(1, 0, 0.3, p) == doctest::Approx(0.3));
  CHECK(mixed_moment(0, 1, 0.8, p) == doctest::Approx(0.8));
  CHECK(mixed_moment(1, 1, 0.5, p) ==
        doctest::Approx(0.5 * prior_k({1, 1}, p, 1) + 0.25 * prior_k({1, 1}, p, 2)));
  CHECK(mixed_covariance(0.5, 0.5, 0.5, 1.0) == doctest::Approx(0.25 * (1.0 - std::exp(-1.0))));

  const VecFdpParams q = params2(2.0, 0.7, 1.4);
  Rng rng(3);
  const int draws = 200000;
  std::vector<double> xy(draws), x2y(draws);
  for (int s = 0; s < draws; ++s) {
    const VectorXd v = oracle::measure_draw(2.0, q.gamma, 0.4, rng);
    xy[s] = v(0) * v(1);
    x2y[s] = v(0) * v(0) * v(1);
  }
  const MeanSe a = mean_se(xy);
  const MeanSe b = mean_se(x2y);
  CHECK(std::abs(mixed_moment(1, 1, 0.4, q) - a.mean) < 3.0 * a.se);
  CHECK(std::abs(mixed_moment(2, 1, 0.4, q) - b.mean) < 3.0 * b.se);
  CHECK(std::abs((a.mean - 0.16) - mixed_covariance(0.4, 0.4, 0.4, 2.0)) < 3.0 * a.se);
}

TEST_CASE("coskewness") {
  CHECK(std::abs(coskewness(params2(1e-8, 1.0, 1.0), 0.5)) < 1e-6);
  CHECK_THROWS(coskewness(params2(1.0, 1.0, 1.0), 0.0));
  for (double pa : {0.2, 0.5, 0.8}) {
    const VecFdpParams p = params2(2.0, 1.0, 1.0);
    Rng rng(17);
    const int draws = 1000000;
    std::vector<double> t(draws);
    for (int s = 0; s < draws; ++s) {
      const VectorXd v = oracle::measure_draw(2.0, p.gamma, pa, rng);
      t[s] = (v(0) - pa) * (v(0) - pa) * (v(1) - pa);
    }
    const MeanSe m = mean_se(t);
    const double var = prior_k({2, 0}, p, 1) * pa * (1.0 - pa);
    const double scale = var * std::sqrt(var);
    const double c = coskewness(p, pa);
    CAPTURE(pa);
    CHECK(std::abs(c - m.mean / scale) < 3.0 * m.se / scale);
    if (std::abs(m.mean) > 4.0 * m.se) CHECK((c > 0) == (m.mean > 0));
  }
}

TEST_CASE("elicitation") {
  const HyperPriorParams h = elicit({25.0, 3.0, 0.00027, 15});
  CHECK(h.a_gamma == doctest::Approx(13.89).epsilon(1e-3));
  CHECK(h.a_lambda == doctest::Approx(208.33).epsilon(1e-4));
  CHECK(h.b_lambda == doctest::Approx(8.33).epsilon(1e-3));
  CHECK(h.b_gamma == doctest::Approx(13.8889 / (0.00027 * 25.0)).epsilon(1e-4));
  const HyperPriorParams one = elicit({1.0, 1.0, 1.0, 1});
  CHECK(one.a_gamma == 1.0);
  CHECK(one.b_gamma == 1.0);
  CHECK(one.a_lambda == 1.0);
  CHECK(one.b_lambda == 1.0);
  const HyperPriorParams e = elicit({5.0, 5.0, 0.5, 2});
  CHECK(e.a_gamma == doctest::Approx(2.5));
  CHECK(e.b_gamma == doctest::Approx(1.0));
  CHECK(e.a_lambda == doctest::Approx(5.0));
  CHECK(e.b_lambda == doctest::Approx(1.0));
  CHECK_THROWS(elicit({0.0, 1.0, 1.0, 1}));
  CHECK_THROWS(elicit({1.0, 1.0, 1.0, 0}));
}

TEST_CASE("prior simulation") {
  Rng rng(1);
  int ones = 0;
  for (int s = 0; s < 10000; ++s) ones += prior_simulate(params2(1e-8, 1.0, 1.0), rng).m == 1;
  CHECK(ones >= 9999);
  const int draws = 100000;
  double sum = 0.0;
  for (int s = 0; s < draws; ++s) sum += prior_simulate(params2(3.0, 1.0, 1.0), rng).m;
  CHECK(std::abs(sum / draws - 4.0) < 3.0 * std::sqrt(3.0 / draws));
  const PriorRealization r = prior_simulate(params2(3.0, 0.5, 2.0), rng);
  CHECK(r.weights.rows() == 2);
  CHECK(r.weights.cols() == r.m);
  CHECK((r.weights.array() > 0).all());
  const double all = r.measure(0, [](double) { return true; });
  CHECK(all == doctest::Approx(1.0));
}

TEST_CASE("parameter validation") {
  CHECK_THROWS(VecFdpParams(0.0, VectorXd::Ones(2)).validate());
  CHECK_THROWS(VecFdpParams(1.0, VectorXd()).validate());
  CHECK_THROWS(VecFdpParams(1.0, (VectorXd(2) << 1.0, -1.0).finished()).validate());
  CHECK_THROWS(GroupCounts((MatrixXi(2, 2) << 1, 0, 2, 0).finished()).validate());
  CHECK_NOTHROW(GroupCounts((MatrixXi(2, 2) << 1, 0, 2, 1).finished()).validate());
}

}  // TEST_SUITE
