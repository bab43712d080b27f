// Copyright 2026 The hmfm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "hmfm/bench.hpp"
#include "hmfm/conditional_sampler.hpp"
#include "hmfm/experiments.hpp"
#include "hmfm/io.hpp"
#include "hmfm/marginal_sampler.hpp"
#include "hmfm/postprocess.hpp"
#include "hmfm/prior_calculus.hpp"

namespace fs = std::filesystem;
using namespace hmfm;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::string sig6(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw DataError("cannot write " + p.string());
  return f;
}

VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

VectorXd broadcast(const std::vector<double>& v, int d, const char* what) {
  if (static_cast<int>(v.size()) == d) return to_vector(v);
  if (v.size() == 1) return VectorXd::Constant(d, v.front());
  throw std::invalid_argument(std::string(what) + " needs 1 or d values");
}

// ---------------------------------------------------------------------------

struct FitOptions {
  std::string data;
  std::string algo = "conditional";
  std::string out = "hmfm_out";
  int iters = 2000;
  int burnin = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  int chains = 1;
  bool prior_only = false;
  bool fix_lambda = false;
  bool fix_gamma = false;
  bool center = false;
  double lambda0 = 5.0;
  double vlambda = 5.0;
  double gamma0 = 0.5;
  std::vector<double> hyper;  // a_gamma,b_gamma,a_lambda,b_lambda; overrides the elicitation
  bool gamma_independent = false;
  std::vector<double> lambda;  // starting value (defaults to lambda0)
  std::vector<double> gamma;   // starting values (default gamma0)
  std::string base = "auto";
  double mu0 = 0.0;
  double k0 = 1.0;
  double nu0 = 4.0;
  double sigma0sq = 0.5;
  std::string init = "kmeans";
  int init_clusters = 20;
  bool regression = false;
  double beta0 = 0.0;
  double sigma_beta0 = 1.0;
  int grid_points = 512;
};

void add_fit(CLI::App& app, FitOptions& o) {
  auto* fit = app.add_subcommand("fit", "Run an MCMC sampler on a grouped CSV dataset");
  fit->set_config("--config", "", "Flat key=value configuration file; flags override it");
  fit->add_option("--data", o.data, "CSV with columns group,obs,y[,x1..xr]")->required();
  fit->add_option("--algo", o.algo, "conditional or marginal")->check(CLI::IsMember({"conditional", "marginal"}));
  fit->add_option("--out", o.out, "Output directory");
  fit->add_option("--iters", o.iters, "Total sweeps");
  fit->add_option("--burnin", o.burnin, "Burn-in sweeps");
  fit->add_option("--thin", o.thin, "Thinning stride");
  fit->add_option("--seed", o.seed, "Random seed");
  fit->add_option("--chains", o.chains, "Parallel chains (seed + chain index)");
  fit->add_flag("--prior-only", o.prior_only, "Replace the likelihood by a constant");
  fit->add_flag("--fix-lambda", o.fix_lambda, "Hold lambda at its starting value");
  fit->add_flag("--fix-gamma", o.fix_gamma, "Hold gamma at its starting value");
  fit->add_flag("--center", o.center, "Center responses within each group");
  fit->add_option("--lambda0", o.lambda0, "Prior mean of lambda");
  fit->add_option("--vlambda", o.vlambda, "Prior variance of lambda");
  fit->add_option("--gamma0", o.gamma0, "Prior guess for gamma_j");
  fit->add_option("--hyper", o.hyper, "a_gamma,b_gamma,a_lambda,b_lambda instead of the elicited values")
      ->delimiter(',')
      ->expected(4);
  fit->add_flag("--gamma-independent", o.gamma_independent, "Gamma rate b_gamma instead of b_gamma * lambda");
  fit->add_option("--lambda", o.lambda, "Starting lambda")->expected(1);
  fit->add_option("--gamma", o.gamma, "Starting gamma, one value or d values")->delimiter(',');
  fit->add_option("--base", o.base, "auto or manual base measure")->check(CLI::IsMember({"auto", "manual"}));
  fit->add_option("--mu0", o.mu0, "Base measure mean (manual)");
  fit->add_option("--k0", o.k0, "Base measure mean precision factor (manual)");
  fit->add_option("--nu0", o.nu0, "Base measure degrees of freedom (manual)");
  fit->add_option("--sigma0sq", o.sigma0sq, "Base measure scale (auto and manual)");
  fit->add_option("--init", o.init, "kmeans or one")->check(CLI::IsMember({"kmeans", "one"}));
  fit->add_option("--init-clusters", o.init_clusters, "k-means centers for the starting partition");
  fit->add_flag("--regression", o.regression, "Group-specific regression on the x columns");
  fit->add_option("--beta0", o.beta0, "Prior mean of every regression coefficient");
  fit->add_option("--sigma-beta0", o.sigma_beta0, "Prior variance of every regression coefficient");
  fit->add_option("--grid-points", o.grid_points, "Density grid size");
}

int run_fit(const FitOptions& o) {
  GroupedDataset data = ingest_csv(o.data);
  if (o.center) data = center_groups(data).data;
  const int d = data.d();

  Priors priors;
  if (o.base == "auto") {
    priors.base = auto_base_measure(data, o.sigma0sq);
  } else {
    priors.base = NigParams{o.mu0, o.k0, o.nu0, o.sigma0sq};
  }
  priors.hyper = elicit(ElicitationSpec{o.lambda0, o.vlambda, o.gamma0, d});
  if (!o.hyper.empty()) priors.hyper = HyperPriorParams{o.hyper[0], o.hyper[1], o.hyper[2], o.hyper[3]};
  priors.hyper.gamma_independent = o.gamma_independent;
  priors.init.lambda = o.lambda.empty() ? o.lambda0 : o.lambda.front();
  priors.init.gamma = o.gamma.empty() ? VectorXd::Constant(d, o.gamma0) : broadcast(o.gamma, d, "--gamma");
  priors.fix_lambda = o.fix_lambda;
  priors.fix_gamma = o.fix_gamma;
  if (o.regression) {
    const int r = data.covariate_dim();
    if (r == 0) throw DataError("--regression needs x1..xr columns");
    priors.regression = RegressionSpec{VectorXd::Constant(r, o.beta0), MatrixXd::Identity(r, r) * o.sigma_beta0};
  }

  SamplerConfig cfg;
  cfg.iterations = o.iters;
  cfg.burn_in = o.burnin;
  cfg.thin = o.thin;
  cfg.prior_only = o.prior_only;
  cfg.init = o.init == "one" ? InitPartition::kOneCluster : InitPartition::kKMeans;
  cfg.init_clusters = o.init_clusters;
  cfg.validate();
  if (o.chains < 1) throw std::invalid_argument("--chains must be >= 1");

  const Algorithm algo = algorithm_from_string(o.algo);
  std::vector<ChainOutput> chains(o.chains);
  std::vector<std::exception_ptr> errors(o.chains);
  std::vector<std::thread> workers;
  for (int c = 0; c < o.chains; ++c) {
    workers.emplace_back([&, c]() {
      try {
        SamplerConfig local = cfg;
        local.seed = o.seed + static_cast<std::uint64_t>(c);
        chains[c] = algo == Algorithm::kConditional ? run_conditional(data, local, priors) : run_marginal(data, local, priors);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const fs::path out(o.out);
  fs::create_directories(out);
  for (int c = 0; c < o.chains; ++c) {
    const std::string suffix = o.chains == 1 ? "" : "_chain" + std::to_string(c + 1);
    auto f1 = open_out(out / ("scalars" + suffix + ".csv"));
    write_scalars_csv(f1, chains[c]);
    auto f2 = open_out(out / ("allocations" + suffix + ".csv"));
    write_allocations_csv(f2, chains[c], data);
    if (algo == Algorithm::kConditional) {
      auto f3 = open_out(out / ("components" + suffix + ".csv"));
      write_components_csv(f3, chains[c]);
    }
  }
  const MatrixXd sim = similarity(chains);
  {
    auto f = open_out(out / "similarity.csv");
    write_matrix_csv(f, sim);
  }
  std::vector<Partition> visited;
  for (const auto& c : chains) {
    auto p = partitions_of(c);
    visited.insert(visited.end(), p.begin(), p.end());
  }
  const PartitionEstimate est = min_vi(visited, sim);
  {
    auto f = open_out(out / "partition.csv");
    write_partition_csv(f, est, data);
  }
  const std::vector<double> grid = default_grid(data.all_marks(), o.grid_points);
  for (int j = 0; j < d; ++j) {
    auto f = open_out(out / ("density_" + std::to_string(j + 1) + ".csv"));
    write_density_csv(f, grid, predictive_density(chains, j, grid));
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PriorOptions {
  std::vector<int> n;
  double lambda = 1.0;
  std::vector<double> gamma{1.0};
  int k = 0;
  int j = 1;
  int l = 2;
  double p0a = 0.5;
  std::vector<double> u;
  int n_max = 5;
  std::string counts;
  std::string draw_seed;
};

void add_prior(CLI::App& app, PriorOptions& o, std::string& which) {
  auto* prior = app.add_subcommand("prior", "Evaluate prior quantities of the vector of finite Dirichlet processes");
  prior->require_subcommand(1);
  auto common = [&](CLI::App* s) {
    s->add_option("--lambda", o.lambda, "Poisson intensity")->required();
    s->add_option("--gamma", o.gamma, "Concentrations, comma separated")->delimiter(',');
    s->callback([&which, s]() { which = s->get_name(); });
  };
  auto* kp = prior->add_subcommand("kprior", "P(K = k) for one or two group sizes");
  kp->add_option("--n", o.n, "Group sizes, comma separated")->delimiter(',')->required();
  kp->add_option("--k", o.k, "Single k (default: all)");
  common(kp);
  auto* corr = prior->add_subcommand("corr", "Correlation between two groups");
  corr->add_option("--j", o.j, "First group (1-based)");
  corr->add_option("--l", o.l, "Second group (1-based)");
  common(corr);
  auto* cosk = prior->add_subcommand("cosk", "Coskewness of P_1(A) and P_2(A)");
  cosk->add_option("--p0a", o.p0a, "P0(A)");
  common(cosk);
  auto* mom = prior->add_subcommand("moment", "E[P_1(A)^n1 P_2(A)^n2]");
  mom->add_option("--n", o.n, "Exponents n1,n2")->delimiter(',')->required();
  mom->add_option("--p0a", o.p0a, "P0(A)");
  common(mom);
  auto* psi = prior->add_subcommand("psi", "log Psi(k, u)");
  psi->add_option("--k", o.k, "Number of clusters")->required();
  psi->add_option("--u", o.u, "Auxiliary vector")->delimiter(',')->required();
  common(psi);
  auto* gfc = prior->add_subcommand("gfc", "Generalized factorial coefficients |C(n,k;-gamma)|");
  gfc->add_option("--nmax", o.n_max, "Largest n");
  common(gfc);
  gfc->get_option("--lambda")->required(false);
  auto* pe = prior->add_subcommand("peppf", "log pEPPF of a count configuration");
  pe->add_option("--counts", o.counts, "Rows per group separated by ';', e.g. 1,2;0,1")->required();
  common(pe);
}

int run_prior(const std::string& which, const PriorOptions& o) {
  const auto params_for = [&](int d) {
    VecFdpParams p(o.lambda, broadcast(o.gamma, d, "--gamma"));
    p.validate();
    return p;
  };
  std::ostream& out = std::cout;
  if (which == "kprior") {
    if (o.n.empty() || o.n.size() > 2) throw std::invalid_argument("--n takes one or two sizes");
    const VecFdpParams p = params_for(static_cast<int>(o.n.size()));
    if (o.k > 0) {
      out << o.k << ',' << sig6(prior_k(o.n, p, o.k)) << '\n';
    } else {
      const auto pmf = prior_k_pmf(o.n, p);
      for (std::size_t k = 0; k < pmf.size(); ++k) out << k + 1 << ',' << sig6(pmf[k]) << '\n';
    }
  } else if (which == "corr") {
    const int d = std::max({static_cast<int>(o.gamma.size()), o.j, o.l, 2});
    out << sig6(correlation(params_for(d), o.j - 1, o.l - 1)) << '\n';
  } else if (which == "cosk") {
    out << o.p0a << ',' << sig6(coskewness(params_for(2), o.p0a)) << '\n';
  } else if (which == "moment") {
    if (o.n.size() != 2) throw std::invalid_argument("--n takes two exponents");
    out << o.n[0] << ',' << o.n[1] << ',' << sig6(mixed_moment(o.n[0], o.n[1], o.p0a, params_for(2))) << '\n';
  } else if (which == "psi") {
    const VecFdpParams p = params_for(static_cast<int>(o.u.size()));
    out << o.k << ',' << sig6(log_psi_big(o.k, to_vector(o.u), p)) << '\n';
  } else if (which == "gfc") {
    const GfcTable t(o.n_max, o.gamma.front());
    for (int n = 0; n <= o.n_max; ++n) {
      for (int k = 0; k <= n; ++k) out << n << ',' << k << ',' << sig6(t.abs(n, k)) << '\n';
    }
  } else if (which == "peppf") {
    std::vector<std::vector<double>> rows;
    std::stringstream ss(o.counts);
    std::string row;
    while (std::getline(ss, row, ';')) rows.push_back(parse_number_list(row));
    MatrixXi m(rows.size(), rows.empty() ? 0 : rows.front().size());
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (rows[j].size() != rows.front().size()) throw std::invalid_argument("--counts rows differ in length");
      for (std::size_t k = 0; k < rows[j].size(); ++k) m(j, k) = static_cast<int>(rows[j][k]);
    }
    out << "log_peppf," << sig6(log_peppf(GroupCounts(m), params_for(static_cast<int>(rows.size())))) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateOptions {
  int experiment = 1;
  int n = 0;
  std::uint64_t seed = 1;
  std::string out = "hmfm_data";
};

int run_simulate(const SimulateOptions& o) {
  const ExperimentData ex = generate_experiment(ExperimentSpec{o.experiment, o.n, o.seed});
  const fs::path out(o.out);
  fs::create_directories(out);
  {
    auto f = open_out(out / "data.csv");
    write_dataset_csv(f, ex.data);
  }
  {
    auto f = open_out(out / "truth.csv");
    PartitionEstimate t;
    t.labels = ex.truth;
    write_partition_csv(f, t, ex.data);
  }
  const std::vector<double> grid = default_grid(ex.data.all_marks());
  for (int j = 0; j < ex.data.d(); ++j) {
    std::vector<double> f(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) f[g] = ex.densities[j].pdf(grid[g]);
    auto file = open_out(out / ("true_density_" + std::to_string(j + 1) + ".csv"));
    write_density_csv(file, grid, f);
  }
  return 0;
}

struct MetricsOptions {
  std::string truth;
  std::string partition;
  std::string similarity;
};

int run_metrics(const MetricsOptions& o) {
  const Partition truth = read_labels_csv(o.truth);
  const Partition est = read_labels_csv(o.partition);
  std::cout << "ari," << sig6(ari(truth, est)) << '\n';
  if (!o.similarity.empty()) {
    const MatrixXd sim = read_matrix_csv(o.similarity);
    std::cout << "cce," << sig6(cce(coclustering_matrix(truth), sim)) << '\n';
  }
  return 0;
}

struct BenchOptions {
  std::vector<int> sizes{100, 200, 400, 800, 1600};
  int iters = 200;
  std::uint64_t seed = 1;
};

int run_bench_cmd(const BenchOptions& o) {
  const BenchResult r = run_bench(o.sizes, o.iters, o.seed);
  std::cout << "n,conditional_sec_per_iter,marginal_sec_per_iter\n";
  for (std::size_t i = 0; i < r.conditional.size(); ++i) {
    std::cout << r.conditional[i].n << ',' << sig6(r.conditional[i].seconds_per_iter) << ','
              << sig6(r.marginal[i].seconds_per_iter) << '\n';
  }
  std::cout << "slope_conditional," << sig6(r.slope_conditional) << '\n';
  std::cout << "slope_marginal," << sig6(r.slope_marginal) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical mixtures of finite mixtures for grouped data"};
  app.require_subcommand(1);

  FitOptions fit_opts;
  add_fit(app, fit_opts);

  PriorOptions prior_opts;
  std::string prior_which;
  add_prior(app, prior_opts, prior_which);

  ElicitationSpec el;
  auto* elicit_cmd = app.add_subcommand("elicit", "Hyperparameters from prior mean/variance of lambda and a guess for gamma");
  elicit_cmd->add_option("--lambda0", el.lambda0, "Prior mean of lambda")->required();
  elicit_cmd->add_option("--vlambda", el.v_lambda, "Prior variance of lambda")->required();
  elicit_cmd->add_option("--gamma0", el.gamma0, "Guess for gamma_j")->required();
  elicit_cmd->add_option("--d", el.d, "Number of groups")->required();

  SimulateOptions sim_opts;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a simulation-study dataset");
  sim_cmd->add_option("--experiment", sim_opts.experiment, "1, 2 or 3")->required();
  sim_cmd->add_option("--n", sim_opts.n, "Total sample size (default per design)");
  sim_cmd->add_option("--seed", sim_opts.seed, "Random seed");
  sim_cmd->add_option("--out", sim_opts.out, "Output directory");

  MetricsOptions met_opts;
  auto* met_cmd = app.add_subcommand("metrics", "ARI and co-clustering error against a truth file");
  met_cmd->add_option("--truth", met_opts.truth, "truth.csv (group,obs,cluster)")->required();
  met_cmd->add_option("--partition", met_opts.partition, "partition.csv (group,obs,cluster)")->required();
  met_cmd->add_option("--similarity", met_opts.similarity, "similarity.csv");

  BenchOptions bench_opts;
  auto* bench_cmd = app.add_subcommand("bench", "Per-iteration timing of both samplers");
  bench_cmd->add_option("--sizes", bench_opts.sizes, "Sample sizes")->delimiter(',');
  bench_cmd->add_option("--iters", bench_opts.iters, "Sweeps per size");
  bench_cmd->add_option("--seed", bench_opts.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand("fit")) return run_fit(fit_opts);
    if (app.got_subcommand("prior")) return run_prior(prior_which, prior_opts);
    if (app.got_subcommand("elicit")) {
      const HyperPriorParams h = elicit(el);
      std::cout << "a_gamma," << sig6(h.a_gamma) << '\n'
                << "b_gamma," << sig6(h.b_gamma) << '\n'
                << "a_lambda," << sig6(h.a_lambda) << '\n'
                << "b_lambda," << sig6(h.b_lambda) << '\n';
      return 0;
    }
    if (app.got_subcommand("simulate")) return run_simulate(sim_opts);
    if (app.got_subcommand("metrics")) return run_metrics(met_opts);
    if (app.got_subcommand("bench")) return run_bench_cmd(bench_opts);
  } catch (const DataError& e) {
    std::cerr << "hmfm: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "hmfm: numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "hmfm: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::domain_error& e) {
    std::cerr << "hmfm: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "hmfm: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
