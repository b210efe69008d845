//
// Copyright 2026 The dpregret Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// dpregret: solve, sweep, simulate and validate incentive allocations.
//
// Exit codes: 0 success, 2 config error, 3 validation failure,
// 4 solver non-convergence.
//
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dpregret/errors.hpp"
#include "dpregret/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNonConvergence = 4;

void print_allocation(const char* label, const dpregret::Allocation& a,
                      double objective) {
  std::printf("%s expected_regret=%.17g\n", label, objective);
  for (std::size_t i = 0; i < a.sources(); ++i) {
    std::printf("  source %zu: rho=%.17g mean_c=%.17g c=[", i,
                a.incentives[static_cast<Eigen::Index>(i)], a.coeffs[i].mean());
    for (Eigen::Index j = 0; j < a.coeffs[i].size(); ++j) {
      std::printf(j ? ", %.6f" : "%.6f", a.coeffs[i][j]);
    }
    std::printf("]\n");
  }
}

void print_stats(const char* label, const dpregret::RegretStats& s,
                 double analytic) {
  std::printf(
      "%-8s analytic=%.10g mean=%.10g se=%.3g std=%.10g median=%.10g "
      "q25=%.10g q75=%.10g z=%.3f\n",
      label, analytic, s.mean, s.standard_error(), s.std, s.median, s.q25,
      s.q75,
      s.standard_error() > 0 ? (s.mean - analytic) / s.standard_error() : 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incentive allocation for differentially private forecasts"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  int workers = 1;
  double rho_total = 1.0;
  long trials = 0;
  std::string out_path;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override base_seed");
    sub->add_option("--workers", workers, "worker threads (output unchanged)")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* solve = app.add_subcommand("solve", "ACS allocation at one budget");
  add_common(solve);
  solve->add_option("--rho-total", rho_total, "total incentive")->required();

  CLI::App* sweep = app.add_subcommand("sweep", "sweep total incentive to CSV");
  add_common(sweep);
  sweep->add_option("--out", out_path, "output CSV path")->required();
  sweep->add_option("--trials", trials, "override trials");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo regret at one budget");
  add_common(simulate);
  simulate->add_option("--rho-total", rho_total, "total incentive")->required();
  simulate->add_option("--trials", trials, "Monte Carlo episodes")->required();

  CLI::App* validate = app.add_subcommand("validate", "run all invariant checks");
  add_common(validate);
  validate->add_option("--trials", trials, "Monte Carlo episodes per point");

  CLI11_PARSE(app, argc, argv);

  try {
    dpregret::ExperimentConfig cfg = dpregret::load_config(config_path);
    if (seed) cfg.base_seed = *seed;
    if (rho_total < 0.0) throw dpregret::ConfigError("--rho-total", "must be >= 0");

    if (*validate) {
      dpregret::ValidationOptions opts;
      if (trials > 0) opts.trials = trials;
      opts.workers = workers;
      const auto report = dpregret::validate(cfg, opts);
      report.print(std::cout);
      return report.passed() ? 0 : kExitValidation;
    }

    const dpregret::Experiment exp = dpregret::prepare_experiment(cfg);

    if (*solve) {
      const auto report = dpregret::solve_allocation(exp, rho_total);
      const auto uniform = dpregret::uniform_allocation(
          exp.sources.size(), rho_total, exp.lqr.series_size());
      const double uniform_value =
          dpregret::expected_regret(exp.lqr.Psi, exp.sources, uniform);
      print_allocation("ACS", report.allocation, report.objective_trace.back());
      std::printf("  iterations=%d converged=%s kkt=%.3g\n", report.iterations,
                  report.converged ? "true" : "false", report.worst_kkt_residual);
      print_allocation("Uniform", uniform, uniform_value);
      std::printf("ratio Uniform/ACS=%.6g\n",
                  uniform_value / report.objective_trace.back());
      return report.converged ? 0 : kExitNonConvergence;
    }

    if (*simulate) {
      const auto report = dpregret::solve_allocation(exp, rho_total);
      dpregret::MonteCarloSettings mc;
      mc.trials = trials;
      mc.seed = cfg.base_seed;
      mc.drift = cfg.drift;
      mc.workers = workers;
      const auto uniform = dpregret::uniform_allocation(
          exp.sources.size(), rho_total, exp.lqr.series_size());
      const auto acs_stats = dpregret::monte_carlo_regret(
          exp.lqr, exp.sources, report.allocation, exp.test, mc);
      const auto uni_stats =
          dpregret::monte_carlo_regret(exp.lqr, exp.sources, uniform, exp.test, mc);
      print_stats("ACS", acs_stats, report.objective_trace.back());
      print_stats("Uniform", uni_stats,
                  dpregret::expected_regret(exp.lqr.Psi, exp.sources, uniform));
      return report.converged ? 0 : kExitNonConvergence;
    }

    // sweep
    dpregret::SweepOptions opts;
    opts.trials = trials > 0 ? trials : cfg.trials;
    opts.workers = workers;
    const auto results = dpregret::run_sweep(exp, opts);
    std::ofstream out(out_path);
    if (!out) throw dpregret::ConfigError("--out", "cannot write " + out_path);
    dpregret::write_sweep_csv(out, results);
    bool converged = true;
    for (const auto& r : results) {
      converged = converged && r.converged;
      if (!r.within_band()) {
        std::fprintf(stderr,
                     "warning: rho_total=%g %s empirical mean %.6g outside 3 "
                     "standard errors of analytic %.6g\n",
                     r.rho_total, dpregret::method_name(r.method),
                     r.empirical.mean, r.expected_regret);
      }
    }
    return converged ? 0 : kExitNonConvergence;
  } catch (const dpregret::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const dpregret::InvalidInput& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
