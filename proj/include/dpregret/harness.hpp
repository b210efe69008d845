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
// Experiment orchestration: configuration, instance preparation, Monte Carlo
// regret estimation, incentive sweeps and the self-validation report.
//
#ifndef DPREGRET_HARNESS_HPP_
#define DPREGRET_HARNESS_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpregret/allocator.hpp"
#include "dpregret/forecast.hpp"
#include "dpregret/lqr.hpp"

namespace dpregret {

inline constexpr double kTrainFraction = 0.7;
inline constexpr long kValidationTrials = 100000;

struct SourceSpec {
  PrivacyProfile privacy;
  int window = 1;
};

struct ExperimentConfig {
  LqrSystem<double> system;
  ArimaParams arima;
  std::vector<SourceSpec> sources;
  std::vector<double> sweep{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  long trials = 10000;
  std::uint64_t base_seed = 0;
  double eta = 1e-8;
  // Test-time prediction errors are scaled so their covariance is
  // (1 + drift) times the training estimate.
  double drift = 0.0;
  int average_window = 1;
};

// Throws ConfigError naming the offending field.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// A configured instance ready for allocation and simulation.
struct Experiment {
  ExperimentConfig config;
  CompiledLqr<double> lqr;
  Timeseries train;
  Timeseries test;
  std::vector<SourceProfile> sources;
};

// Generates the series, splits it 70/30, fits one forecaster per source on
// the training split and estimates each source's error covariance there.
Experiment prepare_experiment(const ExperimentConfig& cfg);

struct MonteCarloSettings {
  long trials = 10000;
  std::uint64_t seed = 0;
  double drift = 0.0;
  int workers = 1;
  // Every k-th trial is re-scored by full rollout.
  long crosscheck_every = 1000;
};

struct RegretStats {
  long trials = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double standard_error() const;
  long crosschecks = 0;
  // Largest |quadratic - rollout| / (1 + |rollout|) over the re-scored trials.
  double crosscheck_max_error = 0.0;
  std::vector<double> samples;  // per-trial regret in trial order
};

// Per trial: draw a fresh truth window from `test_series`, let every source
// emit a private forecast from the preceding history, combine them with the
// allocation's coefficients and score the regret. Trial k draws only from
// substreams (seed, k, .), so results do not depend on `workers`.
RegretStats monte_carlo_regret(const CompiledLqr<double>& lqr,
                               std::span<const SourceProfile> sources,
                               const Allocation& alloc,
                               const Timeseries& test_series,
                               const MonteCarloSettings& settings);

enum class Method { kAcs, kUniform };
const char* method_name(Method m);

struct SweepResult {
  double rho_total = 0.0;
  Method method = Method::kUniform;
  double expected_regret = 0.0;
  RegretStats empirical;
  Allocation allocation;
  int iterations = 0;
  bool converged = true;
  std::vector<double> objective_trace;
  double worst_kkt_residual = 0.0;

  // |empirical mean - analytic| <= 3 standard errors.
  bool within_band() const;
};

struct SweepOptions {
  long trials = 10000;
  int workers = 1;
  bool keep_samples = false;
};

AcsReport solve_allocation(const Experiment& exp, double rho_total);

std::vector<SweepResult> run_sweep(const Experiment& exp,
                                   const SweepOptions& options);

// Columns: rho_total, method, expected_regret, empirical_mean, empirical_std,
// empirical_median, iterations, src_index, rho_i, mean_c_i. One row per
// (sweep point, method, source); floats printed with 17 significant digits.
void write_sweep_csv(std::ostream& out, std::span<const SweepResult> results);

struct ValidationCheck {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  // Reported but never fails the run (e.g. drift-induced divergence).
  bool informational = false;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool passed() const;
  void print(std::ostream& out) const;
};

struct ValidationOptions {
  long trials = kValidationTrials;
  int workers = 1;
};

// Random well-posed system with n, m, p <= max_dim and T <= max_horizon.
// A is scaled to spectral radius at most 1.1 so A^T stays moderate.
LqrSystem<double> random_system(Rng& rng, int max_dim = 4,
                                int max_horizon = 8);

// Runs the invariant checks of every module on the configured instance.
ValidationReport validate(const ExperimentConfig& cfg,
                          const ValidationOptions& options = {});

}  // namespace dpregret

#endif  // DPREGRET_HARNESS_HPP_
