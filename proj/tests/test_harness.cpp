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
#include "dpregret/harness.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "dpregret/errors.hpp"
#include "dpregret/privacy.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace dpregret {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

json ReferenceDoc() {
  return json::parse(R"({
    "system": {"A": [[1.0]], "B": [[1.0]], "C": [[-1.0]], "Q": [[1.0]],
               "R": [[1.0]], "T": 10, "x0": [1.0]},
    "arima": {"theta": 0.5, "noise_std": 0.1, "length": 20000},
    "sources": [
      {"sen": 1.0, "alpha": 4.0,  "beta": 1.5, "gamma": 0.3, "window": 10},
      {"sen": 1.0, "alpha": 8.0,  "beta": 2.5, "gamma": 0.6, "window": 7},
      {"sen": 1.0, "alpha": 12.0, "beta": 3.5, "gamma": 0.9, "window": 4}
    ],
    "sweep": [0.5, 2.0],
    "trials": 2000,
    "base_seed": 7,
    "eta": 1e-8,
    "drift": null
  })");
}

std::string ErrorField(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

// One source with a forecaster fitted on a ramp, so prediction error is
// zero and only the Laplace noise remains.
struct RampInstance {
  CompiledLqr<double> lqr = compile_lqr(test::ReferenceSystem());
  Timeseries series = Timeseries(VectorXd::LinSpaced(4000, 0.0, 1.0));
  std::vector<SourceProfile> sources;

  explicit RampInstance(const PrivacyProfile& privacy) {
    SourceProfile s;
    s.privacy = privacy;
    s.forecaster = fit_linear_forecaster(series, 5, 10);
    s.sigma = MatrixXd::Zero(10, 10);
    sources.push_back(s);
  }
};

TEST(Config, ReferenceFileParses) {
  const ExperimentConfig cfg = load_config(test::ReferenceConfigPath());
  EXPECT_EQ(cfg.sources.size(), 3u);
  EXPECT_EQ(cfg.system.horizon, 10);
  EXPECT_EQ(cfg.sources[2].window, 4);
  EXPECT_EQ(cfg.sweep.size(), 6u);
  EXPECT_EQ(cfg.drift, 0.0);
}

TEST(Config, OptionalKeys) {
  json doc = ReferenceDoc();
  doc["sources"][0].erase("sen");
  doc["drift"] = 0.5;
  doc["average_window"] = 4;
  const ExperimentConfig cfg = parse_config(doc);
  EXPECT_EQ(cfg.sources[0].privacy.sen, 1.0);
  EXPECT_EQ(cfg.drift, 0.5);
  EXPECT_EQ(cfg.average_window, 4);
}

TEST(Config, ErrorsNameTheField) {
  json doc = ReferenceDoc();
  doc["system"]["Q"] = json::parse("[[-1.0]]");
  EXPECT_EQ(ErrorField(doc), "system.Q");

  doc = ReferenceDoc();
  doc["sources"][1]["alpha"] = -2.0;
  EXPECT_EQ(ErrorField(doc), "sources[1].alpha");

  doc = ReferenceDoc();
  doc.erase("trials");
  EXPECT_EQ(ErrorField(doc), "trials");

  doc = ReferenceDoc();
  doc["bogus"] = 1;
  EXPECT_EQ(ErrorField(doc), "bogus");

  doc = ReferenceDoc();
  doc["system"]["B"] = json::parse("[[1.0], [2.0]]");
  EXPECT_EQ(ErrorField(doc), "system.B");

  doc = ReferenceDoc();
  doc["sweep"] = json::parse("[1.0, -0.5]");
  EXPECT_EQ(ErrorField(doc).rfind("sweep", 0), 0u);

  EXPECT_THROW(parse_config_text("{ \"system\": "), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, ShortSeriesIsReportedAgainstLength) {
  json doc = ReferenceDoc();
  doc["arima"]["length"] = 60;
  try {
    prepare_experiment(parse_config(doc));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "arima.length");
  }
}

TEST(Experiment, PreparationIsDeterministic) {
  const ExperimentConfig cfg = parse_config(ReferenceDoc());
  const Experiment a = prepare_experiment(cfg);
  const Experiment b = prepare_experiment(cfg);
  EXPECT_EQ(a.train.rows(), 14000);
  EXPECT_EQ(a.test.rows(), 6000);
  for (std::size_t i = 0; i < a.sources.size(); ++i) {
    EXPECT_EQ(a.sources[i].sigma, b.sources[i].sigma);
    EXPECT_EQ(a.sources[i].sigma.rows(), 10);
  }
}

// Regret = (s_hat - s)' Psi (s_hat - s) with s_hat - s i.i.d. Laplace, so
// its mean is sigma2 tr(Psi).
TEST(MonteCarlo, PureLaplaceNoiseMatchesTracePsi) {
  const PrivacyProfile prof{1.0, 4.0, 1.5, 0.3};
  RampInstance inst(prof);
  const double rho = 0.8;
  Allocation alloc = uniform_allocation(1, rho, 10);
  MonteCarloSettings mc;
  mc.trials = 100000;
  mc.seed = 11;
  const RegretStats stats = monte_carlo_regret(inst.lqr, inst.sources, alloc, inst.series, mc);
  const double expected = laplace_variance(rho, prof) * inst.lqr.Psi.trace();
  EXPECT_NEAR(stats.mean, expected, 3.0 * stats.standard_error());
  EXPECT_EQ(stats.crosschecks, 100);
  EXPECT_LE(stats.crosscheck_max_error, 1e-8);
  EXPECT_GE(stats.q25, 0.0);
  EXPECT_LE(stats.q25, stats.median);
  EXPECT_LE(stats.median, stats.q75);
}

TEST(MonteCarlo, VanishingNoiseGivesVanishingRegret) {
  RampInstance inst({1.0, 1e9, 1.0, 0.0});
  MonteCarloSettings mc;
  mc.trials = 1000;
  const RegretStats stats = monte_carlo_regret(inst.lqr, inst.sources,
                                               uniform_allocation(1, 50.0, 10), inst.series, mc);
  EXPECT_LT(stats.mean, 1e-12);
}

TEST(MonteCarlo, WorkerCountDoesNotChangeSamples) {
  const Experiment exp = prepare_experiment(parse_config(ReferenceDoc()));
  const Allocation alloc = uniform_allocation(3, 1.0, 10);
  MonteCarloSettings mc;
  mc.trials = 3001;
  mc.seed = 5;
  const RegretStats one = monte_carlo_regret(exp.lqr, exp.sources, alloc, exp.test, mc);
  mc.workers = 4;
  const RegretStats four = monte_carlo_regret(exp.lqr, exp.sources, alloc, exp.test, mc);
  EXPECT_EQ(one.samples, four.samples);
  EXPECT_EQ(one.mean, four.mean);
  EXPECT_EQ(one.std, four.std);
}

TEST(MonteCarlo, SeedChangesSamples) {
  RampInstance inst({1.0, 4.0, 1.5, 0.3});
  MonteCarloSettings mc;
  mc.trials = 10;
  const Allocation a = uniform_allocation(1, 1.0, 10);
  const RegretStats x = monte_carlo_regret(inst.lqr, inst.sources, a, inst.series, mc);
  mc.seed = 1;
  const RegretStats y = monte_carlo_regret(inst.lqr, inst.sources, a, inst.series, mc);
  EXPECT_NE(x.samples, y.samples);
}

TEST(MonteCarlo, DriftInflatesRegret) {
  const Experiment exp = prepare_experiment(parse_config(ReferenceDoc()));
  const Allocation alloc = uniform_allocation(3, 8.0, 10);
  MonteCarloSettings mc;
  mc.trials = 5000;
  const RegretStats base = monte_carlo_regret(exp.lqr, exp.sources, alloc, exp.test, mc);
  mc.drift = 10.0;
  const RegretStats drifted = monte_carlo_regret(exp.lqr, exp.sources, alloc, exp.test, mc);
  EXPECT_GT(drifted.mean, base.mean);
}

TEST(Sweep, RowsAndCsvLayout) {
  const Experiment exp = prepare_experiment(parse_config(ReferenceDoc()));
  SweepOptions opts;
  opts.trials = 500;
  const auto results = run_sweep(exp, opts);
  ASSERT_EQ(results.size(), 4u);
  EXPECT_EQ(results[0].method, Method::kAcs);
  EXPECT_EQ(results[1].method, Method::kUniform);
  EXPECT_EQ(results[2].rho_total, 2.0);
  for (const auto& r : results) {
    EXPECT_NO_THROW(check_feasible(r.allocation, 10, r.rho_total));
    EXPECT_TRUE(r.empirical.samples.empty());
  }
  EXPECT_LE(results[0].expected_regret, results[1].expected_regret);

  std::ostringstream out;
  write_sweep_csv(out, results);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line,
            "rho_total,method,expected_regret,empirical_mean,empirical_std,"
            "empirical_median,iterations,src_index,rho_i,mean_c_i");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 9);
  }
  EXPECT_EQ(rows, 4 * 3);
}

TEST(Sweep, SingleSourceAcsEqualsUniform) {
  json doc = ReferenceDoc();
  doc["sources"] = json::array({doc["sources"][0]});
  const Experiment exp = prepare_experiment(parse_config(doc));
  SweepOptions opts;
  opts.trials = 300;
  const auto results = run_sweep(exp, opts);
  for (std::size_t k = 0; k < results.size(); k += 2) {
    EXPECT_EQ(results[k].expected_regret, results[k + 1].expected_regret);
    EXPECT_EQ(results[k].empirical.samples, results[k + 1].empirical.samples);
    EXPECT_EQ(results[k].empirical.mean, results[k + 1].empirical.mean);
  }
}

TEST(RandomSystem, IsWellPosed) {
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const LqrSystem<double> sys = random_system(rng);
    EXPECT_NO_THROW(check_system(sys));
    EXPECT_LE(sys.state_dim(), 4);
    EXPECT_LE(sys.horizon, 8);
  }
}

TEST(Validate, ReferenceConfigPasses) {
  ExperimentConfig cfg = parse_config(ReferenceDoc());
  cfg.arima.length = 100000;
  ValidationOptions opts;
  opts.trials = 20000;
  const ValidationReport report = validate(cfg, opts);
  std::ostringstream out;
  report.print(out);
  EXPECT_TRUE(report.passed()) << out.str();
  EXPECT_GT(report.checks.size(), 20u);
}

TEST(Validate, LargeDriftIsFlaggedNotFailed) {
  ExperimentConfig cfg = parse_config(ReferenceDoc());
  cfg.arima.length = 100000;
  cfg.drift = 10.0;
  cfg.sweep = {8.0};
  ValidationOptions opts;
  opts.trials = 20000;
  const ValidationReport report = validate(cfg, opts);
  bool flagged = false;
  for (const auto& c : report.checks) {
    if (c.informational && !c.passed) flagged = true;
  }
  EXPECT_TRUE(flagged);
  EXPECT_TRUE(report.passed());
}

}  // namespace
}  // namespace dpregret
