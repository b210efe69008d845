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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "dpregret/errors.hpp"

namespace dpregret {
namespace {

using nlohmann::json;

const json& require_key(const json& obj, const std::string& key,
                        const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ConfigError(path.empty() ? key : path + "." + key, "missing");
  }
  return *it;
}

double read_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "must be finite");
  return d;
}

long read_integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
  return v.get<long>();
}

Eigen::MatrixXd read_matrix(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError(path, "expected a non-empty row-major nested array");
  }
  const std::size_t rows = v.size();
  const std::size_t cols = v[0].is_array() ? v[0].size() : 0;
  if (cols == 0) throw ConfigError(path, "rows must be non-empty arrays");
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::string row_path = path + "[" + std::to_string(r) + "]";
    if (!v[r].is_array() || v[r].size() != cols) {
      throw ConfigError(row_path, "ragged matrix row");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(r, c) = read_number(v[r][c], row_path + "[" + std::to_string(c) + "]");
    }
  }
  return m;
}

Eigen::VectorXd read_vector(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) {
    throw ConfigError(path, "expected a non-empty array");
  }
  Eigen::VectorXd out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = read_number(v[i], path + "[" + std::to_string(i) + "]");
  }
  return out;
}

LqrSystem<double> parse_system(const json& s) {
  LqrSystem<double> sys;
  sys.A = read_matrix(require_key(s, "A", "system"), "system.A");
  sys.B = read_matrix(require_key(s, "B", "system"), "system.B");
  sys.C = read_matrix(require_key(s, "C", "system"), "system.C");
  sys.Q = read_matrix(require_key(s, "Q", "system"), "system.Q");
  sys.R = read_matrix(require_key(s, "R", "system"), "system.R");
  sys.horizon = static_cast<int>(read_integer(require_key(s, "T", "system"), "system.T"));
  sys.x0 = read_vector(require_key(s, "x0", "system"), "system.x0");

  const auto n = sys.A.rows();
  if (sys.A.cols() != n) throw ConfigError("system.A", "must be square");
  if (sys.B.rows() != n) throw ConfigError("system.B", "must have n rows");
  if (sys.C.rows() != n) throw ConfigError("system.C", "must have n rows");
  if (sys.Q.rows() != n || sys.Q.cols() != n) {
    throw ConfigError("system.Q", "must be n x n");
  }
  if (sys.R.rows() != sys.B.cols() || sys.R.cols() != sys.B.cols()) {
    throw ConfigError("system.R", "must be m x m");
  }
  if (sys.x0.size() != n) throw ConfigError("system.x0", "must have length n");
  if (sys.horizon < 1) throw ConfigError("system.T", "must be >= 1");
  try {
    detail::require_symmetric_pd(sys.Q, "Q");
  } catch (const InvalidInput& e) {
    throw ConfigError("system.Q", e.what());
  }
  try {
    detail::require_symmetric_pd(sys.R, "R");
  } catch (const InvalidInput& e) {
    throw ConfigError("system.R", e.what());
  }
  return sys;
}

void fill_quantiles(RegretStats& stats, std::vector<double> sorted) {
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  stats.q25 = quantile(0.25);
  stats.median = quantile(0.5);
  stats.q75 = quantile(0.75);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  static const char* kKnown[] = {"system", "arima", "sources", "sweep",
                                 "trials", "base_seed", "eta", "drift",
                                 "average_window"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (std::find(std::begin(kKnown), std::end(kKnown), it.key()) ==
        std::end(kKnown)) {
      throw ConfigError(it.key(), "unknown key");
    }
  }

  ExperimentConfig cfg;
  cfg.system = parse_system(require_key(doc, "system", ""));

  const json& arima = require_key(doc, "arima", "");
  cfg.arima.theta = read_number(require_key(arima, "theta", "arima"), "arima.theta");
  cfg.arima.noise_std =
      read_number(require_key(arima, "noise_std", "arima"), "arima.noise_std");
  cfg.arima.length = read_integer(require_key(arima, "length", "arima"), "arima.length");
  if (!(cfg.arima.noise_std > 0.0)) throw ConfigError("arima.noise_std", "must be > 0");

  const json& sources = require_key(doc, "sources", "");
  if (!sources.is_array() || sources.empty()) {
    throw ConfigError("sources", "expected a non-empty array");
  }
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const std::string path = "sources[" + std::to_string(i) + "]";
    const json& s = sources[i];
    SourceSpec spec;
    spec.privacy.sen = s.contains("sen") ? read_number(s["sen"], path + ".sen") : 1.0;
    spec.privacy.alpha = read_number(require_key(s, "alpha", path), path + ".alpha");
    spec.privacy.beta = read_number(require_key(s, "beta", path), path + ".beta");
    spec.privacy.gamma = read_number(require_key(s, "gamma", path), path + ".gamma");
    spec.window = static_cast<int>(read_integer(require_key(s, "window", path), path + ".window"));
    if (!(spec.privacy.sen > 0.0)) throw ConfigError(path + ".sen", "must be > 0");
    if (!(spec.privacy.alpha > 0.0)) throw ConfigError(path + ".alpha", "must be > 0");
    if (!(spec.privacy.beta > 0.0)) throw ConfigError(path + ".beta", "must be > 0");
    if (!(spec.privacy.gamma >= 0.0)) throw ConfigError(path + ".gamma", "must be >= 0");
    if (spec.window < 1) throw ConfigError(path + ".window", "must be >= 1");
    cfg.sources.push_back(spec);
  }

  const json& sweep = require_key(doc, "sweep", "");
  if (!sweep.is_array() || sweep.empty()) {
    throw ConfigError("sweep", "expected a non-empty array");
  }
  cfg.sweep.clear();
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const std::string path = "sweep[" + std::to_string(i) + "]";
    const double rho = read_number(sweep[i], path);
    if (rho < 0.0) throw ConfigError(path, "total incentive must be >= 0");
    cfg.sweep.push_back(rho);
  }

  cfg.trials = read_integer(require_key(doc, "trials", ""), "trials");
  if (cfg.trials < 1) throw ConfigError("trials", "must be >= 1");
  const json& seed = require_key(doc, "base_seed", "");
  if (!seed.is_number_integer()) throw ConfigError("base_seed", "expected an integer");
  cfg.base_seed = seed.is_number_unsigned() ? seed.get<std::uint64_t>()
                                            : static_cast<std::uint64_t>(seed.get<std::int64_t>());
  cfg.eta = read_number(require_key(doc, "eta", ""), "eta");
  if (!(cfg.eta > 0.0)) throw ConfigError("eta", "must be > 0");
  const json& drift = require_key(doc, "drift", "");
  cfg.drift = drift.is_null() ? 0.0 : read_number(drift, "drift");
  if (cfg.drift <= -1.0) throw ConfigError("drift", "must be > -1");
  if (doc.contains("average_window")) {
    cfg.average_window = static_cast<int>(read_integer(doc["average_window"], "average_window"));
    if (cfg.average_window < 1) throw ConfigError("average_window", "must be >= 1");
  }
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // e.what() carries the line and column of the syntax error.
    throw ConfigError("<document>", e.what());
  }
  return parse_config(doc);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

Experiment prepare_experiment(const ExperimentConfig& cfg) {
  Experiment exp;
  exp.config = cfg;
  exp.lqr = compile_lqr(cfg.system);

  const int T = cfg.system.horizon;
  const Eigen::Index p = cfg.system.series_dim();
  int max_window = 0;
  for (const auto& s : cfg.sources) max_window = std::max(max_window, s.window);
  try {
    cfg.arima.validate(2 * (max_window + T + 1));
  } catch (const InvalidInput& e) {
    throw ConfigError("arima", e.what());
  }

  Rng rng = substream(cfg.base_seed, StreamKind::kSeries);
  const Timeseries series = generate_arima(rng, cfg.arima, p);
  const auto n_train = static_cast<Eigen::Index>(
      std::floor(kTrainFraction * static_cast<double>(series.rows())));
  exp.train = series.topRows(n_train);
  exp.test = series.bottomRows(series.rows() - n_train);
  if (exp.test.rows() < max_window + T) {
    throw ConfigError("arima.length", "test split too short for one window");
  }

  for (std::size_t i = 0; i < cfg.sources.size(); ++i) {
    SourceProfile src;
    src.privacy = cfg.sources[i].privacy;
    try {
      src.forecaster = fit_linear_forecaster(exp.train, cfg.sources[i].window, T);
      src.sigma = estimate_error_covariance(src.forecaster, exp.train);
    } catch (const InsufficientData& e) {
      throw ConfigError("arima.length", "sources[" + std::to_string(i) + "]: " + e.what());
    }
    exp.sources.push_back(std::move(src));
  }
  return exp;
}

double RegretStats::standard_error() const {
  return trials > 0 ? std / std::sqrt(static_cast<double>(trials)) : 0.0;
}

RegretStats monte_carlo_regret(const CompiledLqr<double>& lqr,
                               std::span<const SourceProfile> sources,
                               const Allocation& alloc,
                               const Timeseries& test_series,
                               const MonteCarloSettings& settings) {
  if (settings.trials < 1) throw InvalidInput("trials must be >= 1");
  if (alloc.sources() != sources.size()) {
    throw InvalidInput("allocation and source counts differ");
  }
  check_feasible(alloc, lqr.series_size());
  const int T = lqr.system.horizon;
  int max_window = 0;
  for (const auto& s : sources) max_window = std::max(max_window, s.forecaster.window);
  const Eigen::Index starts = test_series.rows() - max_window - T + 1;
  if (starts < 1) throw InvalidInput("test series too short for one window");
  const double drift_scale = std::sqrt(1.0 + settings.drift) - 1.0;
  const long every = std::max<long>(settings.crosscheck_every, 1);

  std::vector<double> regrets(settings.trials);
  std::vector<double> crosscheck(settings.trials, -1.0);

  auto run_trial = [&](long k) {
    Rng window_rng = substream(settings.seed, StreamKind::kTruthWindow, k);
    const Eigen::Index start =
        max_window + static_cast<Eigen::Index>(window_rng() % static_cast<std::uint64_t>(starts));
    const Timeseries history = test_series.middleRows(start - max_window, max_window);
    const Eigen::VectorXd truth = flatten_window(test_series, start, T);

    std::vector<Eigen::VectorXd> forecasts;
    forecasts.reserve(sources.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
      Rng noise_rng = substream(settings.seed, StreamKind::kSourceNoise, k, i);
      Eigen::VectorXd f = emit_private_forecast(
          noise_rng, sources[i], history, alloc.incentives[static_cast<Eigen::Index>(i)]);
      if (drift_scale != 0.0) {
        f += drift_scale * (sources[i].forecaster.predict(history) - truth);
      }
      forecasts.push_back(std::move(f));
    }
    const Eigen::VectorXd combined = combine_forecasts(alloc.coeffs, forecasts);
    const double r = regret_quadratic(lqr, combined, truth);
    regrets[k] = r;
    if (k % every == 0) {
      const double rr = regret_rollout(lqr, lqr.system.x0, combined, truth);
      crosscheck[k] = std::abs(r - rr) / (1.0 + std::abs(rr));
    }
  };

  const int workers = std::max(1, settings.workers);
  if (workers == 1) {
    for (long k = 0; k < settings.trials; ++k) run_trial(k);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (settings.trials + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const long lo = w * chunk;
      const long hi = std::min(settings.trials, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        for (long k = lo; k < hi; ++k) run_trial(k);
      });
    }
    for (auto& t : pool) t.join();
  }

  RegretStats stats;
  stats.trials = settings.trials;
  double sum = 0.0;
  for (double r : regrets) sum += r;
  stats.mean = sum / static_cast<double>(settings.trials);
  double ss = 0.0;
  for (double r : regrets) ss += (r - stats.mean) * (r - stats.mean);
  stats.std = settings.trials > 1
                  ? std::sqrt(ss / static_cast<double>(settings.trials - 1))
                  : 0.0;
  for (double e : crosscheck) {
    if (e < 0.0) continue;
    ++stats.crosschecks;
    stats.crosscheck_max_error = std::max(stats.crosscheck_max_error, e);
  }
  fill_quantiles(stats, regrets);
  stats.samples = std::move(regrets);
  return stats;
}

const char* method_name(Method m) {
  return m == Method::kAcs ? "ACS" : "Uniform";
}

bool SweepResult::within_band() const {
  return std::abs(empirical.mean - expected_regret) <=
         3.0 * empirical.standard_error();
}

AcsReport solve_allocation(const Experiment& exp, double rho_total) {
  AcsOptions opts;
  opts.eta = exp.config.eta;
  opts.average_window = exp.config.average_window;
  const Allocation init = uniform_allocation(exp.sources.size(), rho_total,
                                             exp.lqr.series_size());
  return acs(exp.lqr.Psi, exp.sources, rho_total, init, opts);
}

std::vector<SweepResult> run_sweep(const Experiment& exp,
                                   const SweepOptions& options) {
  MonteCarloSettings mc;
  mc.trials = options.trials;
  mc.seed = exp.config.base_seed;
  mc.drift = exp.config.drift;
  mc.workers = options.workers;

  std::vector<SweepResult> out;
  for (double rho_total : exp.config.sweep) {
    const AcsReport report = solve_allocation(exp, rho_total);
    SweepResult acs_row;
    acs_row.rho_total = rho_total;
    acs_row.method = Method::kAcs;
    acs_row.allocation = report.allocation;
    acs_row.expected_regret = report.objective_trace.back();
    acs_row.iterations = report.iterations;
    acs_row.converged = report.converged;
    acs_row.objective_trace = report.objective_trace;
    acs_row.worst_kkt_residual = report.worst_kkt_residual;

    SweepResult uni_row;
    uni_row.rho_total = rho_total;
    uni_row.method = Method::kUniform;
    uni_row.allocation = uniform_allocation(exp.sources.size(), rho_total,
                                            exp.lqr.series_size());
    uni_row.expected_regret =
        expected_regret(exp.lqr.Psi, exp.sources, uni_row.allocation);
    uni_row.objective_trace = {uni_row.expected_regret};

    for (SweepResult* row : {&acs_row, &uni_row}) {
      row->empirical = monte_carlo_regret(exp.lqr, exp.sources, row->allocation,
                                          exp.test, mc);
      if (!options.keep_samples) {
        row->empirical.samples.clear();
        row->empirical.samples.shrink_to_fit();
      }
    }
    out.push_back(std::move(acs_row));
    out.push_back(std::move(uni_row));
  }
  return out;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepResult> results) {
  out << "rho_total,method,expected_regret,empirical_mean,empirical_std,"
         "empirical_median,iterations,src_index,rho_i,mean_c_i\n";
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.allocation.sources(); ++i) {
      out << format_double(r.rho_total) << ',' << method_name(r.method) << ','
          << format_double(r.expected_regret) << ','
          << format_double(r.empirical.mean) << ','
          << format_double(r.empirical.std) << ','
          << format_double(r.empirical.median) << ',' << r.iterations << ','
          << i << ','
          << format_double(r.allocation.incentives[static_cast<Eigen::Index>(i)])
          << ',' << format_double(r.allocation.coeffs[i].mean()) << '\n';
    }
  }
}

}  // namespace dpregret
