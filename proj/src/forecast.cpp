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
#include "dpregret/forecast.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dpregret/errors.hpp"

namespace dpregret {

void ArimaParams::validate(Eigen::Index min_length) const {
  if (!(noise_std > 0.0) || !std::isfinite(noise_std)) {
    throw InvalidInput("arima noise_std must be finite and > 0");
  }
  if (!std::isfinite(theta)) throw InvalidInput("arima theta must be finite");
  if (length < min_length) {
    throw InvalidInput("arima length " + std::to_string(length) +
                       " is shorter than the required " +
                       std::to_string(min_length));
  }
}

Timeseries simulate_arima(Rng& rng, const ArimaParams& params,
                          Eigen::Index channels) {
  params.validate();
  if (channels < 1) throw InvalidInput("channels must be >= 1");
  std::normal_distribution<double> innovation(0.0, params.noise_std);
  Timeseries x = Timeseries::Zero(params.length, channels);
  for (Eigen::Index j = 0; j < channels; ++j) {
    double prev_e = innovation(rng);
    for (Eigen::Index t = 1; t < params.length; ++t) {
      const double e = innovation(rng);
      x(t, j) = x(t - 1, j) + e + params.theta * prev_e;
      prev_e = e;
    }
  }
  return x;
}

Timeseries scale_to_unit(const Timeseries& series) {
  if (series.size() == 0) return series;
  const double lo = series.minCoeff();
  const double range = series.maxCoeff() - lo;
  if (!(range > 0.0)) return Timeseries::Constant(series.rows(), series.cols(), 0.5);
  return (series.array() - lo) / range;
}

Timeseries generate_arima(Rng& rng, const ArimaParams& params,
                          Eigen::Index channels) {
  return scale_to_unit(simulate_arima(rng, params, channels));
}

Eigen::VectorXd flatten_window(const Timeseries& series, Eigen::Index start,
                               Eigen::Index steps) {
  const Eigen::Index p = series.cols();
  if (start < 0 || start + steps > series.rows()) {
    throw InvalidInput("window out of range");
  }
  Eigen::VectorXd out(p * steps);
  for (Eigen::Index k = 0; k < steps; ++k) {
    out.segment(k * p, p) = series.row(start + k).transpose();
  }
  return out;
}

Eigen::VectorXd Forecaster::predict(const Timeseries& history) const {
  if (!fitted) throw InvalidInput("forecaster used before fitting");
  if (history.cols() != channels) {
    throw InvalidInput("history has " + std::to_string(history.cols()) +
                       " channels, forecaster expects " +
                       std::to_string(channels));
  }
  if (history.rows() < window) {
    throw InvalidInput("history shorter than forecaster window");
  }
  return weights * flatten_window(history, history.rows() - window, window) +
         intercept;
}

namespace {

Eigen::Index window_count(Eigen::Index length, int window, int horizon) {
  const Eigen::Index n = length - window - horizon + 1;
  return n > 0 ? n : 0;
}

}  // namespace

Forecaster fit_linear_forecaster(const Timeseries& train, int window,
                                 int horizon, double ridge) {
  if (window < 1 || horizon < 1) {
    throw InvalidInput("window and horizon must be >= 1");
  }
  const Eigen::Index p = train.cols();
  if (p < 1) throw InvalidInput("training series has no channels");
  const Eigen::Index in = p * window;
  const Eigen::Index out = p * horizon;
  const Eigen::Index pairs = window_count(train.rows(), window, horizon);
  if (pairs < in + out) {
    throw InsufficientData("need at least " + std::to_string(in + out) +
                           " training windows, have " + std::to_string(pairs));
  }

  Eigen::MatrixXd X(pairs, in);
  Eigen::MatrixXd Y(pairs, out);
  for (Eigen::Index s = 0; s < pairs; ++s) {
    X.row(s) = flatten_window(train, s, window).transpose();
    Y.row(s) = flatten_window(train, s + window, horizon).transpose();
  }
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const Eigen::RowVectorXd y_mean = Y.colwise().mean();
  X.rowwise() -= x_mean;
  Y.rowwise() -= y_mean;

  Eigen::MatrixXd gram = X.transpose() * X;
  gram.diagonal().array() += ridge;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success) {
    throw ConditioningError("forecaster normal equations are singular");
  }
  const Eigen::MatrixXd coef = ldlt.solve(X.transpose() * Y);  // in x out

  Forecaster f;
  f.window = window;
  f.horizon = horizon;
  f.channels = p;
  f.weights = coef.transpose();
  f.intercept = y_mean.transpose() - f.weights * x_mean.transpose();
  f.fitted = true;
  return f;
}

Eigen::MatrixXd prediction_residuals(const Forecaster& f,
                                     const Timeseries& series) {
  if (!f.fitted) throw InvalidInput("forecaster used before fitting");
  if (series.cols() != f.channels) {
    throw InvalidInput("series channel count does not match forecaster");
  }
  const Eigen::Index n = window_count(series.rows(), f.window, f.horizon);
  Eigen::MatrixXd residuals(n, f.output_size());
  for (Eigen::Index s = 0; s < n; ++s) {
    const Eigen::VectorXd pred =
        f.weights * flatten_window(series, s, f.window) + f.intercept;
    residuals.row(s) =
        (pred - flatten_window(series, s + f.window, f.horizon)).transpose();
  }
  return residuals;
}

Eigen::MatrixXd residual_covariance(const Eigen::MatrixXd& residuals,
                                    double ridge) {
  const Eigen::Index n = residuals.rows();
  if (n < 2) throw InsufficientData("need at least 2 residual vectors");
  const Eigen::MatrixXd centered =
      residuals.rowwise() - residuals.colwise().mean();
  Eigen::MatrixXd sigma =
      (centered.transpose() * centered) / static_cast<double>(n - 1);
  sigma = 0.5 * (sigma + sigma.transpose()).eval();
  sigma.diagonal().array() += ridge;
  return sigma;
}

Eigen::MatrixXd estimate_error_covariance(const Forecaster& f,
                                          const Timeseries& holdout,
                                          double ridge) {
  const Eigen::MatrixXd residuals = prediction_residuals(f, holdout);
  if (residuals.rows() < f.output_size() + 1) {
    throw InsufficientData("need at least " +
                           std::to_string(f.output_size() + 1) +
                           " residual vectors, have " +
                           std::to_string(residuals.rows()));
  }
  return residual_covariance(residuals, ridge);
}

Eigen::VectorXd emit_private_forecast(Rng& rng, const SourceProfile& src,
                                      const Timeseries& history, double rho) {
  Eigen::VectorXd out = src.forecaster.predict(history);
  out += dp_noise_for_source(rng, src.privacy, rho, out.size());
  return out;
}

Timeseries read_timeseries_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) {
          throw std::invalid_argument(cell);
        }
      } catch (const std::exception&) {
        throw InvalidInput("line " + std::to_string(line_no) +
                           ": not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InvalidInput("line " + std::to_string(line_no) +
                         ": inconsistent column count");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return {};
  Timeseries out(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) out(r, c) = rows[r][c];
  }
  return out;
}

Timeseries read_timeseries_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return read_timeseries_csv(in);
}

void write_timeseries_csv(std::ostream& out, const Timeseries& series) {
  char buf[32];
  for (Eigen::Index r = 0; r < series.rows(); ++r) {
    for (Eigen::Index c = 0; c < series.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", series(r, c));
      if (c > 0) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

void write_timeseries_csv(const std::string& path, const Timeseries& series) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  write_timeseries_csv(out, series);
}

}  // namespace dpregret
