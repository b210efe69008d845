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
// Synthetic ARIMA(0,1,1) data, direct multi-horizon linear forecasters, and
// private forecast emission.
//
// A timeseries is an Eigen matrix with one row per time step and one column
// per channel. Windows are flattened oldest step first, so step k of a window
// occupies entries [k*p, (k+1)*p).
//
#ifndef DPREGRET_FORECAST_HPP_
#define DPREGRET_FORECAST_HPP_

#include <Eigen/Dense>

#include <iosfwd>
#include <string>

#include "dpregret/privacy.hpp"
#include "dpregret/random.hpp"

namespace dpregret {

using Timeseries = Eigen::MatrixXd;

inline constexpr double kDefaultRidge = 1e-6;

struct ArimaParams {
  double theta = 0.5;       // MA(1) coefficient
  double noise_std = 0.1;   // innovation standard deviation
  Eigen::Index length = 0;  // number of steps

  // Throws InvalidInput if noise_std <= 0 or length < min_length.
  void validate(Eigen::Index min_length = 2) const;
};

// x_t = x_{t-1} + e_t + theta e_{t-1}, x_0 = 0, e_t ~ N(0, noise_std^2),
// independently per channel. Unscaled.
Timeseries simulate_arima(Rng& rng, const ArimaParams& params,
                          Eigen::Index channels = 1);

// Affine map of the whole series onto [0, 1] (one shared min/max over all
// channels). A constant series maps to 0.5.
Timeseries scale_to_unit(const Timeseries& series);

// simulate_arima followed by scale_to_unit.
Timeseries generate_arima(Rng& rng, const ArimaParams& params,
                          Eigen::Index channels = 1);

struct Forecaster {
  int window = 0;
  int horizon = 0;
  Eigen::Index channels = 0;
  Eigen::MatrixXd weights;    // (p*horizon) x (p*window)
  Eigen::VectorXd intercept;  // p*horizon
  bool fitted = false;

  Eigen::Index output_size() const { return channels * horizon; }
  Eigen::Index input_size() const { return channels * window; }

  // Forecast of the next `horizon` steps from the last `window` rows of
  // `history`.
  Eigen::VectorXd predict(const Timeseries& history) const;
};

// Flattens rows [start, start + steps) of `series`.
Eigen::VectorXd flatten_window(const Timeseries& series, Eigen::Index start,
                               Eigen::Index steps);

// Ridge least squares from w-step history windows to T-step futures, with an
// unpenalized intercept. Needs at least p*w + p*T supervised pairs.
Forecaster fit_linear_forecaster(const Timeseries& train, int window,
                                 int horizon, double ridge = kDefaultRidge);

// One row per sliding window: prediction minus truth.
Eigen::MatrixXd prediction_residuals(const Forecaster& f,
                                     const Timeseries& series);

// Sample covariance of residual rows (n - 1 divisor), symmetrized, plus
// ridge * I.
Eigen::MatrixXd residual_covariance(const Eigen::MatrixXd& residuals,
                                    double ridge = kDefaultRidge);

// Needs at least p*T + 1 residual vectors.
Eigen::MatrixXd estimate_error_covariance(const Forecaster& f,
                                          const Timeseries& holdout,
                                          double ridge = kDefaultRidge);

struct SourceProfile {
  PrivacyProfile privacy;
  Forecaster forecaster;
  Eigen::MatrixXd sigma;  // prediction-error covariance, pT x pT
};

// predict(history) plus Laplace noise at the budget bought by `rho`.
Eigen::VectorXd emit_private_forecast(Rng& rng, const SourceProfile& src,
                                      const Timeseries& history, double rho);

// Headerless CSV, one row per time step, one column per channel.
Timeseries read_timeseries_csv(std::istream& in);
Timeseries read_timeseries_csv(const std::string& path);
void write_timeseries_csv(std::ostream& out, const Timeseries& series);
void write_timeseries_csv(const std::string& path, const Timeseries& series);

}  // namespace dpregret

#endif  // DPREGRET_FORECAST_HPP_
