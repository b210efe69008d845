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
#include <sstream>

#include "dpregret/errors.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace dpregret {
namespace {

Timeseries Ramp(Eigen::Index n) {
  return Timeseries(Eigen::VectorXd::LinSpaced(n, 0.0, 1.0));
}

Forecaster ConstantForecaster(double value, int window, int horizon) {
  Forecaster f;
  f.window = window;
  f.horizon = horizon;
  f.channels = 1;
  f.weights = Eigen::MatrixXd::Zero(horizon, window);
  f.intercept = Eigen::VectorXd::Constant(horizon, value);
  f.fitted = true;
  return f;
}

TEST(Arima, VanishingNoiseGivesConstantSeries) {
  Rng rng(1);
  const Timeseries x = simulate_arima(rng, {0.5, 1e-12, 500});
  for (Eigen::Index t = 1; t < x.rows(); ++t) {
    EXPECT_LT(std::abs(x(t, 0) - x(t - 1, 0)), 1e-9);
  }
}

TEST(Arima, DeterministicPerSeed) {
  Rng a(5), b(5);
  EXPECT_EQ(generate_arima(a, {0.5, 0.1, 1000}, 2),
            generate_arima(b, {0.5, 0.1, 1000}, 2));
}

// First differences are MA(1): variance (1 + theta^2) noise_std^2.
TEST(Arima, DifferenceVarianceMatchesMaOne) {
  Rng rng(2);
  const Timeseries x = simulate_arima(rng, {0.5, 1.0, 100000});
  const Eigen::VectorXd d = x.col(0).tail(x.rows() - 1) - x.col(0).head(x.rows() - 1);
  const double var = (d.array() - d.mean()).square().sum() / (d.size() - 1);
  EXPECT_NEAR(var, 1.25, 0.03 * 1.25);
}

TEST(Arima, ScaledIntoUnitInterval) {
  Rng rng(3);
  const Timeseries x = generate_arima(rng, {0.5, 0.1, 5000}, 3);
  EXPECT_DOUBLE_EQ(x.minCoeff(), 0.0);
  EXPECT_DOUBLE_EQ(x.maxCoeff(), 1.0);
  EXPECT_EQ(scale_to_unit(Timeseries::Constant(4, 1, 3.0)),
            Timeseries::Constant(4, 1, 0.5));
}

TEST(Arima, RejectsBadParams) {
  Rng rng(4);
  EXPECT_THROW(simulate_arima(rng, {0.5, 0.0, 100}), InvalidInput);
  EXPECT_THROW(simulate_arima(rng, {0.5, 1.0, 1}), InvalidInput);
}

TEST(LinearForecaster, RampIsFitExactly) {
  const Timeseries ramp = Ramp(2000);
  const Forecaster f = fit_linear_forecaster(ramp, 5, 10);
  EXPECT_LT(prediction_residuals(f, ramp).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(LinearForecaster, ConstantSeriesPredictsConstant) {
  const Timeseries c = Timeseries::Constant(300, 1, 0.25);
  const Forecaster f = fit_linear_forecaster(c, 4, 3);
  EXPECT_LT((f.predict(c).array() - 0.25).abs().maxCoeff(), 1e-12);
  EXPECT_LT(prediction_residuals(f, c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(LinearForecaster, InSampleResidualsAreZeroMean) {
  Rng rng(6);
  const Timeseries x = generate_arima(rng, {0.5, 0.1, 20000}, 2);
  const Forecaster f = fit_linear_forecaster(x, 7, 5);
  const Eigen::MatrixXd r = prediction_residuals(f, x);
  EXPECT_LT(r.colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LinearForecaster, OutOfSampleWorseThanInSample) {
  Rng rng(7);
  const Timeseries x = generate_arima(rng, {0.5, 0.1, 10000});
  const Timeseries train = x.topRows(7000);
  const Timeseries test = x.bottomRows(3000);
  const Forecaster f = fit_linear_forecaster(train, 10, 10);
  const double in = prediction_residuals(f, train).array().square().mean();
  const double out = prediction_residuals(f, test).array().square().mean();
  EXPECT_TRUE(std::isfinite(out));
  EXPECT_GT(out, in);
}

TEST(LinearForecaster, LargerWindowFitsNoWorseInSample) {
  Rng rng(8);
  const Timeseries x = generate_arima(rng, {0.5, 0.1, 20000});
  double prev = 0.0;
  for (int w : {10, 7, 4}) {
    const Forecaster f = fit_linear_forecaster(x, w, 10);
    const double tr = estimate_error_covariance(f, x).trace();
    EXPECT_GT(tr, prev);
    prev = tr;
  }
}

TEST(LinearForecaster, InsufficientDataAndUnfitted) {
  EXPECT_THROW(fit_linear_forecaster(Ramp(30), 10, 10), InsufficientData);
  EXPECT_THROW(fit_linear_forecaster(Ramp(100), 0, 10), InvalidInput);
  Forecaster f;
  EXPECT_THROW(f.predict(Ramp(10)), InvalidInput);
  const Forecaster g = fit_linear_forecaster(Ramp(200), 5, 2);
  EXPECT_THROW(g.predict(Ramp(3)), InvalidInput);
}

TEST(ErrorCovariance, PerfectForecasterGivesRidgeFloor) {
  const Timeseries c = Timeseries::Constant(200, 1, 0.4);
  const Eigen::MatrixXd sigma = estimate_error_covariance(ConstantForecaster(0.4, 3, 4), c);
  EXPECT_LT((sigma - kDefaultRidge * Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(),
            1e-18);
}

TEST(ErrorCovariance, RecoversInjectedVariance) {
  Rng rng(10);
  const double s = 0.3;
  Eigen::MatrixXd residuals(10000, 6);
  for (Eigen::Index i = 0; i < residuals.rows(); ++i) {
    residuals.row(i) = test::Gaussian(rng, 6, s).transpose();
  }
  const Eigen::MatrixXd sigma = residual_covariance(residuals);
  for (Eigen::Index j = 0; j < 6; ++j) EXPECT_NEAR(sigma(j, j), s * s, 0.1 * s * s);
}

TEST(ErrorCovariance, SymmetricWithEigenvalueFloor) {
  Rng rng(11);
  const Timeseries x = generate_arima(rng, {-0.3, 0.1, 5000}, 2);
  const Forecaster f = fit_linear_forecaster(x, 6, 4);
  const Eigen::MatrixXd sigma = estimate_error_covariance(f, x);
  EXPECT_EQ(sigma, sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  EXPECT_GE(eig.eigenvalues().minCoeff(), kDefaultRidge - 1e-12);
}

TEST(ErrorCovariance, InsufficientHoldout) {
  const Forecaster f = ConstantForecaster(0.0, 3, 5);
  EXPECT_THROW(estimate_error_covariance(f, Ramp(12)), InsufficientData);
}

TEST(PrivateForecast, HugeBudgetIsNearlyPurePrediction) {
  SourceProfile src;
  src.privacy = {1.0, 1e6, 1.0, 0.0};
  src.forecaster = ConstantForecaster(0.5, 2, 5);
  const Timeseries history = Timeseries::Constant(2, 1, 0.5);
  Rng rng(12);
  for (int k = 0; k < 100; ++k) {
    const Eigen::VectorXd out = emit_private_forecast(rng, src, history, 1e3);
    EXPECT_LT((out.array() - 0.5).abs().maxCoeff(), 1e-4);
  }
}

// Output - truth = prediction error + DP noise; with a perfect forecaster
// only the Laplace part remains.
TEST(PrivateForecast, ErrorVarianceIsLaplaceVariance) {
  SourceProfile src;
  src.privacy = {1.0, 4.0, 1.5, 0.3};
  src.forecaster = ConstantForecaster(0.2, 3, 4);
  const Timeseries history = Timeseries::Constant(3, 1, 0.2);
  const Eigen::VectorXd truth = Eigen::VectorXd::Constant(4, 0.2);
  const double rho = 0.8;
  Rng rng(13);
  Eigen::MatrixXd errors(100000, 4);
  for (Eigen::Index k = 0; k < errors.rows(); ++k) {
    errors.row(k) = (emit_private_forecast(rng, src, history, rho) - truth).transpose();
  }
  const double expected = laplace_variance(rho, src.privacy);
  for (Eigen::Index j = 0; j < 4; ++j) {
    const Eigen::VectorXd col = errors.col(j);
    const double var = (col.array() - col.mean()).square().sum() / (col.size() - 1);
    EXPECT_NEAR(var, expected, 0.03 * expected);
  }
}

TEST(PrivateForecast, DeterministicPerSeed) {
  Rng series_rng(14);
  const Timeseries x = generate_arima(series_rng, {0.5, 0.1, 3000});
  SourceProfile src;
  src.privacy = {1.0, 8.0, 2.5, 0.6};
  src.forecaster = fit_linear_forecaster(x, 7, 10);
  Rng a = substream(3, StreamKind::kSourceNoise, 9, 1);
  Rng b = substream(3, StreamKind::kSourceNoise, 9, 1);
  EXPECT_EQ(emit_private_forecast(a, src, x, 1.0), emit_private_forecast(b, src, x, 1.0));
}

TEST(PrivateForecast, SourceSubstreamsAreUncorrelated) {
  const PrivacyProfile prof{1.0, 4.0, 1.5, 0.3};
  const int episodes = 10000;
  Eigen::MatrixXd first(episodes, 3);
  for (int k = 0; k < episodes; ++k) {
    for (int i = 0; i < 3; ++i) {
      Rng rng = substream(55, StreamKind::kSourceNoise, k, i);
      first(k, i) = dp_noise_for_source(rng, prof, 0.5, 10)[0];
    }
  }
  const Eigen::MatrixXd centered = first.rowwise() - first.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / (episodes - 1);
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      EXPECT_LT(std::abs(cov(i, j) / std::sqrt(cov(i, i) * cov(j, j))), 0.05);
    }
  }
}

TEST(TimeseriesCsv, RoundTripIsExact) {
  Rng rng(15);
  const Timeseries x = generate_arima(rng, {0.5, 0.1, 50}, 3);
  std::stringstream ss;
  write_timeseries_csv(ss, x);
  EXPECT_EQ(read_timeseries_csv(ss), x);
}

TEST(TimeseriesCsv, RejectsMalformedRows) {
  std::stringstream bad("1,2\n3\n");
  EXPECT_THROW(read_timeseries_csv(bad), InvalidInput);
  std::stringstream junk("1,abc\n");
  EXPECT_THROW(read_timeseries_csv(junk), InvalidInput);
}

}  // namespace
}  // namespace dpregret
