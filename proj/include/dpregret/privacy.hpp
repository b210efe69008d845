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
// Laplace-mechanism noise for a forecasting source whose privacy budget is
// bought with an incentive. The budget follows a logistic curve in the
// incentive and never reaches its ceiling alpha:
//
//   eps(rho)    = alpha / (1 + exp(-beta (rho - gamma)))
//   sigma2(rho) = 2 (sen / eps(rho))^2     (per-component Laplace variance)
//
// A larger eps means less privacy and less noise.
//
#ifndef DPREGRET_PRIVACY_HPP_
#define DPREGRET_PRIVACY_HPP_

#include <Eigen/Dense>

#include "dpregret/random.hpp"

namespace dpregret {

struct PrivacyProfile {
  double sen = 1.0;    // L1 sensitivity of the released forecast
  double alpha = 1.0;  // maximum acceptable budget
  double beta = 1.0;   // growth rate of the budget in the incentive
  double gamma = 0.0;  // incentive at which eps = alpha / 2

  // Throws InvalidInput unless sen, alpha, beta > 0 and gamma >= 0.
  void validate() const;
};

double privacy_budget(double rho, const PrivacyProfile& prof);

double laplace_variance(double rho, const PrivacyProfile& prof);

// d sigma2 / d rho; always negative.
double laplace_variance_derivative(double rho, const PrivacyProfile& prof);

// i.i.d. Laplace(0, scale) by inverse CDF, one uniform per component.
Eigen::VectorXd sample_laplace(Rng& rng, double scale, Eigen::Index dim);

// Laplace noise at scale sen / privacy_budget(rho).
Eigen::VectorXd dp_noise_for_source(Rng& rng, const PrivacyProfile& prof,
                                    double rho, Eigen::Index dim);

}  // namespace dpregret

#endif  // DPREGRET_PRIVACY_HPP_
