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
#include "dpregret/privacy.hpp"

#include <cmath>
#include <string>

#include "dpregret/errors.hpp"

namespace dpregret {
namespace {

void require_incentive(double rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw InvalidInput("incentive must be finite and >= 0, got " +
                       std::to_string(rho));
  }
}

// 1 + exp(-beta (rho - gamma)), the reciprocal of the logistic fraction.
double logistic_denominator(double rho, const PrivacyProfile& prof) {
  return 1.0 + std::exp(-prof.beta * (rho - prof.gamma));
}

}  // namespace

void PrivacyProfile::validate() const {
  if (!(sen > 0.0)) throw InvalidInput("sen must be > 0");
  if (!(alpha > 0.0)) throw InvalidInput("alpha must be > 0");
  if (!(beta > 0.0)) throw InvalidInput("beta must be > 0");
  if (!(gamma >= 0.0)) throw InvalidInput("gamma must be >= 0");
}

double privacy_budget(double rho, const PrivacyProfile& prof) {
  require_incentive(rho);
  return prof.alpha / logistic_denominator(rho, prof);
}

double laplace_variance(double rho, const PrivacyProfile& prof) {
  require_incentive(rho);
  const double scale = prof.sen * logistic_denominator(rho, prof) / prof.alpha;
  return 2.0 * scale * scale;
}

double laplace_variance_derivative(double rho, const PrivacyProfile& prof) {
  require_incentive(rho);
  const double e = std::exp(-prof.beta * (rho - prof.gamma));
  const double k = prof.sen / prof.alpha;
  return -4.0 * k * k * prof.beta * e * (1.0 + e);
}

Eigen::VectorXd sample_laplace(Rng& rng, double scale, Eigen::Index dim) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InvalidInput("Laplace scale must be finite and > 0");
  }
  if (dim < 1) throw InvalidInput("Laplace sample dimension must be >= 1");
  Eigen::VectorXd out(dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double u = uniform_open(rng) - 0.5;
    const double mag = -scale * std::log1p(-2.0 * std::abs(u));
    out[i] = u < 0.0 ? -mag : mag;
  }
  return out;
}

Eigen::VectorXd dp_noise_for_source(Rng& rng, const PrivacyProfile& prof,
                                    double rho, Eigen::Index dim) {
  return sample_laplace(rng, prof.sen / privacy_budget(rho, prof), dim);
}

}  // namespace dpregret
