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
// Incentive and combination-coefficient allocation across private sources.
//
// With independent zero-mean source errors and an element-wise combination
// s_hat = sum_i c_i .* s_hat_i (sum_i c_i = 1, c_i >= 0), the expected regret
// is
//
//   E[dJ] = sum_i c_i' [Psi .* (Sigma_i + sigma2_i(rho_i) I)] c_i,
//
// minimized over c and rho subject to sum_i rho_i = rho_total, rho >= 0.
// The problem is convex in c for fixed rho and convex in rho for fixed c;
// acs() alternates between the two blocks.
//
#ifndef DPREGRET_ALLOCATOR_HPP_
#define DPREGRET_ALLOCATOR_HPP_

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "dpregret/forecast.hpp"

namespace dpregret {

inline constexpr double kFeasibilityTolerance = 1e-9;
inline constexpr double kKktTolerance = 1e-6;

struct Allocation {
  std::vector<Eigen::VectorXd> coeffs;  // one pT-vector per source
  Eigen::VectorXd incentives;           // one rho_i per source

  std::size_t sources() const { return coeffs.size(); }
};

// Throws InvalidInput unless the allocation has one nonnegative coefficient
// vector of length `series_size` and one nonnegative incentive per source,
// the coefficients sum to 1 element-wise and, when rho_total >= 0 is given,
// the incentives sum to rho_total.
void check_feasible(const Allocation& alloc, Eigen::Index series_size,
                    double rho_total = -1.0);

Allocation uniform_allocation(std::size_t n_src, double rho_total,
                              Eigen::Index series_size);

// Psi .* (Sigma + sigma2(rho) I).
Eigen::MatrixXd regret_weight(const Eigen::MatrixXd& psi,
                              const SourceProfile& src, double rho);

double expected_regret(const Eigen::MatrixXd& psi,
                       std::span<const SourceProfile> profiles,
                       const Allocation& alloc);

// sum_i coeffs[i] .* forecasts[i].
Eigen::VectorXd combine_forecasts(std::span<const Eigen::VectorXd> coeffs,
                                  std::span<const Eigen::VectorXd> forecasts);

// Euclidean projection onto {x >= 0, sum x = total}.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, double total);

struct SolverOptions {
  int max_iterations = 10000;
  // Stop once the projected-gradient residual falls below this.
  double tolerance = 1e-10;
};

template <typename Solution>
struct SubproblemResult {
  Solution solution;
  double objective = 0.0;
  // max-norm of x - P(x - grad f(x)); zero exactly at a KKT point.
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

using CoefficientResult = SubproblemResult<std::vector<Eigen::VectorXd>>;
using IncentiveResult = SubproblemResult<Eigen::VectorXd>;

// Minimizes E[dJ] over the coefficients with incentives held fixed. Each
// coordinate j carries its own simplex constraint over the sources.
CoefficientResult solve_coefficients(const Eigen::MatrixXd& psi,
                                     std::span<const SourceProfile> profiles,
                                     const Eigen::VectorXd& incentives,
                                     const std::vector<Eigen::VectorXd>& init,
                                     const SolverOptions& options = {});

// Minimizes sum_i a_i sigma2_i(rho_i), a_i = sum_j Psi_jj c_i[j]^2, over the
// scaled simplex sum rho = rho_total. The reported objective is the full
// expected regret at the solution.
IncentiveResult solve_incentives(const Eigen::MatrixXd& psi,
                                 std::span<const SourceProfile> profiles,
                                 const std::vector<Eigen::VectorXd>& coeffs,
                                 double rho_total,
                                 const Eigen::VectorXd& init,
                                 const SolverOptions& options = {});

double coefficient_kkt_residual(const Eigen::MatrixXd& psi,
                                std::span<const SourceProfile> profiles,
                                const Allocation& alloc);

double incentive_kkt_residual(const Eigen::MatrixXd& psi,
                              std::span<const SourceProfile> profiles,
                              const Allocation& alloc, double rho_total);

struct AcsOptions {
  double eta = 1e-8;
  // Terminate on the mean of the last `average_window` objective gaps.
  int average_window = 1;
  int max_iterations = 500;
  SolverOptions subproblem;
};

struct AcsReport {
  Allocation allocation;
  std::vector<double> objective_trace;  // trace[0] is the initial objective
  int iterations = 0;
  bool converged = false;
  // Largest KKT residual reported by any subproblem solve.
  double worst_kkt_residual = 0.0;
};

AcsReport acs(const Eigen::MatrixXd& psi,
              std::span<const SourceProfile> profiles, double rho_total,
              const Allocation& init, const AcsOptions& options = {});

}  // namespace dpregret

#endif  // DPREGRET_ALLOCATOR_HPP_
