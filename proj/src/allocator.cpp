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
#include "dpregret/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "dpregret/errors.hpp"

namespace dpregret {
namespace {

void require_profiles(const Eigen::MatrixXd& psi,
                      std::span<const SourceProfile> profiles) {
  if (profiles.empty()) throw InvalidInput("need at least one source");
  if (psi.rows() != psi.cols()) throw InvalidInput("Psi must be square");
  for (const auto& src : profiles) {
    src.privacy.validate();
    if (src.sigma.rows() != psi.rows() || src.sigma.cols() != psi.cols()) {
      throw InvalidInput("source covariance does not match Psi dimensions");
    }
  }
}

// Coefficients stacked as a pT x n_src matrix, one column per source.
Eigen::MatrixXd stack(const std::vector<Eigen::VectorXd>& coeffs,
                      Eigen::Index series_size) {
  Eigen::MatrixXd out(series_size, static_cast<Eigen::Index>(coeffs.size()));
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (coeffs[i].size() != series_size) {
      throw InvalidInput("coefficient vector has wrong length");
    }
    out.col(static_cast<Eigen::Index>(i)) = coeffs[i];
  }
  return out;
}

std::vector<Eigen::VectorXd> unstack(const Eigen::MatrixXd& c) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(c.cols());
  for (Eigen::Index i = 0; i < c.cols(); ++i) out.emplace_back(c.col(i));
  return out;
}

// Row-wise projection onto the unit simplex.
Eigen::MatrixXd project_rows(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.rows(); ++j) {
    out.row(j) = project_simplex(x.row(j).transpose(), 1.0).transpose();
  }
  return out;
}

struct SpgResult {
  Eigen::MatrixXd x;
  double objective;
  double residual;
  int iterations;
  bool converged;
};

// Spectral projected gradient with Armijo backtracking along the projected
// direction. Iterates stay feasible because every step is a convex
// combination of two feasible points, and the objective never increases.
SpgResult spg(const std::function<double(const Eigen::MatrixXd&)>& f,
              const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>&
                  grad,
              const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>&
                  project,
              Eigen::MatrixXd x, const SolverOptions& options) {
  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-12;
  constexpr double kMaxStep = 1e12;

  double fx = f(x);
  Eigen::MatrixXd g = grad(x);
  auto residual_at = [&](const Eigen::MatrixXd& at, const Eigen::MatrixXd& gr) {
    return (at - project(at - gr)).cwiseAbs().maxCoeff();
  };
  double residual = residual_at(x, g);
  const double gnorm = g.cwiseAbs().maxCoeff();
  double lambda = gnorm > 0.0 ? std::clamp(1.0 / gnorm, kMinStep, kMaxStep) : 1.0;

  int it = 0;
  for (; it < options.max_iterations && residual > options.tolerance; ++it) {
    const Eigen::MatrixXd d = project(x - lambda * g) - x;
    const double slope = (g.array() * d.array()).sum();
    if (!(slope < 0.0)) break;  // no descent left at working precision

    double t = 1.0;
    Eigen::MatrixXd trial = x + d;
    double ftrial = f(trial);
    int backtracks = 0;
    while (ftrial > fx + kArmijo * t * slope && backtracks < 60) {
      t *= 0.5;
      trial = x + t * d;
      ftrial = f(trial);
      ++backtracks;
    }
    if (ftrial > fx) break;

    const Eigen::MatrixXd g_new = grad(trial);
    const Eigen::MatrixXd s = trial - x;
    const double sy = (s.array() * (g_new - g).array()).sum();
    const double ss = s.squaredNorm();
    lambda = sy > 0.0 ? std::clamp(ss / sy, kMinStep, kMaxStep) : kMaxStep;

    x = trial;
    fx = ftrial;
    g = g_new;
    residual = residual_at(x, g);
  }
  return {std::move(x), fx, residual, it, residual <= options.tolerance};
}

std::vector<Eigen::MatrixXd> schur_weights(
    const Eigen::MatrixXd& psi, std::span<const SourceProfile> profiles,
    const Eigen::VectorXd& incentives) {
  std::vector<Eigen::MatrixXd> h;
  h.reserve(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    h.push_back(regret_weight(psi, profiles[i], incentives[static_cast<Eigen::Index>(i)]));
  }
  return h;
}

// a_i = sum_j Psi_jj c_i[j]^2, the weight of source i's Laplace variance.
Eigen::VectorXd noise_weights(const Eigen::MatrixXd& psi,
                              const Eigen::MatrixXd& c) {
  return (c.array().square().colwise() * psi.diagonal().array())
      .colwise()
      .sum()
      .transpose();
}

}  // namespace

void check_feasible(const Allocation& alloc, Eigen::Index series_size,
                    double rho_total) {
  const auto n = alloc.sources();
  if (n == 0) throw InvalidInput("allocation has no sources");
  if (alloc.incentives.size() != static_cast<Eigen::Index>(n)) {
    throw InvalidInput("allocation has " + std::to_string(n) +
                       " coefficient vectors but " +
                       std::to_string(alloc.incentives.size()) + " incentives");
  }
  Eigen::VectorXd total = Eigen::VectorXd::Zero(series_size);
  for (const auto& c : alloc.coeffs) {
    if (c.size() != series_size) {
      throw InvalidInput("coefficient vector has length " +
                         std::to_string(c.size()) + ", expected " +
                         std::to_string(series_size));
    }
    if (c.size() > 0 && c.minCoeff() < -1e-12) {
      throw InvalidInput("negative combination coefficient");
    }
    total += c;
  }
  if ((total.array() - 1.0).abs().maxCoeff() > kFeasibilityTolerance) {
    throw InvalidInput("combination coefficients do not sum to 1");
  }
  if (alloc.incentives.minCoeff() < -1e-12) {
    throw InvalidInput("negative incentive");
  }
  if (rho_total >= 0.0 &&
      std::abs(alloc.incentives.sum() - rho_total) > kFeasibilityTolerance) {
    throw InvalidInput("incentives do not sum to the total budget");
  }
}

Allocation uniform_allocation(std::size_t n_src, double rho_total,
                              Eigen::Index series_size) {
  if (n_src == 0) throw InvalidInput("need at least one source");
  if (!(rho_total >= 0.0)) throw InvalidInput("total incentive must be >= 0");
  const double share = 1.0 / static_cast<double>(n_src);
  Allocation a;
  a.coeffs.assign(n_src, Eigen::VectorXd::Constant(series_size, share));
  a.incentives = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_src),
                                           rho_total * share);
  return a;
}

Eigen::MatrixXd regret_weight(const Eigen::MatrixXd& psi,
                              const SourceProfile& src, double rho) {
  Eigen::MatrixXd cov = src.sigma;
  cov.diagonal().array() += laplace_variance(rho, src.privacy);
  return psi.cwiseProduct(cov);
}

double expected_regret(const Eigen::MatrixXd& psi,
                       std::span<const SourceProfile> profiles,
                       const Allocation& alloc) {
  require_profiles(psi, profiles);
  if (alloc.sources() != profiles.size()) {
    throw InvalidInput("allocation and profile counts differ");
  }
  check_feasible(alloc, psi.rows());
  double total = 0.0;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& c = alloc.coeffs[i];
    total += c.dot(regret_weight(psi, profiles[i],
                                 alloc.incentives[static_cast<Eigen::Index>(i)]) *
                   c);
  }
  return total;
}

Eigen::VectorXd combine_forecasts(std::span<const Eigen::VectorXd> coeffs,
                                  std::span<const Eigen::VectorXd> forecasts) {
  if (coeffs.empty() || coeffs.size() != forecasts.size()) {
    throw InvalidInput("need one coefficient vector per forecast");
  }
  const Eigen::Index d = forecasts.front().size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d);
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    if (coeffs[i].size() != d || forecasts[i].size() != d) {
      throw InvalidInput("forecast/coefficient length mismatch");
    }
    out.array() += coeffs[i].array() * forecasts[i].array();
  }
  return out;
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, double total) {
  if (v.size() < 1) throw InvalidInput("cannot project an empty vector");
  if (!(total > 0.0)) throw InvalidInput("simplex total must be > 0");
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumsum += u[k];
    const double candidate = (cumsum - total) / static_cast<double>(k + 1);
    if (u[k] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).max(0.0);
}

CoefficientResult solve_coefficients(const Eigen::MatrixXd& psi,
                                     std::span<const SourceProfile> profiles,
                                     const Eigen::VectorXd& incentives,
                                     const std::vector<Eigen::VectorXd>& init,
                                     const SolverOptions& options) {
  require_profiles(psi, profiles);
  const auto n = static_cast<Eigen::Index>(profiles.size());
  if (incentives.size() != n || static_cast<Eigen::Index>(init.size()) != n) {
    throw InvalidInput("incentive/coefficient counts must match sources");
  }
  const Eigen::MatrixXd c0 = stack(init, psi.rows());
  const auto h = schur_weights(psi, profiles, incentives);

  auto f = [&](const Eigen::MatrixXd& c) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) v += c.col(i).dot(h[i] * c.col(i));
    return v;
  };
  auto grad = [&](const Eigen::MatrixXd& c) {
    Eigen::MatrixXd g(c.rows(), c.cols());
    for (Eigen::Index i = 0; i < n; ++i) g.col(i) = 2.0 * (h[i] * c.col(i));
    return g;
  };

  CoefficientResult out;
  if (n == 1) {
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(psi.rows(), 1);
    out.solution = unstack(ones);
    out.objective = f(ones);
    out.converged = true;
    return out;
  }
  SpgResult r = spg(f, grad, project_rows, c0, options);
  out.solution = unstack(r.x);
  out.objective = r.objective;
  out.kkt_residual = r.residual;
  out.iterations = r.iterations;
  out.converged = r.converged || r.residual <= kKktTolerance;
  return out;
}

IncentiveResult solve_incentives(const Eigen::MatrixXd& psi,
                                 std::span<const SourceProfile> profiles,
                                 const std::vector<Eigen::VectorXd>& coeffs,
                                 double rho_total, const Eigen::VectorXd& init,
                                 const SolverOptions& options) {
  require_profiles(psi, profiles);
  if (!(rho_total >= 0.0)) throw InvalidInput("total incentive must be >= 0");
  const auto n = static_cast<Eigen::Index>(profiles.size());
  if (init.size() != n || static_cast<Eigen::Index>(coeffs.size()) != n) {
    throw InvalidInput("incentive/coefficient counts must match sources");
  }
  const Eigen::VectorXd a = noise_weights(psi, stack(coeffs, psi.rows()));

  auto f = [&](const Eigen::MatrixXd& rho) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      v += a[i] * laplace_variance(std::max(rho(i, 0), 0.0), profiles[i].privacy);
    }
    return v;
  };
  auto grad = [&](const Eigen::MatrixXd& rho) {
    Eigen::MatrixXd g(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      g(i, 0) = a[i] * laplace_variance_derivative(std::max(rho(i, 0), 0.0),
                                                   profiles[i].privacy);
    }
    return g;
  };

  IncentiveResult out;
  if (rho_total == 0.0 || n == 1) {
    out.solution = Eigen::VectorXd::Constant(n, rho_total);
    if (rho_total == 0.0) out.solution.setZero();
    out.objective = expected_regret(psi, profiles, Allocation{coeffs, out.solution});
    out.converged = true;
    return out;
  }
  auto project = [&](const Eigen::MatrixXd& rho) -> Eigen::MatrixXd {
    return project_simplex(rho.col(0), rho_total);
  };
  SpgResult r = spg(f, grad, project, init, options);
  out.solution = r.x.col(0);
  // Report the full expected regret, not only the incentive-dependent part.
  out.objective = expected_regret(psi, profiles, Allocation{coeffs, out.solution});
  out.kkt_residual = r.residual;
  out.iterations = r.iterations;
  out.converged = r.converged || r.residual <= kKktTolerance;
  return out;
}

double coefficient_kkt_residual(const Eigen::MatrixXd& psi,
                                std::span<const SourceProfile> profiles,
                                const Allocation& alloc) {
  require_profiles(psi, profiles);
  const Eigen::MatrixXd c = stack(alloc.coeffs, psi.rows());
  const auto h = schur_weights(psi, profiles, alloc.incentives);
  Eigen::MatrixXd g(c.rows(), c.cols());
  for (Eigen::Index i = 0; i < c.cols(); ++i) g.col(i) = 2.0 * (h[i] * c.col(i));
  return (c - project_rows(c - g)).cwiseAbs().maxCoeff();
}

double incentive_kkt_residual(const Eigen::MatrixXd& psi,
                              std::span<const SourceProfile> profiles,
                              const Allocation& alloc, double rho_total) {
  require_profiles(psi, profiles);
  if (rho_total == 0.0) return 0.0;
  const Eigen::VectorXd a = noise_weights(psi, stack(alloc.coeffs, psi.rows()));
  Eigen::VectorXd g(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    g[i] = a[i] * laplace_variance_derivative(alloc.incentives[i],
                                              profiles[i].privacy);
  }
  const Eigen::VectorXd& rho = alloc.incentives;
  return (rho - project_simplex(rho - g, rho_total)).cwiseAbs().maxCoeff();
}

AcsReport acs(const Eigen::MatrixXd& psi,
              std::span<const SourceProfile> profiles, double rho_total,
              const Allocation& init, const AcsOptions& options) {
  require_profiles(psi, profiles);
  if (init.sources() != profiles.size()) {
    throw InvalidInput("initial allocation and profile counts differ");
  }
  check_feasible(init, psi.rows(), rho_total);
  const int window = std::max(options.average_window, 1);

  AcsReport report;
  report.allocation = init;
  report.objective_trace.push_back(expected_regret(psi, profiles, init));
  std::vector<double> gaps{std::abs(report.objective_trace.back())};

  auto keep_going = [&] {
    const std::size_t k = std::min<std::size_t>(gaps.size(), window);
    const double mean =
        std::accumulate(gaps.end() - static_cast<std::ptrdiff_t>(k), gaps.end(), 0.0) /
        static_cast<double>(k);
    return mean >= options.eta;
  };

  while (keep_going()) {
    if (report.iterations >= options.max_iterations) return report;
    Allocation& a = report.allocation;

    const IncentiveResult rho = solve_incentives(
        psi, profiles, a.coeffs, rho_total, a.incentives, options.subproblem);
    a.incentives = rho.solution;
    report.worst_kkt_residual = std::max(report.worst_kkt_residual, rho.kkt_residual);

    const CoefficientResult c = solve_coefficients(
        psi, profiles, a.incentives, a.coeffs, options.subproblem);
    a.coeffs = c.solution;
    report.worst_kkt_residual = std::max(report.worst_kkt_residual, c.kkt_residual);

    const double prev = report.objective_trace.back();
    report.objective_trace.push_back(expected_regret(psi, profiles, a));
    gaps.push_back(std::abs(report.objective_trace.back() - prev));
    ++report.iterations;
  }
  report.converged = true;
  return report;
}

}  // namespace dpregret
