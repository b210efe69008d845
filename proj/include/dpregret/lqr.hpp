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
// Finite-horizon LQR driven by an exogenous timeseries:
//
//   x_{t+1} = A x_t + B u_t + C s_t,
//   J(u; s, x0) = sum_{t=0}^{T} x_t' Q x_t + sum_{t=0}^{T-1} u_t' R u_t.
//
// Stacking u = [u_0; ...; u_{T-1}] and s = [s_0; ...; s_{T-1}] turns J into
// u'Ku + 2u'(L1 x0 + L2 s) + const, so the optimal plan is
// -K^{-1}(L1 x0 + L2 s) and the cost of planning on a wrong series s_hat is
// (s_hat - s)' Psi (s_hat - s) with Psi = L2' K^{-1} L2.
//
#ifndef DPREGRET_LQR_HPP_
#define DPREGRET_LQR_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>
#include <vector>

#include "dpregret/errors.hpp"

namespace dpregret {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar = double>
struct LqrSystem {
  MatrixX<Scalar> A;  // n x n
  MatrixX<Scalar> B;  // n x m
  MatrixX<Scalar> C;  // n x p
  MatrixX<Scalar> Q;  // n x n, symmetric PD
  MatrixX<Scalar> R;  // m x m, symmetric PD
  int horizon = 1;
  VectorX<Scalar> x0;  // n

  Eigen::Index state_dim() const { return A.rows(); }
  Eigen::Index action_dim() const { return B.cols(); }
  Eigen::Index series_dim() const { return C.cols(); }
};

template <typename Scalar = double>
struct Trajectory {
  MatrixX<Scalar> states;   // (T+1) x n
  MatrixX<Scalar> actions;  // T x m
  Scalar cost = 0;
};

template <typename Scalar = double>
struct CompiledLqr {
  LqrSystem<Scalar> system;
  std::vector<MatrixX<Scalar>> M;  // M[t]: stacked actions -> x_{t+1}
  std::vector<MatrixX<Scalar>> N;  // N[t]: stacked series -> x_{t+1}
  MatrixX<Scalar> K;               // mT x mT
  MatrixX<Scalar> L1;              // mT x n
  MatrixX<Scalar> L2;              // mT x pT
  MatrixX<Scalar> Psi;             // pT x pT
  MatrixX<Scalar> Kinv_L2;         // mT x pT
  Eigen::LLT<MatrixX<Scalar>> K_llt;

  Eigen::Index actions_size() const { return K.rows(); }
  Eigen::Index series_size() const { return Psi.rows(); }
};

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

template <typename Scalar>
void require_symmetric_pd(const MatrixX<Scalar>& m, const char* name) {
  require(m.rows() == m.cols() && m.rows() > 0,
          std::string(name) + " must be a non-empty square matrix");
  const Scalar scale = m.cwiseAbs().maxCoeff();
  require(std::isfinite(static_cast<double>(scale)),
          std::string(name) + " has non-finite entries");
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= Scalar(1e-10) * scale,
          std::string(name) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> eig(m, Eigen::EigenvaluesOnly);
  const Scalar lo = eig.eigenvalues().minCoeff();
  const Scalar hi = eig.eigenvalues().maxCoeff();
  require(hi > Scalar(0) && lo > Scalar(1e-10) * hi,
          std::string(name) + " is not positive definite");
}

template <typename Derived>
void require_size(const Eigen::MatrixBase<Derived>& v, Eigen::Index n,
                  const char* name) {
  require(v.cols() == 1 && v.rows() == n,
          std::string(name) + ": expected length " + std::to_string(n) +
              ", got " + std::to_string(v.rows()) + "x" +
              std::to_string(v.cols()));
}

}  // namespace detail

// Throws InvalidInput naming the first violated invariant.
template <typename Scalar>
void check_system(const LqrSystem<Scalar>& sys) {
  using detail::require;
  const auto n = sys.A.rows();
  require(n > 0 && sys.A.cols() == n, "A must be square and non-empty");
  require(sys.B.rows() == n && sys.B.cols() > 0, "B must be n x m with m >= 1");
  require(sys.C.rows() == n && sys.C.cols() > 0, "C must be n x p with p >= 1");
  require(sys.Q.rows() == n, "Q must be n x n");
  require(sys.R.rows() == sys.B.cols(), "R must be m x m");
  require(sys.x0.size() == n, "x0 must have length n");
  require(sys.horizon >= 1, "horizon T must be >= 1");
  detail::require_symmetric_pd(sys.Q, "Q");
  detail::require_symmetric_pd(sys.R, "R");
}

template <typename Scalar>
CompiledLqr<Scalar> compile_lqr(const LqrSystem<Scalar>& sys) {
  check_system(sys);
  const Eigen::Index n = sys.state_dim();
  const Eigen::Index m = sys.action_dim();
  const Eigen::Index p = sys.series_dim();
  const int T = sys.horizon;

  CompiledLqr<Scalar> out;
  out.system = sys;
  out.M.reserve(T);
  out.N.reserve(T);

  // powers[k] = A^k, k = 0..T
  std::vector<MatrixX<Scalar>> powers(T + 1);
  powers[0] = MatrixX<Scalar>::Identity(n, n);
  for (int k = 1; k <= T; ++k) powers[k] = sys.A * powers[k - 1];

  out.K = MatrixX<Scalar>::Zero(m * T, m * T);
  for (int t = 0; t < T; ++t) out.K.block(m * t, m * t, m, m) = sys.R;
  out.L1 = MatrixX<Scalar>::Zero(m * T, n);
  out.L2 = MatrixX<Scalar>::Zero(m * T, p * T);

  for (int t = 0; t < T; ++t) {
    MatrixX<Scalar> Mt = MatrixX<Scalar>::Zero(n, m * T);
    MatrixX<Scalar> Nt = MatrixX<Scalar>::Zero(n, p * T);
    for (int k = 0; k <= t; ++k) {
      Mt.block(0, m * k, n, m) = powers[t - k] * sys.B;
      Nt.block(0, p * k, n, p) = powers[t - k] * sys.C;
    }
    const MatrixX<Scalar> MtQ = Mt.transpose() * sys.Q;
    out.K.noalias() += MtQ * Mt;
    out.L1.noalias() += MtQ * powers[t + 1];
    out.L2.noalias() += MtQ * Nt;
    out.M.push_back(std::move(Mt));
    out.N.push_back(std::move(Nt));
  }
  out.K = Scalar(0.5) * (out.K + out.K.transpose()).eval();

  out.K_llt.compute(out.K);
  if (out.K_llt.info() != Eigen::Success ||
      out.K_llt.rcond() < Scalar(1e-14)) {
    throw ConditioningError("K is numerically singular");
  }
  out.Kinv_L2 = out.K_llt.solve(out.L2);
  out.Psi = out.L2.transpose() * out.Kinv_L2;
  out.Psi = Scalar(0.5) * (out.Psi + out.Psi.transpose()).eval();
  return out;
}

// -K^{-1}(L1 x0 + L2 s).
template <typename Scalar, typename DerivedX, typename DerivedS>
VectorX<Scalar> optimal_actions(const CompiledLqr<Scalar>& c,
                                const Eigen::MatrixBase<DerivedX>& x0,
                                const Eigen::MatrixBase<DerivedS>& series) {
  detail::require_size(x0, c.system.state_dim(), "x0");
  detail::require_size(series, c.series_size(), "series");
  return -c.K_llt.solve(c.L1 * x0 + c.L2 * series);
}

template <typename Scalar, typename DerivedX, typename DerivedU,
          typename DerivedS>
Trajectory<Scalar> simulate(const LqrSystem<Scalar>& sys,
                            const Eigen::MatrixBase<DerivedX>& x0,
                            const Eigen::MatrixBase<DerivedU>& actions,
                            const Eigen::MatrixBase<DerivedS>& series) {
  const Eigen::Index n = sys.state_dim();
  const Eigen::Index m = sys.action_dim();
  const Eigen::Index p = sys.series_dim();
  const int T = sys.horizon;
  detail::require_size(x0, n, "x0");
  detail::require_size(actions, m * T, "actions");
  detail::require_size(series, p * T, "series");

  Trajectory<Scalar> traj;
  traj.states.resize(T + 1, n);
  traj.actions.resize(T, m);
  VectorX<Scalar> x = x0;
  traj.states.row(0) = x.transpose();
  Scalar cost = x.dot(sys.Q * x);
  for (int t = 0; t < T; ++t) {
    const auto u = actions.segment(m * t, m);
    x = (sys.A * x + sys.B * u + sys.C * series.segment(p * t, p)).eval();
    traj.actions.row(t) = u.transpose();
    traj.states.row(t + 1) = x.transpose();
    cost += u.dot(sys.R * u) + x.dot(sys.Q * x);
  }
  traj.cost = cost;
  return traj;
}

template <typename Scalar, typename DerivedX, typename DerivedU,
          typename DerivedS>
Scalar rollout_cost(const LqrSystem<Scalar>& sys,
                    const Eigen::MatrixBase<DerivedX>& x0,
                    const Eigen::MatrixBase<DerivedU>& actions,
                    const Eigen::MatrixBase<DerivedS>& true_series) {
  return simulate(sys, x0, actions, true_series).cost;
}

// (forecast - truth)' Psi (forecast - truth).
template <typename Scalar, typename DerivedF, typename DerivedT>
Scalar regret_quadratic(const CompiledLqr<Scalar>& c,
                        const Eigen::MatrixBase<DerivedF>& forecast,
                        const Eigen::MatrixBase<DerivedT>& truth) {
  detail::require_size(forecast, c.series_size(), "forecast");
  detail::require_size(truth, c.series_size(), "truth");
  const VectorX<Scalar> err = forecast - truth;
  return err.dot(c.Psi * err);
}

// Extra rollout cost of planning on `forecast` when `truth` happens.
template <typename Scalar, typename DerivedX, typename DerivedF,
          typename DerivedT>
Scalar regret_rollout(const CompiledLqr<Scalar>& c,
                      const Eigen::MatrixBase<DerivedX>& x0,
                      const Eigen::MatrixBase<DerivedF>& forecast,
                      const Eigen::MatrixBase<DerivedT>& truth) {
  const VectorX<Scalar> planned = optimal_actions(c, x0, forecast);
  const VectorX<Scalar> ideal = optimal_actions(c, x0, truth);
  return rollout_cost(c.system, x0, planned, truth) -
         rollout_cost(c.system, x0, ideal, truth);
}

template <typename Scalar, typename DerivedX, typename DerivedF,
          typename DerivedT>
Scalar regret_rollout(const LqrSystem<Scalar>& sys,
                      const Eigen::MatrixBase<DerivedX>& x0,
                      const Eigen::MatrixBase<DerivedF>& forecast,
                      const Eigen::MatrixBase<DerivedT>& truth) {
  return regret_rollout(compile_lqr(sys), x0, forecast, truth);
}

}  // namespace dpregret

#endif  // DPREGRET_LQR_HPP_
