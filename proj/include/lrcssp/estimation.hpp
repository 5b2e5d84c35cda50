#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>

#include "lrcssp/errors.hpp"
#include "lrcssp/projection.hpp"
#include "lrcssp/ssp.hpp"

namespace lrcssp {

// Sizes entering the confidence radii.
struct ProblemShape {
  Index d = 1;
  Index n_states = 1;
  Index n_actions = 1;
};

// Sufficient statistics of the ridge regressions at one state-action pair:
//   V = lambda I + sum c c^T,  b = sum c * loss,  X = sum e_{s'} c^T.
// Goal transitions contribute a zero target, so only V and tau move.
template <typename Scalar>
class SaStatistics {
 public:
  static constexpr Index kReinvertEvery = 1024;

  SaStatistics() = default;
  SaStatistics(Index d, Index n_states, Scalar lambda)
      : lambda_(lambda),
        v_bar_(lambda * Matrix<Scalar>::Identity(d, d)),
        v_bar_inv_(Matrix<Scalar>::Identity(d, d) / lambda),
        xty_loss_(Vector<Scalar>::Zero(d)),
        xty_trans_(Matrix<Scalar>::Zero(n_states, d)) {
    if (!(lambda > Scalar(0))) throw ConfigError("ridge parameter lambda must be positive");
  }

  template <typename DerivedC>
  void record_visit(const Eigen::MatrixBase<DerivedC>& c, std::optional<Index> next, Scalar loss) {
    if (c.size() != dim()) throw StructuralError("record_visit: context dimension mismatch");
    ++tau_;
    v_bar_.noalias() += c * c.transpose();
    if (++since_reinvert_ >= kReinvertEvery) {
      reinvert();
    } else {
      // Sherman-Morrison rank-one update of the inverse.
      const Vector<Scalar> u = v_bar_inv_ * c;
      v_bar_inv_.noalias() -= (u * u.transpose()) / (Scalar(1) + c.dot(u));
    }
    xty_loss_.noalias() += loss * c;
    if (next) {
      if (*next < 0 || *next >= xty_trans_.rows())
        throw StructuralError("record_visit: next state out of range");
      xty_trans_.row(*next) += c.transpose();
    }
  }

  void reinvert() {
    v_bar_inv_ = v_bar_.llt().solve(Matrix<Scalar>::Identity(dim(), dim()));
    since_reinvert_ = 0;
  }

  Index dim() const { return v_bar_.rows(); }
  Index tau() const { return tau_; }
  Scalar lambda() const { return lambda_; }
  const Matrix<Scalar>& v_bar() const { return v_bar_; }
  const Matrix<Scalar>& v_bar_inv() const { return v_bar_inv_; }
  const Vector<Scalar>& xty_loss() const { return xty_loss_; }
  const Matrix<Scalar>& xty_trans() const { return xty_trans_; }

 private:
  Scalar lambda_ = 1;
  Index tau_ = 0;
  Index since_reinvert_ = 0;
  Matrix<Scalar> v_bar_;
  Matrix<Scalar> v_bar_inv_;
  Vector<Scalar> xty_loss_;
  Matrix<Scalar> xty_trans_;
};

using SaStatisticsd = SaStatistics<double>;

// L_hat = V^{-1} b, the minimiser of sum (c^T L - loss)^2 + lambda ||L||^2.
template <typename Scalar>
Vector<Scalar> ridge_loss_estimate(const SaStatistics<Scalar>& stats) {
  return stats.v_bar().llt().solve(stats.xty_loss());
}

// One ridge regression per next state with one-hot targets, sharing V:
// row s'' of P_hat' is (V^{-1} X^T)^T row s''.
template <typename Scalar>
Matrix<Scalar> ridge_dynamics_estimate(const SaStatistics<Scalar>& stats) {
  return stats.v_bar().llt().solve(stats.xty_trans().transpose()).transpose();
}

// ||c||_{V^{-1}}.
template <typename Scalar, typename DerivedC>
Scalar context_norm(const SaStatistics<Scalar>& stats, const Eigen::MatrixBase<DerivedC>& c) {
  return std::sqrt(std::max(Scalar(0), c.dot(stats.v_bar_inv() * c)));
}

// sqrt(d log(8 |S||A| (1 + tau/lambda) / delta)) + sqrt(lambda)
inline double loss_radius(Index tau, const ProblemShape& shape, double lambda, double delta) {
  const double arg = 8.0 * static_cast<double>(shape.n_states * shape.n_actions) *
                     (1.0 + static_cast<double>(tau) / lambda) / delta;
  return std::sqrt(static_cast<double>(shape.d) * std::log(arg)) + std::sqrt(lambda);
}

// |S| (sqrt(d log(8 |S|^2 |A| (1 + tau/lambda) / delta)) + sqrt(lambda))
inline double dynamics_radius(Index tau, const ProblemShape& shape, double lambda, double delta) {
  const double s = static_cast<double>(shape.n_states);
  const double arg = 8.0 * s * s * static_cast<double>(shape.n_actions) *
                     (1.0 + static_cast<double>(tau) / lambda) / delta;
  return s * (std::sqrt(static_cast<double>(shape.d) * std::log(arg)) + std::sqrt(lambda));
}

// Right-hand side of the known test:
//   l_min / (10 B max{beta_P(tau), sqrt(log(4 m / delta))}).
inline double known_threshold(Index tau, const ProblemShape& shape, double lambda, double l_min,
                              double b_star, Index m, double delta) {
  const double beta = dynamics_radius(tau, shape, lambda, delta);
  const double growth = std::sqrt(std::log(4.0 * static_cast<double>(m) / delta));
  return l_min / (10.0 * b_star * std::max(beta, growth));
}

template <typename Scalar, typename DerivedC>
bool is_known(const SaStatistics<Scalar>& stats, const Eigen::MatrixBase<DerivedC>& c, double l_min,
              double b_star, Index m, double delta, const ProblemShape& shape) {
  const double threshold =
      known_threshold(stats.tau(), shape, static_cast<double>(stats.lambda()), l_min, b_star, m, delta);
  return static_cast<double>(context_norm(stats, c)) < threshold;
}

// Per-pair snapshot of the regression and its confidence radii.
template <typename Scalar>
struct PairEstimate {
  Vector<Scalar> l_hat;
  Matrix<Scalar> p_hat_raw;
  Matrix<Scalar> p_hat;
  Scalar beta_loss{};
  Scalar beta_dyn{};
  Index tau = 0;
};

template <typename Scalar>
PairEstimate<Scalar> estimate_pair(const SaStatistics<Scalar>& stats, const ProblemShape& shape,
                                   double delta, const ProjectionOptions& popt = {}) {
  PairEstimate<Scalar> out;
  out.tau = stats.tau();
  out.l_hat = ridge_loss_estimate(stats);
  out.p_hat_raw = ridge_dynamics_estimate(stats);
  out.p_hat = project_to_stochastic(out.p_hat_raw, stats.v_bar(), popt).matrix;
  const double lambda = static_cast<double>(stats.lambda());
  out.beta_loss = Scalar(loss_radius(stats.tau(), shape, lambda, delta));
  out.beta_dyn = Scalar(dynamics_radius(stats.tau(), shape, lambda, delta));
  return out;
}

}  // namespace lrcssp
