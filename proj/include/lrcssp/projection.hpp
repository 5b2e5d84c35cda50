#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "lrcssp/errors.hpp"
#include "lrcssp/ssp.hpp"

namespace lrcssp {

// Euclidean projection onto {x >= 0, sum(x) <= 1}. When clipping at zero
// leaves too much mass the sum constraint is active and this reduces to the
// sort-based projection onto the probability simplex.
template <typename Derived>
Vector<typename Derived::Scalar> project_capped_simplex(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> clipped = x.cwiseMax(Scalar(0));
  if (clipped.sum() <= Scalar(1)) return clipped;

  const Vector<Scalar> xv = x;
  std::vector<Scalar> u(xv.data(), xv.data() + xv.size());
  std::sort(u.begin(), u.end(), std::greater<Scalar>());
  Scalar cum = 0;
  Scalar theta = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cum += u[j];
    const Scalar t = (cum - Scalar(1)) / static_cast<Scalar>(j + 1);
    if (u[j] - t > Scalar(0)) theta = t;
  }
  return (xv.array() - theta).cwiseMax(Scalar(0)).matrix();
}

// ||M||_V^2 = tr(M V M^T).
template <typename DerivedM, typename DerivedV>
typename DerivedM::Scalar weighted_norm_sq(const Eigen::MatrixBase<DerivedM>& m,
                                           const Eigen::MatrixBase<DerivedV>& v) {
  return (m * v).cwiseProduct(m).sum();
}

template <typename Derived>
bool has_substochastic_columns(const Eigen::MatrixBase<Derived>& p,
                               typename Derived::Scalar tol = 0) {
  using Scalar = typename Derived::Scalar;
  return (p.array() >= Scalar(0)).all() &&
         (p.colwise().sum().array() <= Scalar(1) + tol).all();
}

struct ProjectionOptions {
  Index max_iter = 10000;
  double gap_tol = 1e-10;
};

template <typename Scalar>
struct ProjectionResult {
  Matrix<Scalar> matrix;
  Scalar objective{};
  Scalar gap_bound{};
  Index iterations = 0;
};

// argmin over matrices with sub-stochastic columns of tr((P - R) V (P - R)^T).
//
// Accelerated projected gradient with function-value restarts. Each iterate
// is certified through the gradient mapping G at step 1/L:
//   f(x+) - f* <= ||G|| * diam,  diam = sqrt(2 d)
// and the solver stops once that bound is below tolerance (or at the
// rounding floor of the gradient evaluation).
template <typename DerivedP, typename DerivedV>
ProjectionResult<typename DerivedP::Scalar> project_to_stochastic(
    const Eigen::MatrixBase<DerivedP>& p_raw, const Eigen::MatrixBase<DerivedV>& v_bar,
    const ProjectionOptions& opt = {}) {
  using Scalar = typename DerivedP::Scalar;
  using Mat = Matrix<Scalar>;
  const Index d = p_raw.cols();
  if (v_bar.rows() != d || v_bar.cols() != d)
    throw StructuralError("project_to_stochastic: metric must be d x d");

  const Mat raw = p_raw;
  const Mat metric = v_bar;
  ProjectionResult<Scalar> out;
  auto objective = [&](const Mat& p) { return weighted_norm_sq(p - raw, metric); };

  if (has_substochastic_columns(raw)) {
    out.matrix = raw;
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Mat> eig(metric, Eigen::EigenvaluesOnly);
  const Scalar lipschitz = Scalar(2) * eig.eigenvalues().maxCoeff();
  if (!(eig.eigenvalues().minCoeff() > Scalar(0)))
    throw StructuralError("project_to_stochastic: metric is not positive definite");
  const Scalar step = Scalar(1) / lipschitz;
  const Scalar diam = std::sqrt(Scalar(2 * d));

  auto project = [&](const Mat& p) {
    Mat q(p.rows(), p.cols());
    for (Index j = 0; j < d; ++j) q.col(j) = project_capped_simplex(p.col(j));
    return q;
  };
  auto gradient = [&](const Mat& p) -> Mat { return Scalar(2) * (p - raw) * metric; };

  Mat x = project(raw);
  const Scalar floor = Scalar(100) * std::numeric_limits<Scalar>::epsilon() * lipschitz * diam *
                       (std::sqrt(Scalar(d)) + (x - raw).norm());
  const Scalar target = std::max(Scalar(opt.gap_tol), floor);

  Mat y = x;
  Scalar fx = objective(x);
  Scalar momentum = 1;
  for (Index it = 1; it <= opt.max_iter; ++it) {
    out.iterations = it;
    // Certify the current feasible iterate.
    const Mat x_plus = project(x - step * gradient(x));
    out.gap_bound = (x - x_plus).norm() / step * diam;
    if (out.gap_bound <= target || x_plus == x) {
      out.matrix = x_plus;
      out.objective = objective(x_plus);
      return out;
    }

    Mat x_next = project(y - step * gradient(y));
    const Scalar f_next = objective(x_next);
    if (f_next > fx) {
      // Restart from the plain gradient step, which never increases f.
      momentum = 1;
      y = x_plus;
      x = x_plus;
      fx = objective(x);
      continue;
    }
    const Scalar next_momentum = (Scalar(1) + std::sqrt(Scalar(1) + Scalar(4) * momentum * momentum)) / 2;
    y = x_next + ((momentum - Scalar(1)) / next_momentum) * (x_next - x);
    x = std::move(x_next);
    fx = f_next;
    momentum = next_momentum;
  }
  throw ProjectionError("stochastic-matrix projection exceeded its iteration budget",
                        static_cast<double>(out.gap_bound));
}

}  // namespace lrcssp
