#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lrcssp/errors.hpp"

namespace lrcssp {

using Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Values are stored for non-goal states only; the goal has value 0.
template <typename Scalar>
using ValueFunction = Vector<Scalar>;

// Tabular SSP with an implicit goal: the probability of reaching the goal
// from (s, a) is 1 - trans.row(s * n_actions + a).sum().
template <typename Scalar>
struct SspInstance {
  Index n_states = 0;
  Index n_actions = 0;
  Matrix<Scalar> loss;   // n_states x n_actions
  Matrix<Scalar> trans;  // (n_states * n_actions) x n_states

  static SspInstance zeros(Index n_states, Index n_actions) {
    SspInstance out;
    out.n_states = n_states;
    out.n_actions = n_actions;
    out.loss = Matrix<Scalar>::Zero(n_states, n_actions);
    out.trans = Matrix<Scalar>::Zero(n_states * n_actions, n_states);
    return out;
  }

  Index row(Index s, Index a) const { return s * n_actions + a; }

  auto next(Index s, Index a) const { return trans.row(row(s, a)); }
  auto next(Index s, Index a) { return trans.row(row(s, a)); }

  Scalar goal_mass(Index s, Index a) const { return Scalar(1) - trans.row(row(s, a)).sum(); }
};

using SspInstanced = SspInstance<double>;

// Stationary deterministic policy.
struct Policy {
  std::vector<Index> action;

  Index operator[](Index s) const { return action[static_cast<std::size_t>(s)]; }
  Index size() const { return static_cast<Index>(action.size()); }
  bool operator==(const Policy&) const = default;

  static Policy constant(Index n_states, Index a) {
    return Policy{std::vector<Index>(static_cast<std::size_t>(n_states), a)};
  }
};

template <typename Scalar>
void check_ssp(const SspInstance<Scalar>& ssp) {
  if (ssp.loss.rows() != ssp.n_states || ssp.loss.cols() != ssp.n_actions ||
      ssp.trans.rows() != ssp.n_states * ssp.n_actions || ssp.trans.cols() != ssp.n_states) {
    throw StructuralError("SSP tables do not match n_states x n_actions");
  }
  if ((ssp.loss.array() < Scalar(0)).any() || (ssp.loss.array() > Scalar(1)).any()) {
    throw StructuralError("SSP loss outside [0, 1]");
  }
  if ((ssp.trans.array() < Scalar(0)).any()) {
    throw StructuralError("SSP transition with negative mass");
  }
  if ((ssp.trans.rowwise().sum().array() > Scalar(1) + Scalar(1e-9)).any()) {
    throw StructuralError("SSP transition row sums above 1");
  }
}

template <typename Scalar>
void check_policy(const SspInstance<Scalar>& ssp, const Policy& pi) {
  if (pi.size() != ssp.n_states) throw StructuralError("policy size does not match n_states");
  for (Index a : pi.action) {
    if (a < 0 || a >= ssp.n_actions) throw StructuralError("policy action out of range");
  }
}

// One-step lookahead: q(s, a) = loss(s, a) + sum_s' trans(s, a)[s'] v(s').
template <typename Scalar>
Matrix<Scalar> q_values(const ValueFunction<Scalar>& v, const SspInstance<Scalar>& ssp) {
  if (v.size() != ssp.n_states) throw StructuralError("value function size does not match n_states");
  Vector<Scalar> cont = ssp.trans * v;
  return ssp.loss + cont.reshaped(ssp.n_actions, ssp.n_states).transpose();
}

// Bellman optimality backup; when `greedy` is non-null it receives the argmin
// policy with ties broken towards the lowest action index.
template <typename Scalar>
ValueFunction<Scalar> bellman_backup(const ValueFunction<Scalar>& v, const SspInstance<Scalar>& ssp,
                                     Policy* greedy = nullptr) {
  const Matrix<Scalar> q = q_values(v, ssp);
  ValueFunction<Scalar> out(ssp.n_states);
  if (greedy) greedy->action.assign(static_cast<std::size_t>(ssp.n_states), 0);
  for (Index s = 0; s < ssp.n_states; ++s) {
    Index best = 0;
    for (Index a = 1; a < ssp.n_actions; ++a) {
      if (q(s, a) < q(s, best)) best = a;
    }
    out(s) = q(s, best);
    if (greedy) greedy->action[static_cast<std::size_t>(s)] = best;
  }
  return out;
}

template <typename Scalar>
struct PlanningResult {
  ValueFunction<Scalar> values;
  Policy policy;
  Scalar residual{};
  Index iterations = 0;
};

// Value iteration from the zero function. The returned values satisfy
// ||V - backup(V)||_inf <= tol and the policy is greedy with respect to V.
template <typename Scalar>
PlanningResult<Scalar> value_iteration(const SspInstance<Scalar>& ssp, Scalar tol,
                                       Index max_iter = 1000000) {
  check_ssp(ssp);
  if (!(tol > Scalar(0))) throw StructuralError("value_iteration: tol must be positive");
  PlanningResult<Scalar> out;
  out.values = ValueFunction<Scalar>::Zero(ssp.n_states);
  for (Index it = 1; it <= max_iter; ++it) {
    Policy greedy;
    ValueFunction<Scalar> next = bellman_backup(out.values, ssp, &greedy);
    out.residual = (next - out.values).cwiseAbs().maxCoeff();
    out.iterations = it;
    if (out.residual <= tol) {
      out.policy = std::move(greedy);
      return out;
    }
    out.values = std::move(next);
  }
  throw NonConvergenceError("value iteration did not converge", static_cast<double>(out.residual));
}

// Loss vector and sub-stochastic transition matrix of a fixed policy.
template <typename Scalar>
std::pair<Vector<Scalar>, Matrix<Scalar>> policy_chain(const SspInstance<Scalar>& ssp,
                                                       const Policy& pi) {
  check_policy(ssp, pi);
  Vector<Scalar> loss(ssp.n_states);
  Matrix<Scalar> trans(ssp.n_states, ssp.n_states);
  for (Index s = 0; s < ssp.n_states; ++s) {
    loss(s) = ssp.loss(s, pi[s]);
    trans.row(s) = ssp.next(s, pi[s]);
  }
  return {std::move(loss), std::move(trans)};
}

struct EvaluationOptions {
  double tol = 1e-9;
  Index max_iter = 1000000;
  double value_cap = 1e9;
};

namespace detail {

template <typename Scalar>
ValueFunction<Scalar> iterate_fixed_point(const Vector<Scalar>& loss, const Matrix<Scalar>& trans,
                                          const EvaluationOptions& opt) {
  ValueFunction<Scalar> v = ValueFunction<Scalar>::Zero(loss.size());
  Scalar residual = std::numeric_limits<Scalar>::infinity();
  for (Index it = 0; it < opt.max_iter; ++it) {
    ValueFunction<Scalar> next = loss + trans * v;
    residual = (next - v).cwiseAbs().maxCoeff();
    if (residual <= Scalar(opt.tol)) return v;
    if (!next.allFinite() || next.maxCoeff() > Scalar(opt.value_cap)) {
      throw ImproperPolicyError("policy evaluation diverged past the value cap",
                                static_cast<double>(residual));
    }
    v = std::move(next);
  }
  throw ImproperPolicyError("policy evaluation did not converge within max_iter",
                            static_cast<double>(residual));
}

}  // namespace detail

// V^pi as the fixed point of V = l_pi + P_pi V, iterated from zero.
template <typename Scalar>
ValueFunction<Scalar> policy_evaluation(const SspInstance<Scalar>& ssp, const Policy& pi,
                                        const EvaluationOptions& opt = {}) {
  check_ssp(ssp);
  auto [loss, trans] = policy_chain(ssp, pi);
  return detail::iterate_fixed_point<Scalar>(loss, trans, opt);
}

// T^pi: policy evaluation with unit losses.
template <typename Scalar>
ValueFunction<Scalar> expected_hitting_time(const SspInstance<Scalar>& ssp, const Policy& pi,
                                            const EvaluationOptions& opt = {}) {
  check_ssp(ssp);
  auto [loss, trans] = policy_chain(ssp, pi);
  loss.setOnes();
  return detail::iterate_fixed_point<Scalar>(loss, trans, opt);
}

template <typename Scalar>
bool is_proper(const SspInstance<Scalar>& ssp, const Policy& pi, const EvaluationOptions& opt = {}) {
  try {
    expected_hitting_time(ssp, pi, opt);
    return true;
  } catch (const ImproperPolicyError&) {
    return false;
  }
}

}  // namespace lrcssp
