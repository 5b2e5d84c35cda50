#pragma once

// Independent reference implementations used as test oracles. Apart from the
// coverage simulator at the end, which drives the library's estimator against
// a known truth, nothing here calls into the library's solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "lrcssp/estimation.hpp"
#include "lrcssp/linear_model.hpp"
#include "lrcssp/ssp.hpp"

namespace oracle {

using lrcssp::Index;
using lrcssp::Policy;
using lrcssp::SspInstanced;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Random SSP whose every (s, a) reaches the goal with probability >= gamma.
inline SspInstanced random_ssp(Index S, Index A, double gamma, std::mt19937_64& rng) {
  SspInstanced ssp = SspInstanced::zeros(S, A);
  std::exponential_distribution<double> ex(1.0);
  for (Index s = 0; s < S; ++s) {
    for (Index a = 0; a < A; ++a) {
      ssp.loss(s, a) = uniform(rng);
      const double goal = gamma + (1.0 - gamma) * uniform(rng);
      VectorXd w(S);
      for (Index i = 0; i < S; ++i) w(i) = ex(rng);
      ssp.next(s, a) = ((1.0 - goal) * w / w.sum()).transpose();
    }
  }
  return ssp;
}

// Every deterministic stationary policy, in lexicographic order.
inline std::vector<Policy> all_policies(Index S, Index A) {
  std::vector<Policy> out;
  Policy p;
  p.action.assign(static_cast<std::size_t>(S), 0);
  while (true) {
    out.push_back(p);
    Index i = 0;
    while (i < S && ++p.action[static_cast<std::size_t>(i)] == A) p.action[static_cast<std::size_t>(i++)] = 0;
    if (i == S) break;
  }
  return out;
}

// V^pi = (I - P_pi)^{-1} l_pi by a direct dense solve.
inline VectorXd exact_policy_value(const SspInstanced& ssp, const Policy& pi) {
  const Index S = ssp.n_states;
  MatrixXd M = MatrixXd::Identity(S, S);
  VectorXd l(S);
  for (Index s = 0; s < S; ++s) {
    const Index a = pi[s];
    l(s) = ssp.loss(s, a);
    for (Index t = 0; t < S; ++t) M(s, t) -= ssp.trans(s * ssp.n_actions + a, t);
  }
  return M.fullPivLu().solve(l);
}

struct Enumerated {
  VectorXd v_star;
  std::vector<VectorXd> values;  // per policy, same order as all_policies
};

inline Enumerated enumerate_optimum(const SspInstanced& ssp) {
  Enumerated out;
  out.v_star = VectorXd::Constant(ssp.n_states, std::numeric_limits<double>::infinity());
  for (const Policy& p : all_policies(ssp.n_states, ssp.n_actions)) {
    VectorXd v = exact_policy_value(ssp, p);
    out.v_star = out.v_star.cwiseMin(v);
    out.values.push_back(std::move(v));
  }
  return out;
}

// min over actions of l + P v, written out loop by loop.
inline VectorXd direct_backup(const VectorXd& v, const SspInstanced& ssp) {
  VectorXd out(ssp.n_states);
  for (Index s = 0; s < ssp.n_states; ++s) {
    double best = std::numeric_limits<double>::infinity();
    for (Index a = 0; a < ssp.n_actions; ++a) {
      double q = ssp.loss(s, a);
      for (Index t = 0; t < ssp.n_states; ++t) q += ssp.trans(s * ssp.n_actions + a, t) * v(t);
      best = std::min(best, q);
    }
    out(s) = best;
  }
  return out;
}

// Euclidean projection onto {x >= 0, sum x <= 1} by bisection on the shift.
inline VectorXd capped_simplex_bisection(const VectorXd& x) {
  const VectorXd clipped = x.cwiseMax(0.0);
  if (clipped.sum() <= 1.0) return clipped;
  double lo = 0.0;
  double hi = x.maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((x.array() - mid).max(0.0).sum() > 1.0) lo = mid; else hi = mid;
  }
  return (x.array() - 0.5 * (lo + hi)).max(0.0).matrix();
}

// min q.v over {q >= 0, sum q <= 1, ||q - p||_1 <= r}: every vertex of the
// polytope is the solution of n active constraints chosen among q_i = 0,
// sum q = 1 and the 2^n facets of the L1 ball; enumerate them all.
inline double l1_lp_by_vertices(const VectorXd& p, double r, const VectorXd& v) {
  const Index n = p.size();
  std::vector<VectorXd> rows;
  std::vector<double> rhs;
  for (Index i = 0; i < n; ++i) {
    rows.push_back(VectorXd::Unit(n, i));
    rhs.push_back(0.0);
  }
  rows.push_back(VectorXd::Ones(n));
  rhs.push_back(1.0);
  for (Index mask = 0; mask < (Index(1) << n); ++mask) {
    VectorXd sgn(n);
    for (Index i = 0; i < n; ++i) sgn(i) = (mask >> i) & 1 ? 1.0 : -1.0;
    rows.push_back(sgn);
    rhs.push_back(r + sgn.dot(p));
  }
  auto feasible = [&](const VectorXd& q) {
    return (q.array() >= -1e-10).all() && q.sum() <= 1.0 + 1e-10 && (q - p).lpNorm<1>() <= r + 1e-10;
  };
  double best = std::numeric_limits<double>::infinity();
  const auto m = rows.size();
  std::vector<std::size_t> pick(static_cast<std::size_t>(n));
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t depth, std::size_t from) {
    if (depth == static_cast<std::size_t>(n)) {
      MatrixXd M(n, n);
      VectorXd b(n);
      for (Index k = 0; k < n; ++k) {
        M.row(k) = rows[pick[static_cast<std::size_t>(k)]].transpose();
        b(k) = rhs[pick[static_cast<std::size_t>(k)]];
      }
      Eigen::FullPivLU<MatrixXd> lu(M);
      if (lu.rank() < n) return;
      const VectorXd q = lu.solve(b);
      if (feasible(q)) best = std::min(best, q.dot(v));
      return;
    }
    for (std::size_t i = from; i < m; ++i) {
      pick[depth] = i;
      rec(depth + 1, i + 1);
    }
  };
  rec(0, 0);
  return best;
}

// Batch ridge solve from raw samples: (lambda I + X^T X)^{-1} X^T y.
inline VectorXd batch_ridge(const MatrixXd& X, const VectorXd& y, double lambda) {
  const MatrixXd G = lambda * MatrixXd::Identity(X.cols(), X.cols()) + X.transpose() * X;
  return G.colPivHouseholderQr().solve(X.transpose() * y);
}

inline double weighted_norm(const MatrixXd& M, const MatrixXd& V) {
  return std::sqrt(std::max(0.0, (M * V * M.transpose()).trace()));
}

// Breadth-first reachability of the goal on the support graph of P_pi.
inline bool goal_reachable_everywhere(const SspInstanced& ssp, const Policy& pi) {
  const Index S = ssp.n_states;
  std::vector<char> reach(static_cast<std::size_t>(S), 0);
  for (Index s = 0; s < S; ++s) {
    if (ssp.goal_mass(s, pi[s]) > 0.0) reach[static_cast<std::size_t>(s)] = 1;
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (Index s = 0; s < S; ++s) {
      if (reach[static_cast<std::size_t>(s)]) continue;
      for (Index t = 0; t < S; ++t) {
        if (ssp.trans(s * ssp.n_actions + pi[s], t) > 0.0 && reach[static_cast<std::size_t>(t)]) {
          reach[static_cast<std::size_t>(s)] = 1;
          changed = true;
          break;
        }
      }
    }
  }
  return std::all_of(reach.begin(), reach.end(), [](char r) { return r != 0; });
}

inline MatrixXd random_spd(Index d, double lo, double hi, std::mt19937_64& rng) {
  MatrixXd A(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) A(i, j) = uniform(rng, -1, 1);
  const Eigen::HouseholderQR<MatrixXd> qr(A);
  const MatrixXd Q = qr.householderQ();
  VectorXd ev(d);
  for (Index i = 0; i < d; ++i) ev(i) = uniform(rng, lo, hi);
  return Q * ev.asDiagonal() * Q.transpose();
}

inline MatrixXd random_raw(Index S, Index d, std::mt19937_64& rng) {
  MatrixXd P(S, d);
  for (Index i = 0; i < S; ++i)
    for (Index j = 0; j < d; ++j) P(i, j) = uniform(rng, -0.5, 1.2);
  return P;
}

inline MatrixXd random_feasible(Index S, Index d, std::mt19937_64& rng) {
  MatrixXd Q(S, d);
  std::exponential_distribution<double> ex(1.0);
  for (Index j = 0; j < d; ++j) {
    VectorXd w(S + 1);
    for (Index i = 0; i <= S; ++i) w(i) = ex(rng);
    Q.col(j) = (w / w.sum()).head(S);
  }
  return Q;
}

inline double projection_objective(const MatrixXd& P, const MatrixXd& R, const MatrixXd& V) {
  const MatrixXd D = P - R;
  return (D * V * D.transpose()).trace();
}

// Coarse grid over the four entries of a 2 x 2 matrix with sub-stochastic
// columns, then repeated 1e-3 refinement around the incumbent.
inline double grid_search_2x2(const MatrixXd& R, const MatrixXd& V) {
  double best = std::numeric_limits<double>::infinity();
  MatrixXd arg(2, 2);
  const double coarse = 0.02;
  const int nc = 50;
  std::vector<std::pair<double, double>> col;
  for (int i = 0; i <= nc; ++i)
    for (int j = 0; i + j <= nc; ++j) col.emplace_back(i * coarse, j * coarse);
  MatrixXd P(2, 2);
  for (const auto& a : col) {
    for (const auto& b : col) {
      P << a.first, b.first, a.second, b.second;
      const double f = projection_objective(P, R, V);
      if (f < best) {
        best = f;
        arg = P;
      }
    }
  }
  const double h = 1e-3;
  for (int round = 0; round < 20; ++round) {
    const MatrixXd centre = arg;
    for (int i0 = -25; i0 <= 25; ++i0)
      for (int i1 = -25; i1 <= 25; ++i1)
        for (int i2 = -25; i2 <= 25; ++i2)
          for (int i3 = -25; i3 <= 25; ++i3) {
            P << centre(0, 0) + i0 * h, centre(0, 1) + i2 * h, centre(1, 0) + i1 * h, centre(1, 1) + i3 * h;
            if ((P.array() < -1e-12).any() || (P.colwise().sum().array() > 1.0 + 1e-12).any()) continue;
            const double f = projection_objective(P, R, V);
            if (f < best) {
              best = f;
              arg = P;
            }
          }
    if (arg == centre) break;
  }
  return best;
}

inline lrcssp::LinearCsspModel small_model(std::uint64_t seed, Index d = 2, Index S = 3, Index A = 2,
                                           double gamma = 0.2) {
  lrcssp::GeneratorSpec spec;
  spec.d = d;
  spec.n_states = S;
  spec.n_actions = A;
  spec.gamma_goal = gamma;
  spec.seed = seed;
  return lrcssp::generate_instance(spec);
}

// Simulated data streams at one state-action pair with known embeddings.
// A run is covered when the truth lies in the confidence ellipsoid at every
// checkpoint tau = 1, 2, 4, ..., T.
struct Coverage {
  double loss = 0.0;
  double dyn = 0.0;
  int runs = 0;
};

inline Coverage coverage_frequency(Index d, int runs, double delta, std::uint64_t seed, Index T = 512,
                                   Index S = 3, Index A = 2) {
  const lrcssp::ProblemShape shape{d, S, A};
  Coverage out;
  out.runs = runs;
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> ex(1.0);
  auto dirichlet = [&](Index n) {
    VectorXd w(n);
    for (Index i = 0; i < n; ++i) w(i) = ex(rng);
    return VectorXd(w / w.sum());
  };
  int loss_ok = 0, dyn_ok = 0;
  for (int r = 0; r < runs; ++r) {
    VectorXd L(d);
    MatrixXd P(S, d);
    for (Index j = 0; j < d; ++j) {
      L(j) = uniform(rng);
      const double goal = 0.1 + 0.9 * uniform(rng);
      P.col(j) = (1.0 - goal) * dirichlet(S);
    }
    lrcssp::SaStatisticsd st(d, S, 1.0);
    bool lcov = true, pcov = true;
    for (Index t = 1; t <= T; ++t) {
      const VectorXd c = dirichlet(d);
      const double loss = uniform(rng) < L.dot(c) ? 1.0 : 0.0;
      const VectorXd pc = P * c;
      double u = uniform(rng);
      std::optional<Index> next;
      for (Index s = 0; s < S; ++s) {
        u -= pc(s);
        if (u < 0) {
          next = s;
          break;
        }
      }
      st.record_visit(c, next, loss);
      if ((t & (t - 1)) == 0 || t == T) {
        const auto est = lrcssp::estimate_pair(st, shape, delta);
        const MatrixXd dl = (L - est.l_hat).transpose();
        if (weighted_norm(dl, st.v_bar()) > est.beta_loss) lcov = false;
        if (weighted_norm(P - est.p_hat, st.v_bar()) > est.beta_dyn) pcov = false;
      }
    }
    loss_ok += lcov;
    dyn_ok += pcov;
  }
  out.loss = static_cast<double>(loss_ok) / runs;
  out.dyn = static_cast<double>(dyn_ok) / runs;
  return out;
}

}  // namespace oracle
