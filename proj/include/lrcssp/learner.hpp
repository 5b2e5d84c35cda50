#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lrcssp/estimation.hpp"
#include "lrcssp/linear_model.hpp"
#include "lrcssp/ssp.hpp"

namespace lrcssp {

struct LearnerConfig {
  double delta = 0.1;
  double lambda = 1.0;
  // 0 switches on the loss perturbation max(loss, epsilon).
  double l_min = 0.1;
  // Empty means |S| (d^2 |A| / K)^(1/3).
  std::optional<double> epsilon_perturb;
  double b_star_init = 1.0;
  double evi_tol = 1e-6;
  Index evi_max_iter = 100000;
  Index episode_step_cap = 1000000;
};

void check_learner_config(const LearnerConfig& cfg);

// |S| (d^2 |A| / K)^(1/3)
double auto_epsilon(const ProblemShape& shape, Index K);

using Estimates = std::vector<PairEstimate<double>>;

// min <c, L> over the loss ellipsoid, clipped to [0, 1]:
//   <c, L_hat> - beta_loss ||c||_{V^{-1}}
double optimistic_loss(const Context& c, const PairEstimate<double>& est, const SaStatisticsd& stats);

// Minimiser of q . v over sub-distributions q with ||q - p||_1 <= radius. The
// goal has value zero, so mass is removed from the highest-valued states
// first. `order` lists state indices by decreasing v.
Eigen::VectorXd optimistic_transition(const Eigen::VectorXd& p, double radius,
                                      const Eigen::VectorXd& v, std::span<const Index> order);

struct EviResult {
  Policy policy;
  SspInstanced optimistic;  // per-pair optimistic loss and transition at the final values
  ValueFunction<double> values;
  double residual = 0.0;
  Index iterations = 0;
  bool converged = false;
};

using EviIterateHook = std::function<void(const ValueFunction<double>&)>;

// Extended value iteration over the per-context confidence sets, with values
// truncated to [0, b_cap].
EviResult evi_plan(const Estimates& est, std::span<const SaStatisticsd> stats, const Context& c,
                   double b_cap, const LearnerConfig& cfg, const EviIterateHook& hook = {});

enum class IntervalTrigger { start, goal, unknown };
std::string to_string(IntervalTrigger t);

struct IntervalRecord {
  Index episode = 0;
  Index m = 0;
  IntervalTrigger trigger = IntervalTrigger::start;
  Index start_step = 0;  // step index within the episode at which the interval begins
  Index steps = 0;
  double interval_loss = 0.0;
  double evi_residual = 0.0;
  bool evi_converged = true;
  double v_tilde_init = 0.0;
  double b_star_cur = 1.0;
  double known_fraction = 0.0;
  bool reset = false;  // the doubling trick fired at this interval start
  Index trigger_pair = -1;  // s*A+a of the failed known test, unknown triggers only
};

struct Transition {
  Index s = 0;
  Index a = 0;
  Index next = -1;  // -1 is the goal
  double loss = 0.0;
};

struct EpisodeLog {
  Context context;          // environment context
  Context learner_context;  // what estimation and planning saw
  Index s_init = 0;
  Index steps = 0;
  double total_loss = 0.0;  // realised, unperturbed
  Index intervals_started = 0;
  Index unknown_triggers = 0;
  bool truncated = false;
  std::vector<IntervalRecord> intervals;
  std::vector<Transition> trajectory;  // filled when trajectory recording is on
};

struct LearnerState {
  ProblemShape shape;
  std::vector<SaStatisticsd> stats;
  Estimates estimates;
  std::vector<bool> stale;
  Policy policy;
  ValueFunction<double> optimistic_values;
  SspInstanced optimistic_ssp;
  double b_star_cur = 1.0;
  Index m = 0;
  Index h = 0;
  Index doublings = 0;
  Index s_init = 0;
  Context context;
  double l_min_effective = 0.1;
  double loss_floor = 0.0;
  std::vector<Index> unknown_by_pair;
  bool reached_goal = false;  // the previous episode ended at the goal

  LearnerState(const ProblemShape& shape, const LearnerConfig& cfg, double l_min_effective,
               double loss_floor);
  void reset_statistics(double lambda);
};

struct Environment {
  const LinearCsspModel* model = nullptr;
  Rng rng;
};

// Callback fired after every interval start; receives the learner state with
// fresh estimates and plan. Must not mutate anything the learner reads.
using IntervalObserver = std::function<void(const LearnerState&, const IntervalRecord&)>;

struct RunOptions {
  bool context_blind = false;  // plan with the uniform context instead of the true one
  bool record_trajectory = false;
  IntervalObserver observer;
};

void start_interval(LearnerState& state, const Context& c, IntervalTrigger trigger, Index episode,
                    const LearnerConfig& cfg, EpisodeLog& log, const IntervalObserver& observer = {},
                    Index trigger_pair = -1);

EpisodeLog run_episode(LearnerState& state, const Context& c, Index episode, Environment& env,
                       const LearnerConfig& cfg, const RunOptions& opt = {});

struct RunLog {
  std::vector<EpisodeLog> episodes;
  LearnerConfig config;
  std::string model_fingerprint;
  Index total_steps = 0;
  Index total_intervals = 0;
  Index truncations = 0;
  Index doublings = 0;
  double epsilon = 0.0;  // loss floor actually applied (0 when unperturbed)
  double l_min_effective = 0.0;
  std::vector<Index> unknown_by_pair;
};

RunLog run(const LearnerConfig& cfg, const LinearCsspModel& model, std::span<const Context> contexts,
           std::uint64_t seed, const RunOptions& opt = {});
RunLog run(const LearnerConfig& cfg, const LinearCsspModel& model, ContextStream& contexts, Index K,
           std::uint64_t seed, const RunOptions& opt = {});

}  // namespace lrcssp
