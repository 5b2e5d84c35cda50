#include "lrcssp/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lrcssp/io.hpp"

namespace lrcssp {

void check_learner_config(const LearnerConfig& cfg) {
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("learner: delta must lie in (0, 1)");
  if (!(cfg.lambda >= 1.0)) throw ConfigError("learner: lambda must be >= 1");
  if (!(cfg.l_min >= 0.0 && cfg.l_min <= 1.0)) throw ConfigError("learner: l_min must lie in [0, 1]");
  if (cfg.epsilon_perturb && !(*cfg.epsilon_perturb > 0.0 && *cfg.epsilon_perturb <= 1.0))
    throw ConfigError("learner: epsilon_perturb must lie in (0, 1]");
  if (!(cfg.b_star_init >= 1.0)) throw ConfigError("learner: b_star_init must be >= 1");
  if (!(cfg.evi_tol > 0.0)) throw ConfigError("learner: evi_tol must be positive");
  if (cfg.evi_max_iter < 1) throw ConfigError("learner: evi_max_iter must be >= 1");
  if (cfg.episode_step_cap < 1) throw ConfigError("learner: episode_step_cap must be >= 1");
}

double auto_epsilon(const ProblemShape& shape, Index K) {
  const double d = static_cast<double>(shape.d);
  return static_cast<double>(shape.n_states) *
         std::cbrt(d * d * static_cast<double>(shape.n_actions) / static_cast<double>(K));
}

double optimistic_loss(const Context& c, const PairEstimate<double>& est, const SaStatisticsd& stats) {
  const double bonus = est.beta_loss * context_norm(stats, c.weights);
  return std::clamp(est.l_hat.dot(c.weights) - bonus, 0.0, 1.0);
}

Eigen::VectorXd optimistic_transition(const Eigen::VectorXd& p, double radius, const Eigen::VectorXd& v,
                                      std::span<const Index> order) {
  Eigen::VectorXd q = p;
  double budget = std::max(0.0, radius);
  for (Index s : order) {
    if (budget <= 0.0 || v(s) <= 0.0) break;
    const double take = std::min(q(s), budget);
    q(s) -= take;
    budget -= take;
  }
  return q;
}

EviResult evi_plan(const Estimates& est, std::span<const SaStatisticsd> stats, const Context& c,
                   double b_cap, const LearnerConfig& cfg, const EviIterateHook& hook) {
  if (est.empty() || est.size() != stats.size())
    throw StructuralError("evi_plan: estimates and statistics disagree");
  const Index n_states = est.front().p_hat.rows();
  const Index n_pairs = static_cast<Index>(est.size());
  if (n_pairs % n_states != 0) throw StructuralError("evi_plan: pair count is not |S| * |A|");
  const Index n_actions = n_pairs / n_states;

  std::vector<double> loss(static_cast<std::size_t>(n_pairs));
  std::vector<double> radius(static_cast<std::size_t>(n_pairs));
  std::vector<Eigen::VectorXd> centre(static_cast<std::size_t>(n_pairs));
  for (Index k = 0; k < n_pairs; ++k) {
    const auto& e = est[static_cast<std::size_t>(k)];
    const auto& st = stats[static_cast<std::size_t>(k)];
    loss[static_cast<std::size_t>(k)] = optimistic_loss(c, e, st);
    radius[static_cast<std::size_t>(k)] = e.beta_dyn * context_norm(st, c.weights);
    centre[static_cast<std::size_t>(k)] = (e.p_hat * c.weights).cwiseMax(0.0);
  }

  EviResult out;
  out.optimistic = SspInstanced::zeros(n_states, n_actions);
  out.policy = Policy::constant(n_states, 0);
  ValueFunction<double> v = ValueFunction<double>::Zero(n_states);
  ValueFunction<double> next(n_states);
  std::vector<Index> order(static_cast<std::size_t>(n_states));

  for (Index it = 1; it <= cfg.evi_max_iter; ++it) {
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return v(i) > v(j); });

    for (Index s = 0; s < n_states; ++s) {
      double best = 0.0;
      for (Index a = 0; a < n_actions; ++a) {
        const auto k = static_cast<std::size_t>(s * n_actions + a);
        Eigen::VectorXd q = optimistic_transition(centre[k], radius[k], v, order);
        const double value = loss[k] + q.dot(v);
        out.optimistic.loss(s, a) = loss[k];
        out.optimistic.next(s, a) = q.transpose();
        if (a == 0 || value < best) {
          best = value;
          out.policy.action[static_cast<std::size_t>(s)] = a;
        }
      }
      next(s) = std::clamp(best, 0.0, b_cap);
    }
    out.residual = (next - v).cwiseAbs().maxCoeff();
    out.iterations = it;
    if (hook) hook(next);
    if (out.residual <= cfg.evi_tol) {
      out.converged = true;
      break;
    }
    if (it < cfg.evi_max_iter) v = next;
  }
  out.values = std::move(v);
  return out;
}

std::string to_string(IntervalTrigger t) {
  switch (t) {
    case IntervalTrigger::start: return "start";
    case IntervalTrigger::goal: return "goal";
    case IntervalTrigger::unknown: return "unknown";
  }
  return "unknown";
}

LearnerState::LearnerState(const ProblemShape& shape_, const LearnerConfig& cfg, double l_min_eff,
                           double floor)
    : shape(shape_),
      b_star_cur(cfg.b_star_init),
      l_min_effective(l_min_eff),
      loss_floor(floor) {
  reset_statistics(cfg.lambda);
  unknown_by_pair.assign(static_cast<std::size_t>(shape.n_states * shape.n_actions), 0);
  policy = Policy::constant(shape.n_states, 0);
  optimistic_values = ValueFunction<double>::Zero(shape.n_states);
  context = Context::uniform(shape.d);
}

void LearnerState::reset_statistics(double lambda) {
  const auto n = static_cast<std::size_t>(shape.n_states * shape.n_actions);
  stats.assign(n, SaStatisticsd(shape.d, shape.n_states, lambda));
  estimates.assign(n, PairEstimate<double>{});
  stale.assign(n, true);
}

namespace {

void refresh_estimates(LearnerState& state, const LearnerConfig& cfg) {
  for (std::size_t k = 0; k < state.stats.size(); ++k) {
    if (!state.stale[k]) continue;
    state.estimates[k] = estimate_pair(state.stats[k], state.shape, cfg.delta);
    state.stale[k] = false;
  }
}

double known_fraction(const LearnerState& state, const LearnerConfig& cfg) {
  Index known = 0;
  for (const auto& st : state.stats) {
    if (is_known(st, state.context.weights, state.l_min_effective, state.b_star_cur, state.m, cfg.delta,
                 state.shape))
      ++known;
  }
  return static_cast<double>(known) / static_cast<double>(state.stats.size());
}

void plan(LearnerState& state, const LearnerConfig& cfg, IntervalRecord& rec) {
  refresh_estimates(state, cfg);
  EviResult evi = evi_plan(state.estimates, state.stats, state.context, 2.0 * state.b_star_cur, cfg);
  state.policy = std::move(evi.policy);
  state.optimistic_ssp = std::move(evi.optimistic);
  state.optimistic_values = std::move(evi.values);
  rec.evi_residual = evi.residual;
  rec.evi_converged = evi.converged;
  rec.v_tilde_init = state.optimistic_values(state.s_init);
}

}  // namespace

void start_interval(LearnerState& state, const Context& c, IntervalTrigger trigger, Index episode,
                    const LearnerConfig& cfg, EpisodeLog& log, const IntervalObserver& observer,
                    Index trigger_pair) {
  state.context = c;
  state.m += 1;
  state.h = 0;

  IntervalRecord rec;
  rec.episode = episode;
  rec.m = state.m;
  rec.trigger = trigger;
  rec.start_step = log.steps;
  rec.trigger_pair = trigger_pair;
  plan(state, cfg, rec);
  // Doubling trick: an optimistic value above the current bound means the
  // bound was too small; double it, forget everything and plan again.
  while (rec.v_tilde_init > state.b_star_cur) {
    state.b_star_cur *= 2.0;
    state.doublings += 1;
    state.reset_statistics(cfg.lambda);
    rec.reset = true;
    plan(state, cfg, rec);
  }
  rec.b_star_cur = state.b_star_cur;
  rec.known_fraction = known_fraction(state, cfg);

  log.intervals.push_back(rec);
  log.intervals_started += 1;
  if (observer) observer(state, log.intervals.back());
}

EpisodeLog run_episode(LearnerState& state, const Context& c, Index episode, Environment& env,
                       const LearnerConfig& cfg, const RunOptions& opt) {
  const LinearCsspModel& model = *env.model;
  EpisodeLog log;
  log.context = c;
  log.learner_context = opt.context_blind ? Context::uniform(model.d) : c;
  log.s_init = model.initial_state(c);

  state.s_init = log.s_init;
  start_interval(state, log.learner_context,
                 state.reached_goal ? IntervalTrigger::goal : IntervalTrigger::start, episode, cfg, log,
                 opt.observer);

  Index s = log.s_init;
  state.reached_goal = false;
  while (true) {
    if (log.steps >= cfg.episode_step_cap) {
      log.truncated = true;
      break;
    }
    const Index a = state.policy[s];
    const StepOutcome step = sample_step(model, c, s, a, env.rng);
    log.steps += 1;
    log.total_loss += step.loss;
    state.h += 1;
    IntervalRecord& cur = log.intervals.back();
    cur.steps += 1;
    cur.interval_loss += step.loss;

    const auto k = static_cast<std::size_t>(model.pair_index(s, a));
    state.stats[k].record_visit(log.learner_context.weights, step.next,
                                std::max(step.loss, state.loss_floor));
    state.stale[k] = true;
    if (opt.record_trajectory) log.trajectory.push_back({s, a, step.next.value_or(-1), step.loss});

    if (!step.next) {
      state.reached_goal = true;
      break;
    }
    if (!is_known(state.stats[k], log.learner_context.weights, state.l_min_effective, state.b_star_cur,
                  state.m, cfg.delta, state.shape)) {
      log.unknown_triggers += 1;
      state.unknown_by_pair[k] += 1;
      start_interval(state, log.learner_context, IntervalTrigger::unknown, episode, cfg, log, opt.observer,
                     static_cast<Index>(k));
    }
    s = *step.next;
  }
  return log;
}

namespace {

struct RunSetup {
  ProblemShape shape;
  double l_min_effective;
  double floor;
};

RunSetup prepare(const LearnerConfig& cfg, const LinearCsspModel& model, Index K) {
  check_learner_config(cfg);
  if (K < 1) throw ConfigError("run: need at least one episode");
  RunSetup setup{{model.d, model.n_states, model.n_actions}, cfg.l_min, 0.0};
  if (cfg.l_min == 0.0) {
    // Loss perturbation; an epsilon above 1 would leave the loss range.
    const double eps = std::min(1.0, cfg.epsilon_perturb.value_or(auto_epsilon(setup.shape, K)));
    setup.l_min_effective = eps;
    setup.floor = eps;
  }
  return setup;
}

void finish(RunLog& out, const LearnerState& state) {
  out.doublings = state.doublings;
  out.unknown_by_pair = state.unknown_by_pair;
  for (const auto& ep : out.episodes) {
    out.total_steps += ep.steps;
    out.total_intervals += ep.intervals_started;
    if (ep.truncated) out.truncations += 1;
  }
}

}  // namespace

RunLog run(const LearnerConfig& cfg, const LinearCsspModel& model, ContextStream& contexts, Index K,
           std::uint64_t seed, const RunOptions& opt) {
  const RunSetup setup = prepare(cfg, model, K);
  LearnerState state(setup.shape, cfg, setup.l_min_effective, setup.floor);
  Environment env{&model, Rng(seed)};

  RunLog out;
  out.config = cfg;
  out.model_fingerprint = model_fingerprint(model);
  out.epsilon = setup.floor;
  out.l_min_effective = setup.l_min_effective;
  out.episodes.reserve(static_cast<std::size_t>(K));
  std::vector<EpisodeSummary> history;
  for (Index k = 0; k < K; ++k) {
    const Context c = contexts.next(history);
    out.episodes.push_back(run_episode(state, c, k, env, cfg, opt));
    const auto& ep = out.episodes.back();
    history.push_back({ep.context, ep.steps, ep.total_loss, ep.truncated});
  }
  finish(out, state);
  return out;
}

RunLog run(const LearnerConfig& cfg, const LinearCsspModel& model, std::span<const Context> contexts,
           std::uint64_t seed, const RunOptions& opt) {
  const Index K = static_cast<Index>(contexts.size());
  const RunSetup setup = prepare(cfg, model, K);
  LearnerState state(setup.shape, cfg, setup.l_min_effective, setup.floor);
  Environment env{&model, Rng(seed)};

  RunLog out;
  out.config = cfg;
  out.model_fingerprint = model_fingerprint(model);
  out.epsilon = setup.floor;
  out.l_min_effective = setup.l_min_effective;
  out.episodes.reserve(contexts.size());
  for (Index k = 0; k < K; ++k) {
    check_context(contexts[static_cast<std::size_t>(k)], model.d);
    out.episodes.push_back(run_episode(state, contexts[static_cast<std::size_t>(k)], k, env, cfg, opt));
  }
  finish(out, state);
  return out;
}

}  // namespace lrcssp
