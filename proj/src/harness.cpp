#include "lrcssp/harness.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace lrcssp {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

Rng derive_rng(std::uint64_t seed, std::uint64_t stream) { return Rng(derive_seed(seed, stream)); }

OracleValues oracle_values(const LinearCsspModel& model, std::span<const Context> contexts, double tol) {
  OracleValues out;
  out.episodes.reserve(contexts.size());
  for (const Context& c : contexts) {
    const SspInstanced ssp = induce_ssp(model, c);
    auto solved = value_iteration(ssp, tol);
    OracleEpisode ep;
    ep.v_star_init = solved.values(model.initial_state(c));
    ep.b_star_ctx = solved.values.maxCoeff();
    ep.t_star_ctx = expected_hitting_time(ssp, solved.policy, EvaluationOptions{tol, 1000000, 1e9}).maxCoeff();
    ep.policy = std::move(solved.policy);
    out.b_star_emp = std::max(out.b_star_emp, ep.b_star_ctx);
    out.t_star_emp = std::max(out.t_star_emp, ep.t_star_ctx);
    out.episodes.push_back(std::move(ep));
  }
  return out;
}

double RegretCurve::final_cum_regret() const {
  if (rows.empty() || truncations == static_cast<Index>(rows.size())) return kTruncatedRegret;
  return rows.back().cum_regret;
}

RegretCurve compute_regret(const RunLog& log, const OracleValues& oracle) {
  if (log.episodes.size() != oracle.episodes.size())
    throw StructuralError("compute_regret: run log and oracle lengths differ");
  RegretCurve curve;
  curve.rows.reserve(log.episodes.size());
  double cum = 0.0;
  for (std::size_t k = 0; k < log.episodes.size(); ++k) {
    const EpisodeLog& ep = log.episodes[k];
    RegretRow row;
    row.episode = static_cast<Index>(k);
    row.steps = ep.steps;
    row.realized_loss = ep.total_loss;
    row.optimal_value = oracle.episodes[k].v_star_init;
    row.truncated = ep.truncated;
    row.intervals = ep.intervals_started;
    row.unknown_triggers = ep.unknown_triggers;
    row.b_star_cur = ep.intervals.empty() ? log.config.b_star_init : ep.intervals.back().b_star_cur;
    if (ep.truncated) {
      row.regret = kTruncatedRegret;
      curve.truncations += 1;
    } else {
      row.regret = row.realized_loss - row.optimal_value;
      cum += row.regret;
    }
    row.cum_regret = cum;
    curve.rows.push_back(row);
  }
  return curve;
}

RegretSlope regret_slope(std::span<const RegretRow> rows, double window) {
  std::vector<double> regrets;
  for (const auto& r : rows) {
    if (!r.truncated) regrets.push_back(r.regret);
  }
  RegretSlope out;
  if (regrets.empty()) return out;
  const std::size_t n = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(window * regrets.size())));
  double early = 0.0;
  double late = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    early += regrets[i];
    late += regrets[regrets.size() - n + i];
  }
  out.early_mean = early / static_cast<double>(n);
  out.late_mean = late / static_cast<double>(n);
  out.ratio = out.late_mean / out.early_mean;
  return out;
}

HpeReport hpe_diagnostics(const RunLog& log, const OracleValues& oracle, double delta,
                          const ProblemShape& shape) {
  HpeReport rep;
  rep.episodes = static_cast<Index>(log.episodes.size());
  for (const auto& ep : log.episodes) {
    for (const auto& iv : ep.intervals) {
      rep.intervals += 1;
      if (iv.interval_loss > hpe_interval_bound(oracle.b_star_emp, iv.m, delta)) rep.violations += 1;
    }
  }
  rep.violation_fraction =
      rep.intervals ? static_cast<double>(rep.violations) / static_cast<double>(rep.intervals) : 0.0;
  rep.unknown_by_pair = log.unknown_by_pair;
  for (Index n : rep.unknown_by_pair) rep.max_unknown_per_pair = std::max(rep.max_unknown_per_pair, n);
  rep.interval_count_bound =
      rep.intervals <= rep.episodes + shape.n_states * shape.n_actions * rep.max_unknown_per_pair;
  return rep;
}

std::string verify_interval_triggers(const RunLog& log, const ProblemShape& shape) {
  const LearnerConfig& cfg = log.config;
  std::vector<SaStatisticsd> stats(static_cast<std::size_t>(shape.n_states * shape.n_actions),
                                   SaStatisticsd(shape.d, shape.n_states, cfg.lambda));
  const SaStatisticsd fresh(shape.d, shape.n_states, cfg.lambda);
  auto fail = [](Index k, Index t, const std::string& why) {
    std::ostringstream os;
    os << "episode " << k << ", step " << t << ": " << why;
    return os.str();
  };

  for (std::size_t k = 0; k < log.episodes.size(); ++k) {
    const EpisodeLog& ep = log.episodes[k];
    const auto K = static_cast<Index>(k);
    if (static_cast<Index>(ep.trajectory.size()) != ep.steps) return fail(K, 0, "trajectory not recorded");
    if (ep.intervals.empty() || ep.intervals.front().start_step != 0)
      return fail(K, 0, "episode does not open with an interval");
    const IntervalTrigger first = ep.intervals.front().trigger;
    const bool prev_goal = k > 0 && !log.episodes[k - 1].truncated;
    if (first != (prev_goal ? IntervalTrigger::goal : IntervalTrigger::start))
      return fail(K, 0, "opening trigger does not match the previous episode's end");

    std::size_t next_iv = 0;
    for (Index t = 0; t < ep.steps; ++t) {
      if (next_iv < ep.intervals.size() && ep.intervals[next_iv].start_step == t) {
        if (ep.intervals[next_iv].reset) std::fill(stats.begin(), stats.end(), fresh);
        ++next_iv;
      }
      const IntervalRecord& cur = ep.intervals[next_iv - 1];
      const Transition& tr = ep.trajectory[static_cast<std::size_t>(t)];
      auto& st = stats[static_cast<std::size_t>(tr.s * shape.n_actions + tr.a)];
      std::optional<Index> next;
      if (tr.next >= 0) next = tr.next;
      st.record_visit(ep.learner_context.weights, next, std::max(tr.loss, log.epsilon));
      if (tr.next < 0) {
        if (t + 1 != ep.steps) return fail(K, t, "goal reached before the episode ended");
        break;
      }
      const bool known = is_known(st, ep.learner_context.weights, log.l_min_effective, cur.b_star_cur, cur.m,
                                  cfg.delta, shape);
      const bool started = next_iv < ep.intervals.size() && ep.intervals[next_iv].start_step == t + 1;
      if (known == started)
        return fail(K, t, known ? "interval started on a known pair" : "unknown pair did not start an interval");
      if (started && ep.intervals[next_iv].trigger != IntervalTrigger::unknown)
        return fail(K, t, "mid-episode interval not tagged as unknown-triggered");
    }
    if (next_iv != ep.intervals.size()) return fail(K, ep.steps, "unmatched interval records");
  }
  return {};
}

RunLog baseline_context_blind(const LearnerConfig& cfg, const LinearCsspModel& model,
                              std::span<const Context> contexts, std::uint64_t seed, const RunOptions& opt) {
  RunOptions blind = opt;
  blind.context_blind = true;
  return run(cfg, model, contexts, seed, blind);
}

}  // namespace lrcssp
