#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lrcssp/learner.hpp"
#include "lrcssp/linear_model.hpp"

namespace lrcssp {

struct OracleEpisode {
  double v_star_init = 0.0;  // V*_c(s_init)
  double b_star_ctx = 0.0;   // max_s V*_c(s)
  double t_star_ctx = 0.0;   // max_s T^{pi*_c}(s)
  Policy policy;
};

struct OracleValues {
  std::vector<OracleEpisode> episodes;
  double b_star_emp = 0.0;
  double t_star_emp = 0.0;
};

// Exact per-context optimal values. Throws NonConvergenceError for models
// whose induced SSPs cannot be solved.
OracleValues oracle_values(const LinearCsspModel& model, std::span<const Context> contexts,
                           double tol = 1e-10);

inline constexpr double kTruncatedRegret = std::numeric_limits<double>::infinity();

struct RegretRow {
  Index episode = 0;
  Index steps = 0;
  double realized_loss = 0.0;
  double optimal_value = 0.0;
  double regret = 0.0;  // kTruncatedRegret for truncated episodes
  double cum_regret = 0.0;
  Index intervals = 0;
  Index unknown_triggers = 0;
  bool truncated = false;
  double b_star_cur = 1.0;
};

// Cumulative regret sums terminated episodes only; truncated episodes carry
// the infinite sentinel and are counted separately.
struct RegretCurve {
  std::vector<RegretRow> rows;
  Index truncations = 0;

  // kTruncatedRegret when every episode was truncated.
  double final_cum_regret() const;
};

RegretCurve compute_regret(const RunLog& log, const OracleValues& oracle);

// Mean regret over the last tenth of terminated episodes divided by the mean
// over the first tenth. `skip_fraction` drops a warm-up prefix first.
struct RegretSlope {
  double early_mean = 0.0;
  double late_mean = 0.0;
  double ratio = 0.0;
};
RegretSlope regret_slope(std::span<const RegretRow> rows, double window = 0.1);

struct HpeReport {
  Index intervals = 0;
  Index violations = 0;
  double violation_fraction = 0.0;
  Index episodes = 0;
  Index max_unknown_per_pair = 0;
  std::vector<Index> unknown_by_pair;
  bool interval_count_bound = true;  // M <= K + |S||A| max_pair unknown triggers
};

inline double hpe_interval_bound(double b_star, Index m, double delta) {
  return 48.0 * b_star * std::log(4.0 * static_cast<double>(m) / delta);
}

// Interval-loss bound 48 B log(4 m / delta) against the realised interval
// losses, plus the interval-count identity.
HpeReport hpe_diagnostics(const RunLog& log, const OracleValues& oracle, double delta,
                          const ProblemShape& shape);

// Replays the recorded trajectories through fresh statistics and checks that
// every interval start coincides with a goal arrival or a failed known test.
// Needs a run with trajectory recording on. Returns an empty string on
// success, otherwise a description of the first mismatch.
std::string verify_interval_triggers(const RunLog& log, const ProblemShape& shape);

// The identical learner fed the uniform context for estimation and planning.
RunLog baseline_context_blind(const LearnerConfig& cfg, const LinearCsspModel& model,
                              std::span<const Context> contexts, std::uint64_t seed,
                              const RunOptions& opt = {});

// Per-run seeds: separate generator streams for contexts and for the environment.
Rng derive_rng(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace lrcssp
