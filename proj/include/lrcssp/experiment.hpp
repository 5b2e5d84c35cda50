#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lrcssp/config.hpp"
#include "lrcssp/harness.hpp"
#include "lrcssp/io.hpp"

namespace lrcssp {

inline const std::vector<std::string> kVariants{"lr_cssp", "context_blind"};

struct RunControl {
  unsigned jobs = 1;
  std::uint64_t seed_offset = 0;
};

// Loads cfg.model_file when set, otherwise generates from cfg.generator.
LinearCsspModel resolve_model(const ExperimentConfig& cfg);

std::vector<Context> experiment_contexts(const ExperimentConfig& cfg, Index d, std::uint64_t seed);

// The learner configuration used for one seed; oracle-informed runs take
// B* and l_min from the oracle.
LearnerConfig effective_learner(const ExperimentConfig& cfg, const LinearCsspModel& model,
                                std::span<const Context> contexts, const OracleValues& oracle);

// Per-run artefacts.
void write_regret_csv(const std::filesystem::path& path, const RegretCurve& curve);
void write_oracle_csv(const std::filesystem::path& path, const OracleValues& oracle);
void write_events_jsonl(const std::filesystem::path& path, const RunLog& log);
void write_trajectory_csv(const std::filesystem::path& path, const RunLog& log);
std::vector<RegretRow> read_regret_csv(const std::filesystem::path& path);

// Summaries are always computed from the files on disk, so that `report`
// reproduces exactly what `run` wrote.
Json summarize_run_dir(const std::filesystem::path& dir, const std::string& variant, std::uint64_t seed,
                       double delta, const ProblemShape& shape);
Json summarize_experiment(const std::filesystem::path& out);

// Non-finite doubles are written as strings ("inf", "-inf", "nan").
Json json_number(double x);

struct ExperimentResult {
  std::filesystem::path out;
  Json summary;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                const RunControl& ctl = {});

struct ReportResult {
  Json summary;
  std::vector<std::string> mismatches;  // files whose stored content differs from the recomputation
  std::vector<std::filesystem::path> plot_files;
};

// Throws ConfigError when `out` does not hold a finished experiment.
ReportResult report_experiment(const std::filesystem::path& out);
std::string format_summary_table(const Json& summary);

}  // namespace lrcssp
