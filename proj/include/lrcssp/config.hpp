#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lrcssp/io.hpp"
#include "lrcssp/learner.hpp"
#include "lrcssp/linear_model.hpp"

namespace lrcssp {

struct ContextConfig {
  ContextKind kind = ContextKind::uniform;
  Index K = 2000;
  std::vector<double> fixed;  // kind == fixed
};

struct BaselineConfig {
  bool context_blind = true;
};

// Whole-experiment configuration. All keys are optional; unknown keys are
// rejected. Canonical key order is the declaration order below (see
// docs/config.md).
struct ExperimentConfig {
  GeneratorSpec generator;
  std::string model_file;  // empty: generate from `generator`
  ContextConfig contexts;
  LearnerConfig learner;
  BaselineConfig baselines;
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "runs";
  bool oracle_informed = false;
  bool record_trajectories = false;
};

ExperimentConfig config_from_json(const Json& j);
Json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

std::string to_string(ContextKind k);
ContextKind context_kind_from_string(const std::string& s);

}  // namespace lrcssp
