#include "lrcssp/config.hpp"

#include <fstream>
#include <set>

namespace lrcssp {

namespace {

// Reads typed fields out of one JSON object and remembers which keys were
// consumed, so that leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where_ + "." + key + ": wrong type");
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

GeneratorSpec::Kind generator_kind(const std::string& s) {
  if (s == "uniform_goal") return GeneratorSpec::Kind::uniform_goal;
  if (s == "trap") return GeneratorSpec::Kind::trap;
  throw ConfigError("generator.kind: unknown value '" + s + "'");
}

std::string generator_kind_name(GeneratorSpec::Kind k) {
  return k == GeneratorSpec::Kind::trap ? "trap" : "uniform_goal";
}

}  // namespace

std::string to_string(ContextKind k) {
  switch (k) {
    case ContextKind::uniform: return "uniform";
    case ContextKind::cyclic_vertices: return "cyclic_vertices";
    case ContextKind::fixed: return "fixed";
    case ContextKind::adaptive: return "adaptive";
  }
  return "uniform";
}

ContextKind context_kind_from_string(const std::string& s) {
  if (s == "uniform") return ContextKind::uniform;
  if (s == "cyclic_vertices") return ContextKind::cyclic_vertices;
  if (s == "fixed") return ContextKind::fixed;
  // Adaptive sources are callbacks and cannot come from a file.
  throw ConfigError("contexts.kind: unknown value '" + s + "'");
}

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig cfg;
  ObjectReader top(j, "config");

  if (const Json* g = top.child("generator")) {
    ObjectReader r(*g, "generator");
    auto& spec = cfg.generator;
    r.read("d", spec.d);
    r.read("n_states", spec.n_states);
    r.read("n_actions", spec.n_actions);
    r.read("gamma_goal", spec.gamma_goal);
    r.read("l_min_target", spec.l_min_target);
    r.read("zero_loss_pairs", spec.zero_loss_pairs);
    std::string kind = generator_kind_name(spec.kind);
    r.read("kind", kind);
    spec.kind = generator_kind(kind);
    if (const Json* n = r.child("loss_noise")) {
      ObjectReader nr(*n, "generator.loss_noise");
      std::string nk = "bernoulli";
      nr.read("kind", nk);
      if (nk == "bernoulli") {
        spec.loss_noise.kind = LossNoise::Kind::bernoulli;
      } else if (nk == "truncated_uniform") {
        spec.loss_noise.kind = LossNoise::Kind::truncated_uniform;
      } else {
        throw ConfigError("generator.loss_noise.kind: unknown value '" + nk + "'");
      }
      nr.read("width", spec.loss_noise.width);
      nr.finish();
    }
    r.read("seed", spec.seed);
    r.finish();
  }

  top.read("model_file", cfg.model_file);

  if (const Json* c = top.child("contexts")) {
    ObjectReader r(*c, "contexts");
    std::string kind = to_string(cfg.contexts.kind);
    r.read("kind", kind);
    cfg.contexts.kind = context_kind_from_string(kind);
    r.read("K", cfg.contexts.K);
    r.read("fixed", cfg.contexts.fixed);
    r.finish();
  }

  if (const Json* l = top.child("learner")) {
    ObjectReader r(*l, "learner");
    auto& lc = cfg.learner;
    r.read("delta", lc.delta);
    r.read("lambda", lc.lambda);
    r.read("l_min", lc.l_min);
    if (const Json* e = r.child("epsilon_perturb")) {
      if (e->is_string() && e->get<std::string>() == "auto") {
        lc.epsilon_perturb.reset();
      } else if (e->is_number()) {
        lc.epsilon_perturb = e->get<double>();
      } else {
        throw ConfigError("learner.epsilon_perturb: expected \"auto\" or a number");
      }
    }
    r.read("b_star_init", lc.b_star_init);
    r.read("evi_tol", lc.evi_tol);
    r.read("evi_max_iter", lc.evi_max_iter);
    r.read("episode_step_cap", lc.episode_step_cap);
    r.finish();
  }

  if (const Json* b = top.child("baselines")) {
    ObjectReader r(*b, "baselines");
    r.read("context_blind", cfg.baselines.context_blind);
    r.finish();
  }

  top.read("seeds", cfg.seeds);
  top.read("output_dir", cfg.output_dir);
  top.read("oracle_informed", cfg.oracle_informed);
  top.read("record_trajectories", cfg.record_trajectories);
  top.finish();

  check_generator_spec(cfg.generator);
  check_learner_config(cfg.learner);
  if (cfg.contexts.K < 1) throw ConfigError("contexts.K must be >= 1");
  if (cfg.contexts.kind == ContextKind::fixed) {
    Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(cfg.contexts.fixed.data(),
                                                          static_cast<Index>(cfg.contexts.fixed.size()));
    if (!is_simplex(c)) throw ConfigError("contexts.fixed must be a probability vector");
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds must not be empty");
  return cfg;
}

Json config_to_json(const ExperimentConfig& cfg) {
  const auto& g = cfg.generator;
  const auto& l = cfg.learner;
  Json j;
  j["generator"] = {
      {"d", g.d},
      {"n_states", g.n_states},
      {"n_actions", g.n_actions},
      {"gamma_goal", g.gamma_goal},
      {"l_min_target", g.l_min_target},
      {"zero_loss_pairs", g.zero_loss_pairs},
      {"kind", generator_kind_name(g.kind)},
      {"loss_noise",
       {{"kind", g.loss_noise.kind == LossNoise::Kind::bernoulli ? "bernoulli" : "truncated_uniform"},
        {"width", g.loss_noise.width}}},
      {"seed", g.seed},
  };
  j["model_file"] = cfg.model_file;
  j["contexts"] = {{"kind", to_string(cfg.contexts.kind)}, {"K", cfg.contexts.K}, {"fixed", cfg.contexts.fixed}};
  Json eps = l.epsilon_perturb ? Json(*l.epsilon_perturb) : Json("auto");
  j["learner"] = {
      {"delta", l.delta},
      {"lambda", l.lambda},
      {"l_min", l.l_min},
      {"epsilon_perturb", eps},
      {"b_star_init", l.b_star_init},
      {"evi_tol", l.evi_tol},
      {"evi_max_iter", l.evi_max_iter},
      {"episode_step_cap", l.episode_step_cap},
  };
  j["baselines"] = {{"context_blind", cfg.baselines.context_blind}};
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["oracle_informed"] = cfg.oracle_informed;
  j["record_trajectories"] = cfg.record_trajectories;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  Json j;
  try {
    j = Json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace lrcssp
