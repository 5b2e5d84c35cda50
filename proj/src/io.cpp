#include "lrcssp/io.hpp"

#include <cstdio>
#include <fstream>

namespace lrcssp {

namespace {

constexpr int kModelVersion = 1;
constexpr int kEstimatesVersion = 1;

template <typename T>
T require(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

std::string noise_name(LossNoise::Kind k) {
  return k == LossNoise::Kind::bernoulli ? "bernoulli" : "truncated_uniform";
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json arr = Json::array();
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  return arr;
}

Eigen::MatrixXd matrix_from_json(const Json& j, Index rows, Index cols) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows * cols)
    throw ConfigError("matrix field has the wrong number of entries");
  Eigen::MatrixXd m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = j[static_cast<std::size_t>(r * cols + c)].get<double>();
  return m;
}

Json model_to_json(const LinearCsspModel& model) {
  Json j;
  j["d"] = model.d;
  j["n_states"] = model.n_states;
  j["n_actions"] = model.n_actions;
  j["s_init"] = model.s_init;
  j["s_init_by_component"] = model.s_init_by_component;
  j["loss_noise"] = {{"kind", noise_name(model.loss_noise.kind)}, {"width", model.loss_noise.width}};
  j["loss_embed"] = matrix_to_json(model.loss_embed);
  Json trans = Json::array();
  for (const auto& p : model.trans_embed) trans.push_back(matrix_to_json(p));
  j["trans_embed"] = std::move(trans);
  return j;
}

LinearCsspModel model_from_json(const Json& j) {
  LinearCsspModel model;
  model.d = require<Index>(j, "d");
  model.n_states = require<Index>(j, "n_states");
  model.n_actions = require<Index>(j, "n_actions");
  if (model.d < 1 || model.n_states < 1 || model.n_actions < 1)
    throw ConfigError("model dimensions must be positive");
  model.s_init = require<Index>(j, "s_init");
  model.s_init_by_component = require<std::vector<Index>>(j, "s_init_by_component");
  const Json noise = require<Json>(j, "loss_noise");
  const auto kind = require<std::string>(noise, "kind");
  if (kind == "bernoulli") {
    model.loss_noise.kind = LossNoise::Kind::bernoulli;
  } else if (kind == "truncated_uniform") {
    model.loss_noise.kind = LossNoise::Kind::truncated_uniform;
  } else {
    throw ConfigError("unknown loss noise kind '" + kind + "'");
  }
  model.loss_noise.width = require<double>(noise, "width");
  model.loss_embed = matrix_from_json(require<Json>(j, "loss_embed"), model.n_pairs(), model.d);
  const Json trans = require<Json>(j, "trans_embed");
  if (!trans.is_array() || static_cast<Index>(trans.size()) != model.n_pairs())
    throw ConfigError("trans_embed must hold one matrix per state-action pair");
  for (const auto& p : trans) model.trans_embed.push_back(matrix_from_json(p, model.n_states, model.d));
  return model;
}

std::string model_fingerprint(const LinearCsspModel& model) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(model_to_json(model).dump())));
  return buf;
}

void save_model(const std::filesystem::path& path, const LinearCsspModel& model) {
  Json j;
  j["format"] = "lrcssp-model";
  j["version"] = kModelVersion;
  j["fingerprint"] = model_fingerprint(model);
  j["model"] = model_to_json(model);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

LinearCsspModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open model file " + path.string());
  Json j;
  try {
    j = Json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("model file " + path.string() + ": " + e.what());
  }
  if (require<std::string>(j, "format") != "lrcssp-model" || require<int>(j, "version") != kModelVersion)
    throw ConfigError("unsupported model file format");
  LinearCsspModel model = model_from_json(require<Json>(j, "model"));
  if (j.contains("fingerprint") && j["fingerprint"].get<std::string>() != model_fingerprint(model))
    throw ConfigError("model fingerprint mismatch in " + path.string());
  return model;
}

Json estimates_to_json(const Estimates& est, const ProblemShape& shape) {
  Json j;
  j["format"] = "lrcssp-estimates";
  j["version"] = kEstimatesVersion;
  j["d"] = shape.d;
  j["n_states"] = shape.n_states;
  j["n_actions"] = shape.n_actions;
  Json pairs = Json::array();
  for (Index s = 0; s < shape.n_states; ++s) {
    for (Index a = 0; a < shape.n_actions; ++a) {
      const auto& e = est.at(static_cast<std::size_t>(s * shape.n_actions + a));
      Json p;
      p["s"] = s;
      p["a"] = a;
      p["tau"] = e.tau;
      p["beta_loss"] = e.beta_loss;
      p["beta_dyn"] = e.beta_dyn;
      p["l_hat"] = matrix_to_json(e.l_hat.transpose());
      p["p_hat_raw"] = matrix_to_json(e.p_hat_raw);
      p["p_hat"] = matrix_to_json(e.p_hat);
      pairs.push_back(std::move(p));
    }
  }
  j["pairs"] = std::move(pairs);
  return j;
}

Estimates estimates_from_json(const Json& j, ProblemShape* shape_out) {
  if (require<std::string>(j, "format") != "lrcssp-estimates" ||
      require<int>(j, "version") != kEstimatesVersion)
    throw ConfigError("unsupported estimates snapshot");
  ProblemShape shape{require<Index>(j, "d"), require<Index>(j, "n_states"), require<Index>(j, "n_actions")};
  const Json pairs = require<Json>(j, "pairs");
  if (!pairs.is_array() || static_cast<Index>(pairs.size()) != shape.n_states * shape.n_actions)
    throw ConfigError("estimates snapshot has the wrong number of pairs");
  Estimates est;
  for (const auto& p : pairs) {
    PairEstimate<double> e;
    e.tau = require<Index>(p, "tau");
    e.beta_loss = require<double>(p, "beta_loss");
    e.beta_dyn = require<double>(p, "beta_dyn");
    e.l_hat = matrix_from_json(require<Json>(p, "l_hat"), 1, shape.d).transpose();
    e.p_hat_raw = matrix_from_json(require<Json>(p, "p_hat_raw"), shape.n_states, shape.d);
    e.p_hat = matrix_from_json(require<Json>(p, "p_hat"), shape.n_states, shape.d);
    est.push_back(std::move(e));
  }
  if (shape_out) *shape_out = shape;
  return est;
}

}  // namespace lrcssp
