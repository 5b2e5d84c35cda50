#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lrcssp/ssp.hpp"

namespace lrcssp {

using Rng = std::mt19937_64;

// A point of the probability simplex in R^d.
struct Context {
  Eigen::VectorXd weights;

  Index dim() const { return weights.size(); }
  static Context vertex(Index d, Index j);
  static Context uniform(Index d);
  bool operator==(const Context& o) const { return weights == o.weights; }
};

bool is_simplex(const Eigen::VectorXd& c, double tol = 1e-9);
// Throws ProtocolError when c is not a simplex point of dimension d.
void check_context(const Context& c, Index d);

struct LossNoise {
  enum class Kind { bernoulli, truncated_uniform };
  Kind kind = Kind::bernoulli;
  double width = 0.0;  // truncated_uniform only
};

// Ground-truth linear CSSP: for context c the induced SSP has
// loss(s,a) = <c, L*(s,a)> and trans(s,a) = P*(s,a) c.
struct LinearCsspModel {
  Index d = 0;
  Index n_states = 0;
  Index n_actions = 0;
  Eigen::MatrixXd loss_embed;               // row s*A+a holds L*(s,a)^T
  std::vector<Eigen::MatrixXd> trans_embed;  // entry s*A+a holds P*(s,a), n_states x d
  Index s_init = 0;
  // Optional context-dependent start: when non-empty (size d), the start state
  // is s_init_by_component[argmax_j c_j].
  std::vector<Index> s_init_by_component;
  LossNoise loss_noise;

  Index pair_index(Index s, Index a) const { return s * n_actions + a; }
  Index n_pairs() const { return n_states * n_actions; }
  Index initial_state(const Context& c) const;

  bool operator==(const LinearCsspModel&) const;
};

SspInstanced induce_ssp(const LinearCsspModel& model, const Context& c);

struct StepOutcome {
  std::optional<Index> next;  // empty: the goal was reached
  double loss = 0.0;
};

StepOutcome sample_step(const LinearCsspModel& model, const Context& c, Index s, Index a, Rng& rng);

struct GeneratorSpec {
  enum class Kind { uniform_goal, trap };
  Index d = 2;
  Index n_states = 5;
  Index n_actions = 3;
  double gamma_goal = 0.1;
  double l_min_target = 0.1;
  // Number of (s, a) pairs whose loss embedding is forced to zero.
  Index zero_loss_pairs = 0;
  Kind kind = Kind::uniform_goal;
  LossNoise loss_noise;
  std::uint64_t seed = 1;
};

void check_generator_spec(const GeneratorSpec& spec);
LinearCsspModel generate_instance(const GeneratorSpec& spec);

struct ModelViolation {
  enum class Kind { shape, negative_mass, column_mass, loss_range, initial_state };
  Kind kind;
  Index s = -1;
  Index a = -1;
  Index j = -1;
  Index next = -1;
  double magnitude = 0.0;
  std::string describe() const;
};

std::vector<ModelViolation> validate_model(const LinearCsspModel& model, double tol = 1e-9);

// Minimal record of a finished episode, visible to adaptive context sources.
struct EpisodeSummary {
  Context context;
  Index steps = 0;
  double total_loss = 0.0;
  bool truncated = false;
};

using AdaptiveContextFn = std::function<Context(std::span<const EpisodeSummary>)>;

enum class ContextKind { uniform, cyclic_vertices, fixed, adaptive };

struct ContextSpec {
  ContextKind kind = ContextKind::uniform;
  Eigen::VectorXd fixed;     // ContextKind::fixed
  AdaptiveContextFn adaptive;  // ContextKind::adaptive
};

// Symmetric Dirichlet(1) draw.
Context sample_uniform_context(Index d, Rng& rng);

// Online context source; adaptive kinds see the history of prior episodes.
class ContextStream {
 public:
  ContextStream(ContextSpec spec, Index d, Rng rng);

  Context next(std::span<const EpisodeSummary> history);
  Index dim() const { return d_; }

 private:
  ContextSpec spec_;
  Index d_;
  Rng rng_;
  Index emitted_ = 0;
};

// Materialises K contexts of a non-adaptive kind.
std::vector<Context> context_sequence(const ContextSpec& spec, Index K, Index d, Rng& rng);

}  // namespace lrcssp
