#include "lrcssp/linear_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace lrcssp {

Context Context::vertex(Index d, Index j) {
  return Context{Eigen::VectorXd::Unit(d, j)};
}

Context Context::uniform(Index d) {
  return Context{Eigen::VectorXd::Constant(d, 1.0 / static_cast<double>(d))};
}

bool is_simplex(const Eigen::VectorXd& c, double tol) {
  if (c.size() == 0 || !c.allFinite()) return false;
  if ((c.array() < 0.0).any()) return false;
  return std::abs(c.sum() - 1.0) <= tol;
}

void check_context(const Context& c, Index d) {
  if (c.dim() != d) throw ProtocolError("context has dimension " + std::to_string(c.dim()) +
                                        ", expected " + std::to_string(d));
  if (!is_simplex(c.weights)) throw ProtocolError("context is not a point of the probability simplex");
}

Index LinearCsspModel::initial_state(const Context& c) const {
  if (s_init_by_component.empty()) return s_init;
  Index j = 0;
  c.weights.maxCoeff(&j);
  return s_init_by_component[static_cast<std::size_t>(j)];
}

bool LinearCsspModel::operator==(const LinearCsspModel& o) const {
  return d == o.d && n_states == o.n_states && n_actions == o.n_actions &&
         loss_embed == o.loss_embed && trans_embed == o.trans_embed && s_init == o.s_init &&
         s_init_by_component == o.s_init_by_component && loss_noise.kind == o.loss_noise.kind &&
         loss_noise.width == o.loss_noise.width;
}

namespace {

void check_shapes(const LinearCsspModel& model) {
  if (model.d < 1 || model.n_states < 1 || model.n_actions < 1)
    throw StructuralError("model dimensions must be positive");
  if (model.loss_embed.rows() != model.n_pairs() || model.loss_embed.cols() != model.d)
    throw StructuralError("loss embedding has the wrong shape");
  if (static_cast<Index>(model.trans_embed.size()) != model.n_pairs())
    throw StructuralError("transition embedding count does not match n_states * n_actions");
  for (const auto& p : model.trans_embed) {
    if (p.rows() != model.n_states || p.cols() != model.d)
      throw StructuralError("transition embedding has the wrong shape");
  }
}

}  // namespace

SspInstanced induce_ssp(const LinearCsspModel& model, const Context& c) {
  check_shapes(model);
  if (c.dim() != model.d) throw StructuralError("context dimension does not match the model");
  SspInstanced out = SspInstanced::zeros(model.n_states, model.n_actions);
  for (Index s = 0; s < model.n_states; ++s) {
    for (Index a = 0; a < model.n_actions; ++a) {
      const Index k = model.pair_index(s, a);
      out.loss(s, a) = model.loss_embed.row(k).dot(c.weights);
      out.next(s, a) = (model.trans_embed[static_cast<std::size_t>(k)] * c.weights).transpose();
    }
  }
  // Convex combinations of [0,1] values can round a hair outside the range.
  out.loss = out.loss.cwiseMax(0.0).cwiseMin(1.0);
  out.trans = out.trans.cwiseMax(0.0);
  return out;
}

StepOutcome sample_step(const LinearCsspModel& model, const Context& c, Index s, Index a, Rng& rng) {
  const Index k = model.pair_index(s, a);
  const auto& embed = model.trans_embed[static_cast<std::size_t>(k)];
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  StepOutcome out;
  const double u = unit(rng);
  double cum = 0.0;
  for (Index next = 0; next < model.n_states; ++next) {
    cum += std::max(0.0, embed.row(next).dot(c.weights));
    if (u < cum) {
      out.next = next;
      break;
    }
  }

  const double mean = std::clamp(model.loss_embed.row(k).dot(c.weights), 0.0, 1.0);
  const double v = unit(rng);
  switch (model.loss_noise.kind) {
    case LossNoise::Kind::bernoulli:
      out.loss = v < mean ? 1.0 : 0.0;
      break;
    case LossNoise::Kind::truncated_uniform: {
      // Symmetric window shrunk to stay inside [0, 1], so the mean is exact.
      const double half = std::min({0.5 * model.loss_noise.width, mean, 1.0 - mean});
      out.loss = std::clamp(mean + half * (2.0 * v - 1.0), 0.0, 1.0);
      break;
    }
  }
  return out;
}

void check_generator_spec(const GeneratorSpec& spec) {
  if (spec.d < 1 || spec.n_states < 1 || spec.n_actions < 1)
    throw ConfigError("generator: d, n_states and n_actions must be >= 1");
  if (!(spec.gamma_goal > 0.0) || spec.gamma_goal > 1.0)
    throw ConfigError("generator: gamma_goal must lie in (0, 1]");
  if (!(spec.l_min_target >= 0.0) || spec.l_min_target >= 1.0)
    throw ConfigError("generator: l_min_target must lie in [0, 1)");
  if (spec.zero_loss_pairs < 0 || spec.zero_loss_pairs > spec.n_states * spec.n_actions)
    throw ConfigError("generator: zero_loss_pairs out of range");
  if (spec.kind == GeneratorSpec::Kind::trap && spec.n_actions < 2)
    throw ConfigError("generator: the trap variant needs at least two actions");
  if (spec.loss_noise.width < 0.0 || spec.loss_noise.width > 1.0)
    throw ConfigError("generator: noise width must lie in [0, 1]");
}

namespace {

// Dirichlet(1) weights of the given length scaled to `mass`.
Eigen::VectorXd random_split(Index n, double mass, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd w(n);
  for (Index i = 0; i < n; ++i) w(i) = expo(rng);
  return w * (mass / w.sum());
}

}  // namespace

LinearCsspModel generate_instance(const GeneratorSpec& spec) {
  check_generator_spec(spec);
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  LinearCsspModel model;
  model.d = spec.d;
  model.n_states = spec.n_states;
  model.n_actions = spec.n_actions;
  model.loss_noise = spec.loss_noise;
  model.s_init = 0;
  model.loss_embed.resize(model.n_pairs(), spec.d);
  model.trans_embed.assign(static_cast<std::size_t>(model.n_pairs()),
                           Eigen::MatrixXd::Zero(spec.n_states, spec.d));

  for (Index s = 0; s < spec.n_states; ++s) {
    for (Index a = 0; a < spec.n_actions; ++a) {
      const Index k = model.pair_index(s, a);
      // In the trap variant only action 0 is guaranteed to leak towards the goal.
      const bool escapes = spec.kind == GeneratorSpec::Kind::uniform_goal || a == 0;
      for (Index j = 0; j < spec.d; ++j) {
        const double u = unit(rng);
        const double goal = escapes ? spec.gamma_goal + (1.0 - spec.gamma_goal) * u * u : 0.0;
        model.trans_embed[static_cast<std::size_t>(k)].col(j) =
            random_split(spec.n_states, 1.0 - goal, rng);
        model.loss_embed(k, j) = spec.l_min_target + (1.0 - spec.l_min_target) * unit(rng);
      }
    }
  }

  if (spec.zero_loss_pairs > 0) {
    std::vector<Index> pairs(static_cast<std::size_t>(model.n_pairs()));
    std::iota(pairs.begin(), pairs.end(), Index{0});
    // Fisher-Yates with the model stream keeps the choice seed-determined.
    for (Index i = model.n_pairs() - 1; i > 0; --i) {
      std::uniform_int_distribution<Index> pick(0, i);
      std::swap(pairs[static_cast<std::size_t>(i)], pairs[static_cast<std::size_t>(pick(rng))]);
    }
    for (Index i = 0; i < spec.zero_loss_pairs; ++i) {
      model.loss_embed.row(pairs[static_cast<std::size_t>(i)]).setZero();
    }
  }
  return model;
}

std::string ModelViolation::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::shape: os << "shape mismatch"; break;
    case Kind::negative_mass: os << "negative transition mass"; break;
    case Kind::column_mass: os << "component column mass above 1"; break;
    case Kind::loss_range: os << "loss embedding outside [0, 1]"; break;
    case Kind::initial_state: os << "initial state out of range"; break;
  }
  os << " at (s=" << s << ", a=" << a << ", j=" << j;
  if (next >= 0) os << ", s'=" << next;
  os << "), magnitude " << magnitude;
  return os.str();
}

std::vector<ModelViolation> validate_model(const LinearCsspModel& model, double tol) {
  using K = ModelViolation::Kind;
  std::vector<ModelViolation> out;
  try {
    check_shapes(model);
  } catch (const StructuralError&) {
    out.push_back({K::shape});
    return out;
  }
  if (model.s_init < 0 || model.s_init >= model.n_states)
    out.push_back({K::initial_state, model.s_init, -1, -1, -1, static_cast<double>(model.s_init)});
  if (!model.s_init_by_component.empty()) {
    if (static_cast<Index>(model.s_init_by_component.size()) != model.d) out.push_back({K::shape});
    for (std::size_t j = 0; j < model.s_init_by_component.size(); ++j) {
      const Index s = model.s_init_by_component[j];
      if (s < 0 || s >= model.n_states)
        out.push_back({K::initial_state, s, -1, static_cast<Index>(j), -1, static_cast<double>(s)});
    }
  }
  for (Index s = 0; s < model.n_states; ++s) {
    for (Index a = 0; a < model.n_actions; ++a) {
      const Index k = model.pair_index(s, a);
      const auto& p = model.trans_embed[static_cast<std::size_t>(k)];
      for (Index j = 0; j < model.d; ++j) {
        for (Index next = 0; next < model.n_states; ++next) {
          if (p(next, j) < 0.0) out.push_back({K::negative_mass, s, a, j, next, -p(next, j)});
        }
        const double mass = p.col(j).sum();
        if (mass > 1.0 + tol) out.push_back({K::column_mass, s, a, j, -1, mass - 1.0});
        const double l = model.loss_embed(k, j);
        if (l < 0.0 || l > 1.0)
          out.push_back({K::loss_range, s, a, j, -1, l < 0.0 ? -l : l - 1.0});
      }
    }
  }
  return out;
}

Context sample_uniform_context(Index d, Rng& rng) {
  Context c{random_split(d, 1.0, rng)};
  return c;
}

ContextStream::ContextStream(ContextSpec spec, Index d, Rng rng)
    : spec_(std::move(spec)), d_(d), rng_(rng) {
  if (d_ < 1) throw ConfigError("context dimension must be >= 1");
  if (spec_.kind == ContextKind::fixed) check_context(Context{spec_.fixed}, d_);
  if (spec_.kind == ContextKind::adaptive && !spec_.adaptive)
    throw ConfigError("adaptive context source needs a callback");
}

Context ContextStream::next(std::span<const EpisodeSummary> history) {
  Context c;
  switch (spec_.kind) {
    case ContextKind::uniform: c = sample_uniform_context(d_, rng_); break;
    case ContextKind::cyclic_vertices: c = Context::vertex(d_, emitted_ % d_); break;
    case ContextKind::fixed: c = Context{spec_.fixed}; break;
    case ContextKind::adaptive: c = spec_.adaptive(history); break;
  }
  check_context(c, d_);
  ++emitted_;
  return c;
}

std::vector<Context> context_sequence(const ContextSpec& spec, Index K, Index d, Rng& rng) {
  if (K < 1) throw ConfigError("context sequence needs K >= 1");
  if (d < 1) throw ConfigError("context dimension must be >= 1");
  std::vector<Context> out;
  out.reserve(static_cast<std::size_t>(K));
  for (Index k = 0; k < K; ++k) {
    switch (spec.kind) {
      case ContextKind::uniform: out.push_back(sample_uniform_context(d, rng)); break;
      case ContextKind::cyclic_vertices: out.push_back(Context::vertex(d, k % d)); break;
      case ContextKind::fixed: out.push_back(Context{spec.fixed}); break;
      case ContextKind::adaptive:
        throw ConfigError("adaptive contexts depend on history and must be streamed");
    }
    check_context(out.back(), d);
  }
  return out;
}

}  // namespace lrcssp
