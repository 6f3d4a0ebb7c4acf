#pragma once

// Bandit environments: a finite action set, a feature map, a per-round context
// source and the true parameter theta*. Immutable once built; all randomness
// comes in through explicit streams.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <variant>
#include <vector>

#include "ctxbandit/contexts.hpp"
#include "ctxbandit/error.hpp"
#include "ctxbandit/features.hpp"
#include "ctxbandit/linalg.hpp"
#include "ctxbandit/rng.hpp"

namespace ctxbandit {

using FeatureModel = std::variant<QuadraticFeatures, BilinearFeatures>;

// Per round: mean m ~ N(0, center_var I), agents see mu = N(m, context_var I)
// and the realized context is drawn from mu. context_var == 0 gives Dirac mu.
struct GaussianContextSource {
  Eigen::Index dim = 5;
  double center_var = 1.0;
  double context_var = 1.0;
};

// Per round a user is drawn uniformly. Agents see a Dirac at the user's noisy
// factor; the realized context is the true factor.
struct UserContextSource {
  std::vector<Vector> users;
  std::vector<Vector> noisy_users;
};

// Fixed context every round; mostly for tests.
struct FixedContextSource {
  Vector context;
  bool dirac = true;
  double context_var = 0.0;
};

using ContextSource = std::variant<GaussianContextSource, UserContextSource, FixedContextSource>;

// What the environment produced for one round. Rewards are drawn on demand,
// one noise draw per (agent, round) stream.
struct RoundObservation {
  ContextDistribution mu;
  Vector realized_context;
};

// Reward normalization: phi_env = feature_scale * phi_raw and
// theta_env = theta_raw * reward_scale / feature_scale, so that
// phi_env . theta_env = reward_scale * raw reward.
struct Scaling {
  double feature_scale = 1.0;
  double reward_scale = 1.0;
};

class Environment {
 public:
  Environment(std::vector<Vector> actions, FeatureModel model, ContextSource contexts,
              Vector theta_raw, double noise_sigma, Scaling scaling = {})
      : actions_(std::move(actions)),
        model_(std::move(model)),
        contexts_(std::move(contexts)),
        theta_raw_(std::move(theta_raw)),
        sigma_(noise_sigma),
        scaling_(scaling) {
    detail::require(!actions_.empty(), "Environment: need at least one action");
    detail::require(sigma_ >= 0.0, "Environment: noise sigma must be nonnegative");
    detail::require(scaling_.feature_scale > 0.0 && scaling_.reward_scale > 0.0,
                    "Environment: scales must be positive");
    theta_ = theta_raw_ * (scaling_.reward_scale / scaling_.feature_scale);
    Vector probe_context = initial_context();
    const FeatureVector phi = raw_phi(0, probe_context);
    detail::require(phi.size() == theta_raw_.size(),
                    "Environment: theta* dimension does not match the feature map");
  }

  std::size_t num_actions() const { return actions_.size(); }
  Eigen::Index dim() const { return theta_.size(); }
  const std::vector<Vector>& actions() const { return actions_; }
  const Vector& theta_star() const { return theta_; }
  const Vector& theta_raw() const { return theta_raw_; }
  double noise_sigma() const { return sigma_; }
  const Scaling& scaling() const { return scaling_; }
  const FeatureModel& model() const { return model_; }
  const ContextSource& context_source() const { return contexts_; }

  FeatureVector raw_phi(std::size_t action, const Vector& context) const {
    return std::visit([&](const auto& m) { return FeatureVector(m(actions_.at(action), context)); },
                      model_);
  }

  FeatureVector phi(std::size_t action, const Vector& context) const {
    return raw_phi(action, context) * scaling_.feature_scale;
  }

  FeatureVector psi(std::size_t action, const ContextDistribution& mu) const {
    return std::visit(
               [&](const auto& m) { return FeatureVector(psi_expected(m, actions_.at(action), mu)); },
               model_) *
           scaling_.feature_scale;
  }

  std::vector<FeatureVector> psi_set(const ContextDistribution& mu) const {
    std::vector<FeatureVector> out;
    out.reserve(actions_.size());
    for (std::size_t a = 0; a < actions_.size(); ++a) out.push_back(psi(a, mu));
    return out;
  }

  double expected_reward(std::size_t action, const Vector& context) const {
    return phi(action, context).dot(theta_);
  }

  // y = phi(x, c)^T theta* + eta, eta ~ N(0, sigma^2).
  double reward(std::size_t action, const Vector& context, Rng& noise_rng) const {
    const double mean = expected_reward(action, context);
    if (sigma_ == 0.0) return mean;
    std::normal_distribution<double> eta(0.0, sigma_);
    return mean + eta(noise_rng);
  }

  // Draws mu_t and the realized context c_t for one round.
  RoundObservation draw_round(Rng& rng) const {
    return std::visit(
        [&](const auto& src) -> RoundObservation {
          using S = std::decay_t<decltype(src)>;
          std::normal_distribution<double> n01(0.0, 1.0);
          if constexpr (std::is_same_v<S, GaussianContextSource>) {
            Vector m(src.dim);
            const double sd = std::sqrt(src.center_var);
            for (Eigen::Index i = 0; i < m.size(); ++i) m[i] = sd * n01(rng);
            ContextDistribution mu = src.context_var > 0.0
                                         ? ContextDistribution::gaussian(
                                               m, Vector::Constant(src.dim, src.context_var))
                                         : ContextDistribution::dirac(m);
            Vector c = mu.sample(rng);
            return RoundObservation{std::move(mu), std::move(c)};
          } else if constexpr (std::is_same_v<S, UserContextSource>) {
            std::uniform_int_distribution<std::size_t> pick(0, src.users.size() - 1);
            const std::size_t u = pick(rng);
            return RoundObservation{ContextDistribution::dirac(src.noisy_users[u]), src.users[u]};
          } else {
            ContextDistribution mu =
                src.dirac ? ContextDistribution::dirac(src.context)
                          : ContextDistribution::gaussian(
                                src.context, Vector::Constant(src.context.size(), src.context_var));
            Vector c = mu.sample(rng);
            return RoundObservation{std::move(mu), std::move(c)};
          }
        },
        contexts_);
  }

 private:
  Vector initial_context() const {
    return std::visit(
        [](const auto& src) -> Vector {
          using S = std::decay_t<decltype(src)>;
          if constexpr (std::is_same_v<S, GaussianContextSource>) return Vector::Zero(src.dim);
          else if constexpr (std::is_same_v<S, UserContextSource>) {
            detail::require(!src.users.empty() && src.users.size() == src.noisy_users.size(),
                            "Environment: user context source needs matching user lists");
            return src.users.front();
          } else return src.context;
        },
        contexts_);
  }

  std::vector<Vector> actions_;
  FeatureModel model_;
  ContextSource contexts_;
  Vector theta_raw_;
  Vector theta_;
  double sigma_;
  Scaling scaling_;
};

// c_t ~ mu, independent of any environment-specific context source.
inline RoundObservation sample_round(const ContextDistribution& mu, Rng& rng) {
  Vector c = mu.sample(rng);
  return RoundObservation{mu, std::move(c)};
}

// argmax_x psi_{x,mu}^T theta*, lowest index on ties.
inline std::size_t best_action(const Environment& env, const ContextDistribution& mu) {
  std::size_t best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < env.num_actions(); ++a) {
    const double v = env.psi(a, mu).dot(env.theta_star());
    if (v > best_val) {
      best_val = v;
      best = a;
    }
  }
  return best;
}

struct ProbeStats {
  double max_feature_norm = 0.0;
  double min_reward = std::numeric_limits<double>::infinity();
  double max_reward = -std::numeric_limits<double>::infinity();
};

// Raw (unscaled) feature norms and rewards over `count` seeded
// (action, realized context) pairs.
inline ProbeStats probe_environment(const Environment& env, std::size_t count, std::uint64_t seed) {
  ProbeStats st;
  Rng rng = make_stream(seed, 0, 0, StreamSlot::kEnvironment);
  std::uniform_int_distribution<std::size_t> pick(0, env.num_actions() - 1);
  for (std::size_t p = 0; p < count; ++p) {
    const std::size_t a = pick(rng);
    const RoundObservation obs = env.draw_round(rng);
    const FeatureVector phi = env.raw_phi(a, obs.realized_context);
    const double r = phi.dot(env.theta_raw());
    st.max_feature_norm = std::max(st.max_feature_norm, phi.norm());
    st.min_reward = std::min(st.min_reward, r);
    st.max_reward = std::max(st.max_reward, r);
  }
  return st;
}

// Feature norms scaled to at most 1 and rewards [0, max] -> [0, 1] over the
// probe set. The map has no offset: a constant shift is not representable in
// the linear model, so the lower end is pinned at 0.
inline Scaling calibrate_scaling(const ProbeStats& st) {
  detail::require(st.max_feature_norm > 0.0, "calibrate_scaling: all probed features are zero");
  detail::require(st.max_reward > 0.0, "calibrate_scaling: no positive probed reward");
  return Scaling{1.0 / st.max_feature_norm, 1.0 / st.max_reward};
}

inline Environment rescaled(const Environment& env, Scaling s) {
  return Environment(env.actions(), env.model(), env.context_source(), env.theta_raw(),
                     env.noise_sigma(), s);
}

struct SyntheticOptions {
  Eigen::Index context_dim = 5;
  std::size_t num_actions = 20;
  double noise_sigma = 1e-3;
  double center_var = 1.0;
  double context_var = 1.0;
  std::size_t probes = 100000;
};

// theta* = [1 x n, 1 x n, -2 x n] so that the raw reward is ||x - c||^2.
inline Vector synthetic_theta(Eigen::Index n) {
  Vector theta(3 * n);
  theta.segment(0, 2 * n).setOnes();
  theta.segment(2 * n, n).setConstant(-2.0);
  return theta;
}

inline Environment make_synthetic_env(std::uint64_t seed, const SyntheticOptions& opts = {}) {
  detail::require(opts.num_actions >= 1, "make_synthetic_env: need at least one action");
  Rng rng = make_stream(seed, 0, 1, StreamSlot::kEnvironment);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<Vector> actions(opts.num_actions, Vector(opts.context_dim));
  for (auto& x : actions)
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = n01(rng);
  Environment raw(std::move(actions), QuadraticFeatures{},
                  GaussianContextSource{opts.context_dim, opts.center_var, opts.context_var},
                  synthetic_theta(opts.context_dim), opts.noise_sigma);
  return rescaled(raw, calibrate_scaling(probe_environment(raw, opts.probes, seed)));
}

struct BilinearOptions {
  double noise_sigma = 1e-3;
  std::size_t probes = 100000;
};

// Actions are item factors w_m, contexts are user factors v_u, phi = vec(v w^T)
// and theta* = vec(I_k), so phi^T theta* = v . w is the predicted rating. Agents
// see n_u = v_u + noise_level * N(0, I), fixed per user.
inline Environment make_bilinear_env(const std::vector<Vector>& user_feats,
                                     const std::vector<Vector>& movie_feats, double noise_level,
                                     std::uint64_t seed, const BilinearOptions& opts = {}) {
  detail::require(!user_feats.empty() && !movie_feats.empty(),
                  "make_bilinear_env: need users and items");
  const Eigen::Index k = user_feats.front().size();
  for (const auto& v : user_feats)
    if (v.size() != k) throw ContractViolation("make_bilinear_env: user factor dimension mismatch");
  for (const auto& w : movie_feats)
    if (w.size() != k)
      throw ContractViolation("make_bilinear_env: item factor dimension does not match users");
  detail::require(noise_level >= 0.0, "make_bilinear_env: noise level must be nonnegative");

  Rng rng = make_stream(seed, 0, 2, StreamSlot::kEnvironment);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::vector<Vector> noisy = user_feats;
  if (noise_level > 0.0)
    for (auto& n : noisy)
      for (Eigen::Index i = 0; i < k; ++i) n[i] += noise_level * n01(rng);

  Matrix eye = Matrix::Identity(k, k);
  Vector theta = Eigen::Map<const Vector>(eye.data(), k * k);
  Environment raw(movie_feats, BilinearFeatures{}, UserContextSource{user_feats, std::move(noisy)},
                  std::move(theta), opts.noise_sigma);
  return rescaled(raw, calibrate_scaling(probe_environment(raw, opts.probes, seed)));
}

}  // namespace ctxbandit
