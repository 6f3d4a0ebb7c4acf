#pragma once

// Per-agent learner state: ridge estimate, confidence ellipsoid and optimistic
// action selection over expected feature vectors.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "ctxbandit/error.hpp"
#include "ctxbandit/linalg.hpp"

namespace ctxbandit {

// hidden: learn from psi (context never revealed).
// observed: select on psi, learn from the realized phi once the context is revealed.
enum class UpdateMode { hidden, observed };

inline const char* to_string(UpdateMode m) { return m == UpdateMode::hidden ? "hidden" : "observed"; }

struct ConfidenceParams {
  double rho = 1.0;
  double delta = 0.05;  // already divided by the union-bound factor
  double lambda = 1.0;
  double S = 1.0;
};

// rho * sqrt(2 log(det(V)^{1/2} det(lambda I)^{-1/2} / delta)) + sqrt(lambda) * S,
// given log det(V) for a d x d matrix V.
inline double confidence_radius_from_logdet(double log_det_v, Eigen::Index d, double rho,
                                            double delta, double lambda, double S) {
  if (!(delta > 0.0 && delta <= 1.0))
    throw ContractViolation("confidence_radius: delta must lie in (0, 1], got " +
                            std::to_string(delta));
  detail::require(rho >= 0.0, "confidence_radius: rho must be nonnegative");
  detail::require(lambda > 0.0, "confidence_radius: lambda must be positive");
  const double potential = 0.5 * (log_det_v - static_cast<double>(d) * std::log(lambda));
  const double arg = 2.0 * (potential - std::log(delta));
  return rho * std::sqrt(std::max(arg, 0.0)) + std::sqrt(lambda) * S;
}

// gram must already carry the ridge (V = lambda I + W).
inline double confidence_radius(const PsdAccumulator& gram, double rho, double delta, double lambda,
                                double S) {
  return confidence_radius_from_logdet(log_det(gram), gram.dim(), rho, delta, lambda, S);
}

// {theta : ||theta_hat - theta||_V <= radius}. Holds the Cholesky factor of V so
// every action score in a round reuses one factorization.
class ConfidenceEllipsoid {
 public:
  ConfidenceEllipsoid(const PsdAccumulator& gram, const LinearStatistics& stats,
                      const ConfidenceParams& p)
      : factor_(gram), center_(factor_.solve(stats.vector())) {
    log_det_ = factor_.log_det();
    radius_ = confidence_radius_from_logdet(log_det_, gram.dim(), p.rho, p.delta, p.lambda, p.S);
  }

  const FeatureVector& center() const { return center_; }
  double radius() const { return radius_; }
  double log_det() const { return log_det_; }
  const SpdFactor& factor() const { return factor_; }

  // Forces a radius; used to study degenerate (greedy) ellipsoids.
  void set_radius(double r) { radius_ = r; }

  double width(const FeatureVector& psi) const { return factor_.inverse_norm(psi); }

  double ucb(const FeatureVector& psi) const { return psi.dot(center_) + radius_ * width(psi); }

  bool contains(const Vector& theta) const { return factor_.norm(center_ - theta) <= radius_; }

  // Maximizer of psi^T theta over the ellipsoid.
  Vector optimistic_theta(const FeatureVector& psi) const {
    const double w = width(psi);
    if (w == 0.0) return center_;
    return center_ + (radius_ / w) * factor_.solve(psi);
  }

 private:
  SpdFactor factor_;
  FeatureVector center_;
  double log_det_ = 0.0;
  double radius_ = 0.0;
};

class AgentState {
 public:
  AgentState(std::size_t id, Eigen::Index dim, UpdateMode mode, ConfidenceParams params)
      : id_(id),
        mode_(mode),
        params_(params),
        local_gram_(dim, params.lambda),
        local_stats_(dim),
        synced_gram_(dim, params.lambda),
        synced_stats_(dim) {}

  std::size_t id() const { return id_; }
  UpdateMode mode() const { return mode_; }
  const ConfidenceParams& params() const { return params_; }
  Eigen::Index dim() const { return local_gram_.dim(); }

  const PsdAccumulator& local_gram() const { return local_gram_; }
  const LinearStatistics& local_stats() const { return local_stats_; }
  const PsdAccumulator& synced_gram() const { return synced_gram_; }
  const LinearStatistics& synced_stats() const { return synced_stats_; }

  // V = lambda I + W_syn + W_local (ridge applied on factorization).
  PsdAccumulator total_gram() const { return synced_gram_ + local_gram_; }
  LinearStatistics total_stats() const { return synced_stats_ + local_stats_; }

  ConfidenceEllipsoid ellipsoid() const {
    return ConfidenceEllipsoid(total_gram(), total_stats(), params_);
  }

  FeatureVector estimate() const { return ridge_solve(total_gram(), total_stats()); }

 private:
  friend AgentState local_update(AgentState, const FeatureVector&, const FeatureVector*, double);
  friend AgentState absorb_sync(AgentState, const PsdAccumulator&, const LinearStatistics&);

  std::size_t id_;
  UpdateMode mode_;
  ConfidenceParams params_;
  PsdAccumulator local_gram_;
  LinearStatistics local_stats_;
  PsdAccumulator synced_gram_;
  LinearStatistics synced_stats_;
};

struct Selection {
  std::size_t action = 0;
  double score = 0.0;
};

// argmax_x psi_x^T theta_hat + radius * ||psi_x||_{V^{-1}}: the joint maximizer
// over actions and the ellipsoid. Lowest index wins ties.
inline Selection select_action(const ConfidenceEllipsoid& ell, std::span<const FeatureVector> psi_set) {
  if (psi_set.empty()) throw ContractViolation("select_action: empty action set");
  Selection best{0, -std::numeric_limits<double>::infinity()};
  for (std::size_t a = 0; a < psi_set.size(); ++a) {
    const double s = ell.ucb(psi_set[a]);
    if (s > best.score) best = Selection{a, s};
  }
  return best;
}

inline Selection select_action(const AgentState& state, std::span<const FeatureVector> psi_set) {
  if (psi_set.empty()) throw ContractViolation("select_action: empty action set");
  return select_action(state.ellipsoid(), psi_set);
}

// hidden mode adds psi psi^T and psi*y; observed mode adds phi phi^T and phi*y
// using the revealed context. Synced state is untouched.
inline AgentState local_update(AgentState s, const FeatureVector& psi,
                               const FeatureVector* phi_realized, double reward) {
  const FeatureVector* v = &psi;
  if (s.mode_ == UpdateMode::observed) {
    if (phi_realized == nullptr)
      throw ContractViolation("local_update: observed mode requires the realized feature vector");
    v = phi_realized;
  }
  if (v->size() != s.dim()) throw ContractViolation("local_update: feature dimension mismatch");
  s.local_gram_.add_outer(*v);
  s.local_stats_.add(*v, reward);
  return s;
}

inline AgentState local_update(AgentState s, const FeatureVector& psi,
                               const std::optional<FeatureVector>& phi_realized, double reward) {
  return local_update(std::move(s), psi, phi_realized ? &*phi_realized : nullptr, reward);
}

// Replace the synced state with the server broadcast and clear local buffers.
inline AgentState absorb_sync(AgentState s, const PsdAccumulator& w_syn, const LinearStatistics& u_syn) {
  if (w_syn.dim() != s.dim() || u_syn.dim() != s.dim())
    throw ContractViolation("absorb_sync: dimension mismatch");
  s.synced_gram_ = w_syn;
  s.synced_stats_ = u_syn;
  s.local_gram_.set_zero();
  s.local_stats_.set_zero();
  return s;
}

}  // namespace ctxbandit
