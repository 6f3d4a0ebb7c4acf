#pragma once

// Server side of the distributed learner: event-triggered synchronization,
// the immediate-sharing baseline, and communication metering.
//
// Counting convention: a Gram matrix travels as d*d scalars, a statistics
// vector as d scalars, and each synchronization signal is one integer.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "ctxbandit/agent.hpp"
#include "ctxbandit/error.hpp"
#include "ctxbandit/linalg.hpp"

namespace ctxbandit {

enum class ProtocolKind { event_triggered, immediate_sharing, no_communication };

inline const char* to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::event_triggered: return "sync";
    case ProtocolKind::immediate_sharing: return "immediate";
    case ProtocolKind::no_communication: return "none";
  }
  return "?";
}

struct CommMeter {
  std::uint64_t scalars_up = 0;
  std::uint64_t scalars_down = 0;
  std::uint64_t signals = 0;

  std::uint64_t total() const { return scalars_up + scalars_down + signals; }
  std::uint64_t scalars() const { return scalars_up + scalars_down; }
};

class SyncProtocolState {
 public:
  SyncProtocolState(Eigen::Index dim, double lambda, double threshold_B)
      : v_last_(dim, lambda), w_syn_(dim, lambda), u_syn_(dim), threshold_(threshold_B) {
    detail::require(!(threshold_B < 0.0), "SyncProtocolState: threshold must be nonnegative");
    v_last_log_det_ = log_det(v_last_);
  }

  std::uint64_t t_last() const { return t_last_; }
  // V_last = lambda I + W_syn as of the last sync.
  const PsdAccumulator& v_last() const { return v_last_; }
  double v_last_log_det() const { return v_last_log_det_; }
  const PsdAccumulator& w_syn() const { return w_syn_; }
  const LinearStatistics& u_syn() const { return u_syn_; }
  std::uint64_t epoch_count() const { return epochs_; }
  double threshold() const { return threshold_; }

 private:
  friend void run_sync_round(std::span<AgentState>, SyncProtocolState&, CommMeter&, std::uint64_t);
  friend void run_immediate_sharing_round(std::span<AgentState>, SyncProtocolState&, CommMeter&,
                                          std::uint64_t);

  std::uint64_t t_last_ = 0;
  PsdAccumulator v_last_;
  double v_last_log_det_ = 0.0;
  PsdAccumulator w_syn_;
  LinearStatistics u_syn_;
  std::uint64_t epochs_ = 0;
  double threshold_;
};

// log(det V / det V_last) * (t - t_last) >= B, where V = lambda I + W_syn + W_local.
inline bool trigger_check_from_logdet(double log_det_now, const SyncProtocolState& proto,
                                      std::uint64_t t) {
  if (t < proto.t_last()) throw ContractViolation("trigger_check: round precedes last sync");
  if (std::isinf(proto.threshold())) return false;
  const double ratio = log_det_now - proto.v_last_log_det();
  return ratio * static_cast<double>(t - proto.t_last()) >= proto.threshold();
}

inline bool trigger_check(const PsdAccumulator& agent_gram_total, const SyncProtocolState& proto,
                          std::uint64_t t) {
  if (std::isinf(proto.threshold())) return false;
  return trigger_check_from_logdet(log_det(agent_gram_total), proto, t);
}

// B = T log(MT) / (d M).
inline double default_B(std::uint64_t T, std::uint64_t M, Eigen::Index d) {
  detail::require(T > 0 && M > 0 && d > 0, "default_B: arguments must be positive");
  const double t = static_cast<double>(T), m = static_cast<double>(M);
  return t * std::log(m * t) / (static_cast<double>(d) * m);
}

// 2 * ceil(sqrt(T R / B)) with R = ceil(d log(1 + M T / (lambda d))). Each ceiling
// is at least 1, matching the limit B -> infinity.
inline double epoch_bound(std::uint64_t T, std::uint64_t M, Eigen::Index d, double B, double lambda) {
  detail::require(T > 0 && M > 0 && d > 0 && B > 0.0 && lambda > 0.0,
                  "epoch_bound: arguments must be positive");
  const double dd = static_cast<double>(d);
  const double R = std::ceil(dd * std::log(1.0 + static_cast<double>(M) * static_cast<double>(T) /
                                                     (lambda * dd)));
  const double half = std::max(1.0, std::ceil(std::sqrt(static_cast<double>(T) * R / B)));
  return 2.0 * half;
}

// Per-sync cost: every agent uploads and downloads (W, U); one signal starts the round.
inline std::uint64_t sync_round_cost(std::uint64_t M, Eigen::Index d) {
  const auto dd = static_cast<std::uint64_t>(d);
  return M * 2 * (dd * dd + dd) + 1;
}

// Per-round cost of relaying every (feature, reward) pair to all peers.
inline std::uint64_t immediate_round_cost(std::uint64_t M, Eigen::Index d) {
  const auto dd = static_cast<std::uint64_t>(d);
  return M * (dd + 1) + M * (M - 1) * (dd + 1);
}

// Agents upload local buffers, the server aggregates and broadcasts, local
// buffers are cleared and V_last is reset.
inline void run_sync_round(std::span<AgentState> agents, SyncProtocolState& proto, CommMeter& meter,
                           std::uint64_t t) {
  const Eigen::Index d = proto.w_syn_.dim();
  for (const auto& a : agents) {
    proto.w_syn_ += a.local_gram();
    proto.u_syn_ += a.local_stats();
  }
  for (auto& a : agents) a = absorb_sync(std::move(a), proto.w_syn_, proto.u_syn_);
  proto.t_last_ = t;
  proto.v_last_ = proto.w_syn_;
  proto.v_last_log_det_ = log_det(proto.v_last_);
  ++proto.epochs_;

  const auto dd = static_cast<std::uint64_t>(d);
  const auto m = static_cast<std::uint64_t>(agents.size());
  meter.scalars_up += m * (dd * dd + dd);
  meter.scalars_down += m * (dd * dd + dd);
  meter.signals += 1;
}

// Each agent's newest sample (its local buffer holds exactly this round's
// sample) is merged into the shared state every round.
inline void run_immediate_sharing_round(std::span<AgentState> agents, SyncProtocolState& proto,
                                        CommMeter& meter, std::uint64_t t) {
  const Eigen::Index d = proto.w_syn_.dim();
  for (const auto& a : agents) {
    proto.w_syn_ += a.local_gram();
    proto.u_syn_ += a.local_stats();
  }
  for (auto& a : agents) a = absorb_sync(std::move(a), proto.w_syn_, proto.u_syn_);
  proto.t_last_ = t;
  proto.v_last_ = proto.w_syn_;
  ++proto.epochs_;

  const auto dd = static_cast<std::uint64_t>(d);
  const auto m = static_cast<std::uint64_t>(agents.size());
  meter.scalars_up += m * (dd + 1);
  meter.scalars_down += m * (m - 1) * (dd + 1);
}

}  // namespace ctxbandit
