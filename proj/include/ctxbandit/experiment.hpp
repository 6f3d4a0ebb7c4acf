#pragma once

// Experiment orchestration: configuration, the per-trial simulation loop,
// traces and CSV output.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <exception>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ctxbandit/agent.hpp"
#include "ctxbandit/environment.hpp"
#include "ctxbandit/error.hpp"
#include "ctxbandit/protocol.hpp"
#include "ctxbandit/ratings.hpp"
#include "ctxbandit/rng.hpp"

namespace ctxbandit {

// hidden: agents only ever see mu_t. observed: c_t is revealed after acting and
// used for learning. exact: c_t is known before acting (mu_t replaced by a Dirac).
enum class ObservationMode { hidden, observed, exact };
enum class EnvKind { synthetic, movielens };

inline const char* to_string(ObservationMode m) {
  switch (m) {
    case ObservationMode::hidden: return "hidden";
    case ObservationMode::observed: return "observed";
    case ObservationMode::exact: return "exact";
  }
  return "?";
}

struct ExperimentConfig {
  EnvKind env = EnvKind::synthetic;
  std::size_t M = 3;
  std::size_t T = 1000;
  std::size_t trials = 100;
  ObservationMode mode = ObservationMode::hidden;
  ProtocolKind protocol = ProtocolKind::event_triggered;
  std::optional<double> delta;
  std::optional<double> lambda;
  std::optional<double> S;
  std::optional<double> rho_override;
  std::optional<double> B_override;
  std::uint64_t seed = 1;

  // environment knobs
  double sigma = 1e-3;
  std::size_t actions = 20;
  std::size_t context_dim = 5;
  double center_var = 1.0;
  double context_var = 1.0;
  std::size_t probes = 100000;

  // movielens
  std::string ratings;
  std::string factors;
  std::size_t rank = 6;
  double noise_level = 0.1;
  std::size_t als_iterations = 25;
  double als_reg = 0.1;

  std::size_t threads = 1;
  bool record_diagnostics = false;

  void validate() const {
    if (T < 1) throw ConfigError("config: T must be >= 1");
    if (M < 1) throw ConfigError("config: M must be >= 1");
    if (trials < 1) throw ConfigError("config: trials must be >= 1");
    if (actions < 1) throw ConfigError("config: actions must be >= 1");
    if (sigma < 0.0) throw ConfigError("config: sigma must be >= 0");
    if (center_var < 0.0 || context_var < 0.0) throw ConfigError("config: variances must be >= 0");
    if (delta && !(*delta > 0.0 && *delta < 1.0)) throw ConfigError("config: delta must lie in (0,1)");
    if (lambda && !(*lambda > 0.0)) throw ConfigError("config: lambda must be > 0");
    if (S && *S < 0.0) throw ConfigError("config: S must be >= 0");
    if (rho_override && *rho_override < 0.0) throw ConfigError("config: rho_override must be >= 0");
    if (B_override && *B_override < 0.0) throw ConfigError("config: B_override must be >= 0");
    if (env == EnvKind::movielens && ratings.empty() && factors.empty())
      throw ConfigError("config: env = movielens needs `ratings` or `factors`");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_real(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw ConfigError("config: `" + key + "` expects a real, got '" + v + "'");
  return x;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty())
    throw ConfigError("config: `" + key + "` expects a nonnegative integer, got '" + v + "'");
  return x;
}

}  // namespace detail

inline ObservationMode parse_mode(const std::string& v) {
  if (v == "hidden") return ObservationMode::hidden;
  if (v == "observed") return ObservationMode::observed;
  if (v == "exact") return ObservationMode::exact;
  throw ConfigError("config: mode must be hidden|observed|exact, got '" + v + "'");
}

inline ProtocolKind parse_protocol(const std::string& v) {
  if (v == "sync" || v == "event_triggered") return ProtocolKind::event_triggered;
  if (v == "immediate" || v == "immediate_sharing") return ProtocolKind::immediate_sharing;
  if (v == "none" || v == "no_communication") return ProtocolKind::no_communication;
  throw ConfigError("config: protocol must be sync|immediate|none, got '" + v + "'");
}

// Sets one config key from its textual value; unknown keys are errors.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using detail::to_real;
  using detail::to_uint;
  if (key == "env") {
    if (v == "synthetic") c.env = EnvKind::synthetic;
    else if (v == "movielens") c.env = EnvKind::movielens;
    else throw ConfigError("config: env must be synthetic|movielens, got '" + v + "'");
  } else if (key == "M") c.M = to_uint(key, v);
  else if (key == "T") c.T = to_uint(key, v);
  else if (key == "trials") c.trials = to_uint(key, v);
  else if (key == "mode") c.mode = parse_mode(v);
  else if (key == "protocol") c.protocol = parse_protocol(v);
  else if (key == "delta") c.delta = to_real(key, v);
  else if (key == "lambda") c.lambda = to_real(key, v);
  else if (key == "S") c.S = to_real(key, v);
  else if (key == "rho_override") c.rho_override = to_real(key, v);
  else if (key == "B_override") c.B_override = to_real(key, v);
  else if (key == "seed") c.seed = to_uint(key, v);
  else if (key == "sigma") c.sigma = to_real(key, v);
  else if (key == "actions") c.actions = to_uint(key, v);
  else if (key == "context_dim") c.context_dim = to_uint(key, v);
  else if (key == "center_var") c.center_var = to_real(key, v);
  else if (key == "context_var") c.context_var = to_real(key, v);
  else if (key == "probes") c.probes = to_uint(key, v);
  else if (key == "ratings") c.ratings = v;
  else if (key == "factors") c.factors = v;
  else if (key == "rank") c.rank = to_uint(key, v);
  else if (key == "noise_level") c.noise_level = to_real(key, v);
  else if (key == "als_iterations") c.als_iterations = to_uint(key, v);
  else if (key == "als_reg") c.als_reg = to_real(key, v);
  else if (key == "threads") c.threads = to_uint(key, v);
  else if (key == "record_diagnostics") {
    if (v == "true" || v == "1") c.record_diagnostics = true;
    else if (v == "false" || v == "0") c.record_diagnostics = false;
    else throw ConfigError("config: record_diagnostics must be true|false");
  } else throw ConfigError("config: unknown key `" + key + "`");
}

// `key = value` lines; blank lines and lines starting with '#' are skipped.
inline ExperimentConfig parse_config(std::istream& in, const std::string& source = "<stream>") {
  ExperimentConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected `key = value`");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string val = detail::trim(t.substr(eq + 1));
    try {
      apply_setting(c, key, val);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return parse_config(in, path);
}

// True when the distribution agents see is always a point mass at the
// realized context, so psi == phi and the context noise term vanishes.
inline bool reveals_context(const Environment& env) {
  return std::visit(
      [](const auto& src) {
        using S = std::decay_t<decltype(src)>;
        if constexpr (std::is_same_v<S, GaussianContextSource>) return src.context_var == 0.0;
        else if constexpr (std::is_same_v<S, UserContextSource>) {
          for (std::size_t u = 0; u < src.users.size(); ++u)
            if (!(src.users[u].array() == src.noisy_users[u].array()).all()) return false;
          return true;
        } else return src.dirac;
      },
      env.context_source());
}

struct ResolvedParams {
  ConfidenceParams confidence;
  double delta = 0.0;  // before the union-bound split
  double B = std::numeric_limits<double>::infinity();
  UpdateMode update = UpdateMode::hidden;
};

// Default confidence scaling per mode:
//   hidden:   rho = sqrt(4 + sigma^2), delta/2 (psi features carry bounded
//             context noise on top of eta)
//   observed: rho = sigma,             delta/3
//   exact:    as hidden, except rho = sigma because psi == phi
// Hidden mode in an environment whose mu_t is always a Dirac at c_t is the
// same algorithm as exact and gets the same defaults.
inline ResolvedParams resolve_params(const ExperimentConfig& cfg, const Environment& env) {
  ResolvedParams p;
  const auto M = static_cast<double>(cfg.M), T = static_cast<double>(cfg.T);
  p.delta = cfg.delta.value_or(1.0 / (M * M * T));
  const double lambda = cfg.lambda.value_or(1.0);
  const double S = cfg.S.value_or(env.theta_star().norm());
  const double sigma = env.noise_sigma();
  const bool exact_contexts = cfg.mode == ObservationMode::exact || reveals_context(env);

  double rho = 0.0, split = 2.0;
  switch (cfg.mode) {
    case ObservationMode::observed:
      rho = sigma;
      split = 3.0;
      p.update = UpdateMode::observed;
      break;
    case ObservationMode::hidden:
    case ObservationMode::exact:
      rho = exact_contexts ? sigma : std::sqrt(4.0 + sigma * sigma);
      split = 2.0;
      p.update = UpdateMode::hidden;
      break;
  }
  if (cfg.rho_override) rho = *cfg.rho_override;
  p.confidence = ConfidenceParams{rho, p.delta / split, lambda, S};

  switch (cfg.protocol) {
    case ProtocolKind::event_triggered:
      p.B = cfg.B_override.value_or(default_B(cfg.T, cfg.M, env.dim()));
      break;
    case ProtocolKind::immediate_sharing:
      p.B = 0.0;
      break;
    case ProtocolKind::no_communication:
      p.B = std::numeric_limits<double>::infinity();
      break;
  }
  return p;
}

// Builds (or shares) the environment used by each trial.
class EnvironmentProvider {
 public:
  explicit EnvironmentProvider(const ExperimentConfig& cfg) : cfg_(cfg) {
    if (cfg.env == EnvKind::movielens) shared_ = std::make_shared<Environment>(build_movielens());
  }

  Environment for_trial(std::size_t trial) const {
    if (shared_) return *shared_;
    SyntheticOptions o;
    o.context_dim = static_cast<Eigen::Index>(cfg_.context_dim);
    o.num_actions = cfg_.actions;
    o.noise_sigma = cfg_.sigma;
    o.center_var = cfg_.center_var;
    o.context_var = cfg_.context_var;
    o.probes = cfg_.probes;
    return make_synthetic_env(stream_key(cfg_.seed, trial, 0, static_cast<std::uint64_t>(StreamSlot::kEnvironment)), o);
  }

  const Factors* factors() const { return factors_ ? &*factors_ : nullptr; }

  Eigen::Index dim() const {
    return shared_ ? shared_->dim() : 3 * static_cast<Eigen::Index>(cfg_.context_dim);
  }

 private:
  Environment build_movielens() {
    if (!cfg_.factors.empty()) {
      factors_ = load_factors(cfg_.factors);
    } else {
      const RatingsDataset ds = ingest_ratings(cfg_.ratings);
      factors_ = factorize(ds, cfg_.rank, AlsOptions{cfg_.als_iterations, cfg_.als_reg, cfg_.seed});
    }
    if (factors_->items.size() < cfg_.actions)
      throw ConfigError("config: actions exceeds the number of items in the factorization");
    // Seeded choice of `actions` distinct items as the arm set.
    std::vector<std::size_t> idx(factors_->items.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng = make_stream(cfg_.seed, 0, 3, StreamSlot::kEnvironment);
    std::vector<Vector> arms;
    for (std::size_t k = 0; k < cfg_.actions; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[k], idx[pick(rng)]);
      arms.push_back(factors_->items[idx[k]]);
    }
    BilinearOptions bo;
    bo.noise_sigma = cfg_.sigma;
    bo.probes = cfg_.probes;
    return make_bilinear_env(factors_->users, arms, cfg_.noise_level, cfg_.seed, bo);
  }

  ExperimentConfig cfg_;
  std::shared_ptr<const Environment> shared_;
  std::optional<Factors> factors_;
};

struct TraceRow {
  double cum_regret = 0.0;
  std::uint64_t epochs = 0;
  std::uint64_t comm_scalars = 0;  // metered total: scalars both ways plus signals
};

// Per (round, agent) diagnostics, recorded when requested.
struct AgentStepRecord {
  double beta = 0.0;
  double log_det = 0.0;
  bool covered = true;      // ||theta_hat - theta*||_V <= beta
  double martingale = 0.0;  // D_j
  double width_gap = 0.0;   // S_j = ||psi||_{V^-1} - ||phi||_{V^-1}
};

struct TrialTrace {
  std::vector<TraceRow> rows;               // one per round
  std::vector<std::uint32_t> actions;       // round-major, M per round
  std::vector<AgentStepRecord> diagnostics; // round-major, M per round (optional)
  CommMeter meter;
  std::uint64_t epochs = 0;
};

struct ExperimentTrace {
  std::size_t T = 0;
  std::size_t M = 0;
  Eigen::Index d = 0;
  std::vector<TrialTrace> trials;
  std::vector<std::string> notes;  // run metadata, e.g. the movielens noise level

  double final_regret(std::size_t trial) const { return trials.at(trial).rows.back().cum_regret; }
  double regret_at(std::size_t trial, std::size_t round) const {
    return trials.at(trial).rows.at(round - 1).cum_regret;
  }
  double mean_regret_at(std::size_t round) const {
    double s = 0.0;
    for (std::size_t k = 0; k < trials.size(); ++k) s += regret_at(k, round);
    return s / static_cast<double>(trials.size());
  }
};

// Everything an observer can inspect about one agent's step, before the
// agent learns from it.
struct StepView {
  std::size_t trial;
  std::size_t round;
  std::size_t agent;
  const Environment& env;
  const RoundObservation& obs;
  const ContextDistribution& agent_mu;
  const ConfidenceEllipsoid& ellipsoid;
  std::size_t action;
  std::size_t best;
};

using StepObserver = std::function<void(const StepView&)>;

// One independent run of T rounds with M agents.
inline TrialTrace run_trial(const ExperimentConfig& cfg, const Environment& env, std::size_t trial,
                            const StepObserver* observer = nullptr) {
  const ResolvedParams p = resolve_params(cfg, env);
  const Eigen::Index d = env.dim();
  const std::size_t M = cfg.M;
  const bool exact = cfg.mode == ObservationMode::exact;

  std::vector<AgentState> agents;
  agents.reserve(M);
  for (std::size_t i = 0; i < M; ++i) agents.emplace_back(i, d, p.update, p.confidence);
  SyncProtocolState proto(d, p.confidence.lambda, p.B);

  TrialTrace tr;
  tr.rows.reserve(cfg.T);
  tr.actions.reserve(cfg.T * M);
  if (cfg.record_diagnostics) tr.diagnostics.reserve(cfg.T * M);

  double cum = 0.0;
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    Rng ctx_rng = make_stream(cfg.seed, trial, t, StreamSlot::kContext);
    const RoundObservation obs = env.draw_round(ctx_rng);
    const ContextDistribution agent_mu =
        exact ? ContextDistribution::dirac(obs.realized_context) : obs.mu;
    const std::vector<FeatureVector> psi = env.psi_set(agent_mu);
    const std::vector<FeatureVector> psi_env = exact ? env.psi_set(obs.mu) : psi;

    std::size_t best = 0;
    for (std::size_t a = 1; a < psi_env.size(); ++a)
      if (psi_env[a].dot(env.theta_star()) > psi_env[best].dot(env.theta_star())) best = a;
    const FeatureVector phi_best = env.phi(best, obs.realized_context);
    const double best_reward = phi_best.dot(env.theta_star());

    for (std::size_t i = 0; i < M; ++i) {
      const ConfidenceEllipsoid ell = agents[i].ellipsoid();
      const Selection sel = select_action(ell, psi);
      Rng noise = make_stream(cfg.seed, trial, t, i);
      const double y = env.reward(sel.action, obs.realized_context, noise);
      const FeatureVector phi = env.phi(sel.action, obs.realized_context);
      cum += best_reward - phi.dot(env.theta_star());
      tr.actions.push_back(static_cast<std::uint32_t>(sel.action));

      if (cfg.record_diagnostics) {
        AgentStepRecord rec;
        rec.beta = ell.radius();
        rec.log_det = ell.log_det();
        rec.covered = ell.contains(env.theta_star());
        rec.martingale = ((phi_best - psi_env[best]) - (phi - psi_env[sel.action])).dot(env.theta_star());
        rec.width_gap = ell.width(psi_env[sel.action]) - ell.width(phi);
        tr.diagnostics.push_back(rec);
      }
      if (observer)
        (*observer)(StepView{trial, t, i, env, obs, agent_mu, ell, sel.action, best});

      agents[i] = local_update(std::move(agents[i]), psi[sel.action], &phi, y);
    }

    switch (cfg.protocol) {
      case ProtocolKind::event_triggered: {
        bool fire = false;
        for (const auto& a : agents)
          if (trigger_check(a.total_gram(), proto, t)) {
            fire = true;
            break;
          }
        if (fire) run_sync_round(agents, proto, tr.meter, t);
        break;
      }
      case ProtocolKind::immediate_sharing:
        run_immediate_sharing_round(agents, proto, tr.meter, t);
        break;
      case ProtocolKind::no_communication:
        break;
    }
    tr.rows.push_back(TraceRow{cum, proto.epoch_count(), tr.meter.total()});
  }
  tr.epochs = proto.epoch_count();
  return tr;
}

// Runs cfg.trials independent trials; trial k always uses the streams keyed by
// (seed, k, ...), so the result does not depend on the thread count.
inline ExperimentTrace run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const EnvironmentProvider envs(cfg);
  ExperimentTrace trace;
  trace.T = cfg.T;
  trace.M = cfg.M;
  trace.trials.resize(cfg.trials);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t k = next++; k < cfg.trials; k = next++) {
      try {
        const Environment env = envs.for_trial(k);
        trace.trials[k] = run_trial(cfg, env, k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::size_t nthreads = cfg.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : cfg.threads;
  nthreads = std::min(nthreads, cfg.trials);
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < nthreads; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  trace.d = envs.dim();
  if (cfg.env == EnvKind::movielens) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "noise_level=%.17g", cfg.noise_level);
    trace.notes.emplace_back(buf);
  }
  return trace;
}

// Header `trial,round,cum_regret,epochs,comm_scalars`, one row per (trial,
// round) in trial-major order, reals with 17 significant digits.
inline void write_csv(std::ostream& out, const ExperimentTrace& trace) {
  out << "trial,round,cum_regret,epochs,comm_scalars\n";
  char buf[128];
  for (std::size_t k = 0; k < trace.trials.size(); ++k) {
    const auto& rows = trace.trials[k].rows;
    for (std::size_t t = 0; t < rows.size(); ++t) {
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g,%llu,%llu\n", k, t + 1, rows[t].cum_regret,
                    static_cast<unsigned long long>(rows[t].epochs),
                    static_cast<unsigned long long>(rows[t].comm_scalars));
      out << buf;
    }
  }
}

inline void emit_csv(const ExperimentTrace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open output file: " + path);
  write_csv(out, trace);
  out.flush();
  if (!out) throw ConfigError("error while writing output file: " + path);
}

}  // namespace ctxbandit
