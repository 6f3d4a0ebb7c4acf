#pragma once

// Statistical self-checks of a configured experiment: confidence coverage,
// bounded martingale increments, resampled conditional means and the
// Azuma envelope on the summed increments.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "ctxbandit/experiment.hpp"

namespace ctxbandit {

struct DiagnosticCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct DiagnosticsReport {
  std::vector<DiagnosticCheck> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
  const DiagnosticCheck* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

struct DiagnosticsOptions {
  std::size_t resamples = 100000;
  std::size_t resample_trials = 2;  // trials that host resampling checkpoints
  std::size_t checkpoints = 4;      // rounds per hosting trial
  bool include_degenerate_check = true;
};

// Mean and standard error of the resampled D_j and S_j at one step.
struct ResampleStats {
  double d_mean = 0.0, d_se = 0.0;
  double s_mean = 0.0, s_se = 0.0;
};

// Holds (history, mu_t, x) fixed and redraws c ~ mu_t.
inline ResampleStats resample_step(const StepView& v, std::size_t n, Rng& rng) {
  const Environment& env = v.env;
  const ContextDistribution& mu = v.obs.mu;
  const Vector& theta = env.theta_star();
  const FeatureVector psi_x = env.psi(v.action, mu);
  const FeatureVector psi_best = env.psi(v.best, mu);
  const double psi_width = v.ellipsoid.width(psi_x);

  double ds = 0.0, dss = 0.0, ss = 0.0, sss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Vector c = mu.sample(rng);
    const FeatureVector phi_x = env.phi(v.action, c);
    const double d = ((env.phi(v.best, c) - psi_best) - (phi_x - psi_x)).dot(theta);
    const double s = psi_width - v.ellipsoid.width(phi_x);
    ds += d;
    dss += d * d;
    ss += s;
    sss += s * s;
  }
  const double nn = static_cast<double>(n);
  auto se = [nn](double sum, double sq) {
    const double m = sum / nn;
    const double var = std::max(sq / nn - m * m, 0.0) * nn / std::max(nn - 1.0, 1.0);
    return std::sqrt(var / nn);
  };
  return ResampleStats{ds / nn, se(ds, dss), ss / nn, se(ss, sss)};
}

namespace detail {

inline std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

// z-score of a mean against 0; a zero standard error only admits a zero mean.
inline double z_score(double mean, double se) {
  if (se > 0.0) return mean / se;
  return std::abs(mean) <= 1e-12 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
}

}  // namespace detail

inline DiagnosticsReport diagnostics_suite(const ExperimentConfig& cfg_in,
                                           const DiagnosticsOptions& opts = {}) {
  ExperimentConfig cfg = cfg_in;
  cfg.record_diagnostics = true;
  cfg.validate();
  DiagnosticsReport rep;

  const ExperimentTrace trace = run_experiment(cfg);
  const EnvironmentProvider envs(cfg);
  const Environment env0 = envs.for_trial(0);
  const ResolvedParams p = resolve_params(cfg, env0);
  const double M = static_cast<double>(cfg.M), T = static_cast<double>(cfg.T);
  const double delta = p.delta;
  const double lambda = p.confidence.lambda;

  std::size_t steps = 0, uncovered = 0, azuma_ok = 0;
  double max_d = 0.0, max_s = 0.0;
  const double envelope = 4.0 * std::sqrt(2.0 * M * T * std::log(1.0 / delta));
  for (const auto& tr : trace.trials) {
    double sum_d = 0.0;
    for (const auto& r : tr.diagnostics) {
      ++steps;
      if (!r.covered) ++uncovered;
      max_d = std::max(max_d, std::abs(r.martingale));
      max_s = std::max(max_s, std::abs(r.width_gap));
      sum_d += r.martingale;
    }
    if (sum_d <= envelope) ++azuma_ok;
  }
  const double miss = static_cast<double>(uncovered) / static_cast<double>(steps);
  rep.checks.push_back({"coverage", miss <= M * delta + 0.02, miss, M * delta + 0.02,
                        detail::fmt("uncovered fraction over %.0f steps", double(steps))});
  rep.checks.push_back({"martingale_bound", max_d <= 4.0, max_d, 4.0, "max |D_j|"});
  rep.checks.push_back({"width_gap_bound", max_s <= 2.0 / std::sqrt(lambda), max_s,
                        2.0 / std::sqrt(lambda), "max |S_j|"});
  const double freq = static_cast<double>(azuma_ok) / static_cast<double>(trace.trials.size());
  rep.checks.push_back({"azuma_envelope", freq >= 1.0 - delta - 0.02, freq, 1.0 - delta - 0.02,
                        detail::fmt("fraction of trials with sum D_j <= %.6g", envelope)});

  // Resampled conditional means at a few checkpoints.
  double worst_d = 0.0, worst_s = -std::numeric_limits<double>::infinity();
  std::size_t probed = 0;
  const std::size_t ncp = std::max<std::size_t>(1, std::min(opts.checkpoints, cfg.T));
  std::vector<std::size_t> rounds;
  for (std::size_t k = 1; k <= ncp; ++k) rounds.push_back(std::max<std::size_t>(1, k * cfg.T / ncp));
  const StepObserver observer = [&](const StepView& v) {
    if (v.agent != v.round % cfg.M) return;
    if (std::find(rounds.begin(), rounds.end(), v.round) == rounds.end()) return;
    Rng rng = make_stream(cfg.seed, v.trial, v.round,
                          static_cast<std::uint64_t>(StreamSlot::kDiagnostics) + v.agent);
    const ResampleStats st = resample_step(v, opts.resamples, rng);
    worst_d = std::max(worst_d, std::abs(detail::z_score(st.d_mean, st.d_se)));
    worst_s = std::max(worst_s, detail::z_score(st.s_mean, st.s_se));
    ++probed;
  };
  for (std::size_t k = 0; k < std::min(opts.resample_trials, cfg.trials); ++k)
    run_trial(cfg, envs.for_trial(k), k, &observer);
  rep.checks.push_back({"martingale_mean", worst_d <= 4.0, worst_d, 4.0,
                        detail::fmt("max |mean/SE| of D_j over %.0f checkpoints", double(probed))});
  rep.checks.push_back({"width_gap_mean", worst_s <= 4.0, worst_s, 4.0,
                        detail::fmt("max mean/SE of S_j over %.0f checkpoints", double(probed))});

  // No context randomness and no reward noise: both increments vanish.
  if (opts.include_degenerate_check && cfg.env == EnvKind::synthetic) {
    ExperimentConfig z = cfg;
    z.sigma = 0.0;
    z.context_var = 0.0;
    z.trials = std::min<std::size_t>(cfg.trials, 5);
    z.T = std::min<std::size_t>(cfg.T, 200);
    z.probes = std::min<std::size_t>(cfg.probes, 20000);
    const ExperimentTrace zt = run_experiment(z);
    double worst = 0.0;
    for (const auto& tr : zt.trials)
      for (const auto& r : tr.diagnostics)
        worst = std::max({worst, std::abs(r.martingale), std::abs(r.width_gap)});
    rep.checks.push_back({"degenerate_zero", worst == 0.0, worst, 0.0,
                          "max |D_j|, |S_j| with sigma = 0 and point-mass contexts"});
  }
  return rep;
}

inline void print_report(std::ostream& out, const DiagnosticsReport& rep) {
  char buf[256];
  for (const auto& c : rep.checks) {
    std::snprintf(buf, sizeof buf, "%-18s %s  measured=%.6g threshold=%.6g  (%s)\n", c.name.c_str(),
                  c.passed ? "PASS" : "FAIL", c.measured, c.threshold, c.detail.c_str());
    out << buf;
  }
}

}  // namespace ctxbandit
