// ctxbandit: run experiments, self-diagnose a config, factorize ratings.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "ctxbandit/ctxbandit.hpp"

namespace cb = ctxbandit;

namespace {

constexpr int kOk = 0;
constexpr int kDataError = 1;
constexpr int kCheckFailed = 2;

void print_summary(const cb::ExperimentTrace& tr, const cb::ExperimentConfig& cfg) {
  double epochs = 0.0, comm = 0.0;
  for (const auto& t : tr.trials) {
    epochs += static_cast<double>(t.epochs);
    comm += static_cast<double>(t.meter.total());
  }
  const double n = static_cast<double>(tr.trials.size());
  std::fprintf(stderr, "mode=%s protocol=%s M=%zu T=%zu d=%ld trials=%zu\n", cb::to_string(cfg.mode),
               cb::to_string(cfg.protocol), cfg.M, cfg.T, static_cast<long>(tr.d), tr.trials.size());
  std::fprintf(stderr, "mean R(T)=%.6g  mean epochs=%.4g  mean comm_scalars=%.6g\n",
               tr.mean_regret_at(cfg.T), epochs / n, comm / n);
  for (const auto& note : tr.notes) std::fprintf(stderr, "%s\n", note.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed linear bandits with context distributions"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> mode, protocol;
  auto* run = app.add_subcommand("run", "run an experiment and write the regret trace as CSV");
  run->add_option("--config", config_path, "config file (key = value)")->required();
  run->add_option("--out", out_path, "CSV output path (default: stdout)");
  run->add_option("--seed", seed, "override config seed");
  run->add_option("--trials", trials, "override number of trials");
  run->add_option("--mode", mode, "hidden|observed|exact")
      ->check(CLI::IsMember({"hidden", "observed", "exact"}));
  run->add_option("--protocol", protocol, "sync|immediate|none")
      ->check(CLI::IsMember({"sync", "immediate", "none"}));

  std::string diag_config;
  auto* diagnose = app.add_subcommand("diagnose", "run the statistical self-checks for a config");
  diagnose->add_option("--config", diag_config, "config file")->required();

  std::string ratings_path, factors_out;
  std::size_t rank = 6;
  cb::AlsOptions als;
  auto* fact = app.add_subcommand("factorize", "low-rank factors of a ratings file by ALS");
  fact->add_option("--ratings", ratings_path, "UserID::MovieID::Rating::Timestamp file")->required();
  fact->add_option("--rank", rank, "factor rank")->capture_default_str();
  fact->add_option("--out", factors_out, "factors file")->required();
  fact->add_option("--iterations", als.iterations, "ALS sweeps")->capture_default_str();
  fact->add_option("--reg", als.reg, "ridge regularization")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kDataError;
  }

  try {
    if (*run) {
      cb::ExperimentConfig cfg = cb::load_config(config_path);
      if (seed) cb::apply_setting(cfg, "seed", std::to_string(*seed));
      if (trials) cb::apply_setting(cfg, "trials", std::to_string(*trials));
      if (mode) cb::apply_setting(cfg, "mode", *mode);
      if (protocol) cb::apply_setting(cfg, "protocol", *protocol);
      const cb::ExperimentTrace tr = cb::run_experiment(cfg);
      if (out_path.empty()) cb::write_csv(std::cout, tr);
      else cb::emit_csv(tr, out_path);
      print_summary(tr, cfg);
      return kOk;
    }
    if (*diagnose) {
      const cb::ExperimentConfig cfg = cb::load_config(diag_config);
      const cb::DiagnosticsReport rep = cb::diagnostics_suite(cfg);
      cb::print_report(std::cout, rep);
      return rep.all_passed() ? kOk : kCheckFailed;
    }
    if (*fact) {
      const cb::RatingsDataset ds = cb::ingest_ratings(ratings_path);
      const cb::Factors f = cb::factorize(ds, rank, als);
      cb::save_factors(factors_out, f);
      std::fprintf(stderr, "users=%zu items=%zu ratings=%zu rank=%zu train_rmse=%.6g\n",
                   ds.num_users(), ds.num_items(), ds.ratings.size(), rank, f.train_rmse);
      return kOk;
    }
  } catch (const cb::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDataError;
  }
  return kOk;
}
