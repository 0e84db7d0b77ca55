// Command-line front end for sweeps, training, evaluation and self-checks.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rsma/experiment.hpp"
#include "rsma/selftest.hpp"

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string preset;
  std::string outdir;
  std::string snr;
  std::string schemes;
  std::string antennas_tx;
  std::string antennas_rx;
  std::optional<std::size_t> episodes;
  std::optional<double> beta;
  std::string csit;
  std::string order_source;
  std::optional<std::size_t> eval_runs;
  std::optional<std::size_t> eval_steps;
  std::vector<std::string> set;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("-c,--config", o.config, "Experiment INI file")->check(CLI::ExistingFile);
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--preset", o.preset, "full or desk")->check(CLI::IsMember({"full", "desk"}));
  app->add_option("--outdir", o.outdir, "Output directory");
  app->add_option("--snr", o.snr, "SNR list in dB, comma separated");
  app->add_option("--schemes", o.schemes, "Scheme list, comma separated");
  app->add_option("--tx", o.antennas_tx, "Transmit antennas M1[,M2]");
  app->add_option("--rx", o.antennas_rx, "Receive antennas N1[,N2]");
  app->add_option("--episodes", o.episodes, "Training episodes");
  app->add_option("--beta", o.beta, "Rate weight of user 1");
  app->add_option("--csit", o.csit, "none, fixed or snr_scaled");
  app->add_option("--order-source", o.order_source, "exhaustive, learned or fixed");
  app->add_option("--eval-runs", o.eval_runs, "Evaluation runs");
  app->add_option("--eval-steps", o.eval_steps, "Steps per evaluation run");
  app->add_option("--set", o.set, "Raw override section.key=value (repeatable)");
}

rsma::ExperimentConfig build_config(const CommonOptions& o) {
  rsma::ExperimentConfig c = o.config.empty() ? rsma::ExperimentConfig{} : rsma::load_config(o.config);
  auto set = [&](const std::string& key, const std::string& value) { rsma::apply_setting(c, key, value); };
  if (!o.preset.empty()) set("experiment.preset", o.preset);
  if (o.seed) set("experiment.seed", std::to_string(*o.seed));
  if (!o.outdir.empty()) set("experiment.outdir", o.outdir);
  if (!o.snr.empty()) set("experiment.snr_db", o.snr);
  if (!o.schemes.empty()) set("experiment.schemes", o.schemes);
  if (!o.antennas_tx.empty()) set("antennas.tx", o.antennas_tx);
  if (!o.antennas_rx.empty()) set("antennas.rx", o.antennas_rx);
  if (o.episodes) set("training.episodes", std::to_string(*o.episodes));
  if (o.beta) set("experiment.beta", rsma::detail::format_double(*o.beta));
  if (!o.csit.empty()) set("experiment.csit", o.csit);
  if (!o.order_source.empty()) set("experiment.order_source", o.order_source);
  if (o.eval_runs) set("evaluation.runs", std::to_string(*o.eval_runs));
  if (o.eval_steps) set("evaluation.steps", std::to_string(*o.eval_steps));
  for (const auto& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw rsma::ConfigError("--set expects section.key=value, got '" + kv + "'");
    set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return c;
}

void print_table(const rsma::ExperimentConfig& c, const std::vector<rsma::SweepRow>& rows) {
  rsma::write_sweep_csv(std::cout, c, rows);
}

int run_train(const CommonOptions& o, const std::string& scheme_name) {
  const rsma::ExperimentConfig c = build_config(o);
  c.validate();
  const rsma::Scheme scheme = rsma::parse_scheme(scheme_name);
  if (!rsma::is_learning(scheme)) throw rsma::ConfigError("train expects maddpg_rs or maddpg_nors");
  const double snr = c.snr_db.front();
  const auto dir = rsma::checkpoint_dir(c, scheme, snr);
  std::filesystem::create_directories(dir);
  std::ofstream trace(dir / "trace.csv", std::ios::trunc);
  trace << rsma::kTraceHeader << "\n";
  const rsma::MaddpgConfig mc = c.make_training(snr, scheme == rsma::Scheme::maddpg_rs);
  auto result = rsma::train(mc, [&](const rsma::TraceRow& row, const rsma::MaddpgSystem&) {
    rsma::write_trace_row(trace, row);
    trace.flush();
    if (row.episode % 100 == 0 || row.episode == mc.episodes) {
      std::fprintf(stderr, "episode %zu/%zu  reward %.4f  sum-rate %.4f\n", row.episode, mc.episodes,
                   row.mean_reward, row.mean_sum_rate);
    }
  });
  for (const auto& p : rsma::save_checkpoints(result.system, dir)) std::cout << p.string() << "\n";
  std::cout << (dir / "trace.csv").string() << "\n";
  return 0;
}

int run_eval(const CommonOptions& o, const std::string& scheme_name) {
  const rsma::ExperimentConfig c = build_config(o);
  c.validate();
  const rsma::Scheme scheme = rsma::parse_scheme(scheme_name);
  std::vector<rsma::SweepRow> rows;
  for (double snr : c.snr_db) {
    const rsma::EvalSpec spec = c.make_eval(snr);
    rsma::EvalResult r;
    if (rsma::is_learning(scheme)) {
      const auto sys = rsma::load_checkpoints(c.make_training(snr, scheme == rsma::Scheme::maddpg_rs),
                                              rsma::checkpoint_dir(c, scheme, snr));
      r = rsma::evaluate(sys, spec);
    } else {
      r = rsma::evaluate_outcomes(c.antennas, spec, [&](const auto& ch, const auto& est) {
        return rsma::benchmark_outcome(scheme, ch, est, c.training.power, c.beta);
      });
    }
    rows.push_back({snr, scheme, r.mean_sum_rate, r.std_sum_rate, r.mean_reward, spec.runs, spec.steps});
  }
  print_table(c, rows);
  return 0;
}

int run_selftest(std::size_t draws, std::uint64_t seed) {
  bool ok = true;
  for (const auto& check : rsma::selftest::run_all(draws, seed)) {
    std::printf("[%s] %s (worst %.3g)\n", check.passed ? "PASS" : "FAIL", check.name.c_str(), check.worst);
    ok = ok && check.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate-splitting MADDPG simulator for the two-user MIMO interference channel"};
  app.require_subcommand(1);

  CommonOptions sweep_opts, conv_opts, region_opts, train_opts, eval_opts;
  std::string train_scheme = "maddpg_rs";
  std::string eval_scheme = "maddpg_rs";
  std::size_t selftest_draws = 200;
  std::uint64_t selftest_seed = 1;

  auto* sweep = app.add_subcommand("sweep", "Train/evaluate every scheme at every SNR and write sweep.csv");
  add_common(sweep, sweep_opts);
  auto* conv = app.add_subcommand("converge", "Write per-episode learning traces and confidence bands");
  add_common(conv, conv_opts);
  auto* region = app.add_subcommand("region", "Write (R1, R2) trajectories for each beta");
  add_common(region, region_opts);
  auto* train = app.add_subcommand("train", "Train one learning scheme at the first SNR");
  add_common(train, train_opts);
  train->get_option("--seed")->required();
  train->add_option("--scheme", train_scheme, "maddpg_rs or maddpg_nors");
  auto* eval = app.add_subcommand("eval", "Evaluate saved checkpoints or a benchmark precoder");
  add_common(eval, eval_opts);
  eval->add_option("--scheme", eval_scheme, "Scheme to evaluate");
  auto* self = app.add_subcommand("selftest", "Run the built-in invariant checks");
  self->add_option("--draws", selftest_draws, "Random draws per check");
  self->add_option("--seed", selftest_seed, "Seed for the checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) {
      const auto c = build_config(sweep_opts);
      print_table(c, rsma::run_sweep(c));
    } else if (*conv) {
      const auto c = build_config(conv_opts);
      for (const auto& r : rsma::run_convergence(c)) {
        std::printf("%s snr=%g final=%.4f bound=%.4f band=[%.4f, %.4f]\n", std::string(rsma::to_string(r.scheme)).c_str(),
                    r.snr_db, r.trace.back().mean_sum_rate, r.bound_line, r.band.band_low(), r.band.band_high());
      }
    } else if (*region) {
      const auto c = build_config(region_opts);
      for (const auto& p : rsma::run_rate_region(c)) {
        std::printf("beta=%g episode=%zu R1=%.4f R2=%.4f\n", p.beta, p.episode, p.r1, p.r2);
      }
    } else if (*train) {
      return run_train(train_opts, train_scheme);
    } else if (*eval) {
      return run_eval(eval_opts, eval_scheme);
    } else if (*self) {
      return run_selftest(selftest_draws, selftest_seed);
    }
  } catch (const rsma::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
