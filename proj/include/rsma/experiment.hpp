#pragma once

// Experiment orchestration: INI configuration, SNR sweeps over schemes,
// convergence traces and rate-region trajectories, all written as CSV.
//
// Config file (one experiment per file):
//
//   [experiment]
//   seed = 1                 ; required
//   schemes = maddpg_rs, mrt, zf, slnr, upper_bound
//   snr_db = 0, 6, 12, 18
//   beta = 0.5
//   order_source = exhaustive  ; exhaustive | learned | fixed
//   fixed_order = 1, 1
//   csit = none                ; none | fixed | snr_scaled
//   outdir = out
//   preset = full              ; full | desk
//   [antennas]
//   tx = 1, 1
//   rx = 1, 1
//   [training]                 ; every key optional
//   episodes, steps, gamma, batch, buffer, tau, noise_variance,
//   learning_rate, hidden_width, hidden_layers, reuse_checkpoints
//   [evaluation]
//   runs = 25
//   steps = 200
//   seed = <experiment seed>
//   [region]
//   betas = 0.5, 1.0
//   delay = 500
//   every = 100
//   runs = 2

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "rsma/bounds.hpp"
#include "rsma/channel.hpp"
#include "rsma/errors.hpp"
#include "rsma/maddpg.hpp"
#include "rsma/precoders.hpp"
#include "rsma/random.hpp"
#include "rsma/rates.hpp"

namespace rsma {

enum class Scheme { maddpg_rs, maddpg_nors, mrt, zf, slnr, upper_bound, no_interference };

inline constexpr std::array<Scheme, 7> kAllSchemes{Scheme::maddpg_rs, Scheme::maddpg_nors, Scheme::mrt,
                                                   Scheme::zf,        Scheme::slnr,        Scheme::upper_bound,
                                                   Scheme::no_interference};

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::maddpg_rs: return "maddpg_rs";
    case Scheme::maddpg_nors: return "maddpg_nors";
    case Scheme::mrt: return "mrt";
    case Scheme::zf: return "zf";
    case Scheme::slnr: return "slnr";
    case Scheme::upper_bound: return "upper_bound";
    case Scheme::no_interference: return "no_interference";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  for (Scheme k : kAllSchemes)
    if (to_string(k) == s) return k;
  throw ConfigError("unknown scheme '" + std::string(s) +
                    "' (maddpg_rs|maddpg_nors|mrt|zf|slnr|upper_bound|no_interference)");
}

inline bool is_learning(Scheme s) { return s == Scheme::maddpg_rs || s == Scheme::maddpg_nors; }

struct ExperimentConfig {
  AntennaConfig antennas{};
  std::vector<double> snr_db{20.0};
  double beta = 0.5;
  std::vector<Scheme> schemes{Scheme::maddpg_rs};
  OrderSource order_source = OrderSource::exhaustive;
  DecodingOrderPair fixed_order{{1, 1}};
  CsitMode csit = CsitMode::none;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::filesystem::path outdir = "out";

  std::optional<std::size_t> episodes;  // default depends on the antennas
  MaddpgConfig training{};              // learner hyperparameters
  bool reuse_checkpoints = false;

  std::size_t eval_runs = 25;
  std::size_t eval_steps = 200;
  std::optional<std::uint64_t> eval_seed;

  std::vector<double> region_betas{0.5, 1.0};
  std::size_t region_delay = 500;
  std::size_t region_every = 100;
  std::size_t region_runs = 2;

  std::string preset = "full";

  std::size_t episode_count() const { return episodes.value_or(default_episodes(antennas)); }
  std::uint64_t evaluation_seed() const { return eval_seed.value_or(seed ^ 0x9e3779b97f4a7c15ULL); }

  void validate() const {
    antennas.validate();
    if (!seed_set) throw ConfigError("experiment.seed is required");
    if (schemes.empty()) throw ConfigError("experiment.schemes must not be empty");
    if (snr_db.empty()) throw ConfigError("experiment.snr_db must not be empty");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("experiment.beta must lie in [0, 1]");
    if (eval_runs == 0 || eval_steps == 0) throw ConfigError("evaluation runs and steps must be positive");
    if (region_every == 0) throw ConfigError("region.every must be positive");
    make_training(snr_db.front(), true).validate();
  }

  /// Learner configuration for one sweep cell.
  MaddpgConfig make_training(double snr, bool rate_splitting) const {
    MaddpgConfig c = training;
    c.antennas = antennas;
    c.snr_db = snr;
    c.beta = beta;
    c.rate_splitting = rate_splitting;
    c.order_source = order_source;
    c.fixed_order = fixed_order;
    c.csit = csit;
    c.episodes = episode_count();
    c.seed = seed;
    return c;
  }

  EvalSpec make_eval(double snr) const { return {eval_runs, eval_steps, snr, csit, evaluation_seed()}; }

  /// Divides episodes by 4 and sets evaluation runs to 10.
  void apply_desk_preset() {
    preset = "desk";
    episodes = std::max<std::size_t>(1, episode_count() / 4);
    eval_runs = 10;
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(x)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v.front() == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::array<std::size_t, 2> parse_pair(const std::string& key, const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() == 1) {
    const auto x = static_cast<std::size_t>(parse_uint(key, parts[0]));
    return {x, x};
  }
  if (parts.size() != 2) throw ConfigError(key + ": expected one or two values");
  return {static_cast<std::size_t>(parse_uint(key, parts[0])), static_cast<std::size_t>(parse_uint(key, parts[1]))};
}

inline std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + format_double(v[k]);
  return s;
}

}  // namespace detail

/// Applies one "section.key = value" setting; used by the file parser and
/// by command-line overrides.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using namespace detail;
  if (key == "experiment.seed") {
    c.seed = parse_uint(key, v);
    c.seed_set = true;
  } else if (key == "experiment.schemes") {
    c.schemes.clear();
    for (const auto& s : split_list(v)) c.schemes.push_back(parse_scheme(s));
  } else if (key == "experiment.snr_db") {
    c.snr_db.clear();
    for (const auto& s : split_list(v)) c.snr_db.push_back(parse_double(key, s));
  } else if (key == "experiment.beta") {
    c.beta = parse_double(key, v);
  } else if (key == "experiment.order_source") {
    c.order_source = parse_order_source(v);
  } else if (key == "experiment.fixed_order") {
    const auto p = parse_pair(key, v);
    if (p[0] > 1 || p[1] > 1) throw ConfigError(key + ": entries must be 0 or 1");
    c.fixed_order = DecodingOrderPair{{static_cast<int>(p[0]), static_cast<int>(p[1])}};
  } else if (key == "experiment.csit") {
    c.csit = parse_csit_mode(v);
  } else if (key == "experiment.outdir") {
    c.outdir = v;
  } else if (key == "experiment.preset") {
    if (v == "desk") {
      c.apply_desk_preset();
    } else if (v != "full") {
      throw ConfigError(key + ": expected full or desk");
    }
  } else if (key == "antennas.tx") {
    c.antennas.tx = parse_pair(key, v);
  } else if (key == "antennas.rx") {
    c.antennas.rx = parse_pair(key, v);
  } else if (key == "training.episodes") {
    c.episodes = static_cast<std::size_t>(parse_uint(key, v));
  } else if (key == "training.steps") {
    c.training.steps = static_cast<std::size_t>(parse_uint(key, v));
  } else if (key == "training.gamma") {
    c.training.gamma = parse_double(key, v);
  } else if (key == "training.batch") {
    c.training.batch = static_cast<std::size_t>(parse_uint(key, v));
  } else if (key == "training.buffer") {
    c.training.buffer_capacity = static_cast<std::size_t>(parse_uint(key, v));
  } else if (key == "training.tau") {
    c.training.tau = parse_double(key, v);
  } else if (key == "training.noise_variance") {
    c.training.noise_variance = parse_double(key, v);
  } else if (key == "training.learning_rate") {
    c.training.learning_rate = parse_double(key, v);
  } else if (key == "training.hidden_width") {
    c.training.hidden_width = static_cast<std::size_t>(parse_uint(key, v));
  } else if (key == "training.hidden_layers") {
    c.training.hidden_layers = static_cast<std::size_t>(parse_uint(key, v));
  } else if (key == "training.track_bound") {
    c.training.track_bound = parse_bool(key, v);
  } else if (key == "training.reuse_checkpoints") {
    c.reuse_checkpoints = parse_bool(key, v);
  } else if (key == "evaluation.runs") {
    c.eval_runs = static_cast<std::size_t>(parse_uint(key, v));
  } else if (key == "evaluation.steps") {
    c.eval_steps = static_cast<std::size_t>(parse_uint(key, v));
  } else if (key == "evaluation.seed") {
    c.eval_seed = parse_uint(key, v);
  } else if (key == "region.betas") {
    c.region_betas.clear();
    for (const auto& s : split_list(v)) c.region_betas.push_back(parse_double(key, s));
  } else if (key == "region.delay") {
    c.region_delay = static_cast<std::size_t>(parse_uint(key, v));
  } else if (key == "region.every") {
    c.region_every = static_cast<std::size_t>(parse_uint(key, v));
  } else if (key == "region.runs") {
    c.region_runs = static_cast<std::size_t>(parse_uint(key, v));
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

/// Parses an INI experiment file. Errors name the file, line and field.
inline ExperimentConfig parse_config(std::istream& is, const std::string& origin = "<config>") {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig c;
  // The preset is applied first so that explicit episode/run counts win.
  if (auto p = tree.get_optional<std::string>("experiment.preset")) apply_setting(c, "experiment.preset", *p);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError(origin + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      const std::string full = section + "." + key;
      if (full == "experiment.preset") continue;
      try {
        apply_setting(c, full, value.data());
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ": [" + section + "] " + e.what());
      }
    }
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  return parse_config(is, path.string());
}

/// Canonical text of every setting that influences results.
inline std::string canonical_config(const ExperimentConfig& c) {
  using detail::format_double;
  const MaddpgConfig& t = c.training;
  std::ostringstream os;
  os << "antennas.tx=" << c.antennas.tx[0] << "," << c.antennas.tx[1] << "\n"
     << "antennas.rx=" << c.antennas.rx[0] << "," << c.antennas.rx[1] << "\n"
     << "experiment.beta=" << format_double(c.beta) << "\n"
     << "experiment.csit=" << to_string(c.csit) << "\n"
     << "experiment.fixed_order=" << c.fixed_order.eta[0] << "," << c.fixed_order.eta[1] << "\n"
     << "experiment.order_source=" << to_string(c.order_source) << "\n"
     << "experiment.schemes=";
  for (std::size_t k = 0; k < c.schemes.size(); ++k) os << (k ? "," : "") << to_string(c.schemes[k]);
  os << "\nexperiment.seed=" << c.seed << "\n"
     << "experiment.snr_db=" << detail::join_doubles(c.snr_db) << "\n"
     << "evaluation.runs=" << c.eval_runs << "\nevaluation.seed=" << c.evaluation_seed()
     << "\nevaluation.steps=" << c.eval_steps << "\n"
     << "region.betas=" << detail::join_doubles(c.region_betas) << "\nregion.delay=" << c.region_delay
     << "\nregion.every=" << c.region_every << "\nregion.runs=" << c.region_runs << "\n"
     << "training.batch=" << t.batch << "\ntraining.buffer=" << t.buffer_capacity
     << "\ntraining.episodes=" << c.episode_count() << "\ntraining.gamma=" << format_double(t.gamma)
     << "\ntraining.hidden_layers=" << t.hidden_layers << "\ntraining.hidden_width=" << t.hidden_width
     << "\ntraining.learning_rate=" << format_double(t.learning_rate)
     << "\ntraining.noise_variance=" << format_double(t.noise_variance) << "\ntraining.steps=" << t.steps
     << "\ntraining.tau=" << format_double(t.tau) << "\n";
  return os.str();
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(canonical_config(c))));
  return buf;
}

// ------------------------------------------------------------- schemes

/// Per-draw outcome of a non-learning scheme. Precoders come from the
/// estimate, rates from the true channel.
inline StepOutcome benchmark_outcome(Scheme s, const ChannelRealization& ch, const EstimatedChannels& est,
                                     const std::array<double, 2>& power, double beta) {
  StepOutcome out;
  switch (s) {
    case Scheme::mrt:
    case Scheme::zf:
    case Scheme::slnr: {
      const BenchmarkScheme b = s == Scheme::mrt ? BenchmarkScheme::mrt
                                : s == Scheme::zf ? BenchmarkScheme::zf
                                                  : BenchmarkScheme::slnr;
      const CMatrix w1 = benchmark_precoder(b, est, 0, power[0]);
      const CMatrix w2 = benchmark_precoder(b, est, 1, power[1]);
      out.report = no_rs_rates(ch, w1, w2, beta);
      break;
    }
    case Scheme::upper_bound: {
      const BoundReport b = mimo_outer_bound(ch, power[0], power[1], beta);
      // The sum column carries the sum-rate bound, the reward the weighted bound.
      out.report.user = {b.r1_max, b.sum_max - b.r1_max};
      out.report.reward = b.weighted_max;
      break;
    }
    case Scheme::no_interference: {
      const CMatrix w1 = benchmark_precoder(BenchmarkScheme::mrt, ch, 0, power[0]);
      const CMatrix w2 = benchmark_precoder(BenchmarkScheme::mrt, ch, 1, power[1]);
      const auto [r1, r2] = no_interference_rates(ch, w1, w2);
      out.report.user = {r1, r2};
      out.report.priv = {r1, r2};
      out.report.reward = beta * r1 + (1.0 - beta) * r2;
      break;
    }
    default: throw ConfigError("benchmark_outcome: learning scheme");
  }
  out.reward = out.report.reward;
  return out;
}

// --------------------------------------------------------------- output

inline std::filesystem::path checkpoint_dir(const ExperimentConfig& c, Scheme s, double snr) {
  return c.outdir / std::string(to_string(s)) / detail::format_double(snr) / std::to_string(c.seed);
}

struct SweepRow {
  double snr_db = 0.0;
  Scheme scheme = Scheme::mrt;
  double mean_sum_rate = 0.0;
  double std = 0.0;
  double mean_reward = 0.0;
  std::size_t n_runs = 0;
  std::size_t n_steps = 0;
};

inline constexpr std::string_view kSweepHeader =
    "snr_db,scheme,mean_sum_rate,std,n_runs,n_steps,order_source,csit_mode,seed,config_hash";

inline void write_sweep_csv(std::ostream& os, const ExperimentConfig& c, const std::vector<SweepRow>& rows) {
  const std::string hash = config_hash(c);
  os << kSweepHeader << "\n";
  for (const auto& r : rows) {
    os << detail::format_double(r.snr_db) << "," << to_string(r.scheme) << "," << detail::format_double(r.mean_sum_rate)
       << "," << detail::format_double(r.std) << "," << r.n_runs << "," << r.n_steps << ","
       << (r.scheme == Scheme::maddpg_rs ? to_string(c.order_source) : std::string_view("none")) << ","
       << to_string(c.csit) << "," << c.seed << "," << hash << "\n";
  }
}

inline constexpr std::string_view kTraceHeader =
    "episode,mean_reward,mean_sum_rate,critic_loss_1,critic_loss_2,actor_grad_norm_1,actor_grad_norm_2,"
    "bound_sum_rate";

inline void write_trace_row(std::ostream& os, const TraceRow& r) {
  using detail::format_double;
  os << r.episode << "," << format_double(r.mean_reward) << "," << format_double(r.mean_sum_rate) << ","
     << format_double(r.critic_loss[0]) << "," << format_double(r.critic_loss[1]) << ","
     << format_double(r.actor_grad_norm[0]) << "," << format_double(r.actor_grad_norm[1]) << ","
     << format_double(r.bound_sum_rate) << "\n";
}

inline void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << kTraceHeader << "\n";
  for (const auto& r : trace) write_trace_row(os, r);
}

// ---------------------------------------------------------------- runs

/// Worker count from RSMA_WORKERS (default 1).
inline std::size_t worker_count() {
  if (const char* v = std::getenv("RSMA_WORKERS")) {
    try {
      const unsigned long n = std::stoul(v);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

namespace detail {
template <class F>
void run_parallel(std::size_t n, std::size_t workers, F&& job) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t k = 0; k < n; ++k) job(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) {
        try {
          job(k);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}
}  // namespace detail

/// Trains (or reloads) a learning scheme for one SNR, writes its trace and
/// checkpoints, and returns the system.
inline MaddpgSystem obtain_policy(const ExperimentConfig& c, Scheme s, double snr) {
  const MaddpgConfig mc = c.make_training(snr, s == Scheme::maddpg_rs);
  const auto dir = checkpoint_dir(c, s, snr);
  if (c.reuse_checkpoints && std::filesystem::exists(dir / "agent1_precoder.ckpt")) {
    return load_checkpoints(mc, dir);
  }
  TrainResult tr = train(mc);
  save_checkpoints(tr.system, dir);
  write_trace_csv(dir / "trace.csv", tr.trace);
  return std::move(tr.system);
}

/// One (scheme, snr) evaluation; all cells share the same paired draws.
inline SweepRow run_cell(const ExperimentConfig& c, Scheme s, double snr) {
  const EvalSpec spec = c.make_eval(snr);
  EvalResult r;
  if (is_learning(s)) {
    const MaddpgSystem sys = obtain_policy(c, s, snr);
    r = evaluate(sys, spec);
  } else {
    const std::array<double, 2> power = c.training.power;
    r = evaluate_outcomes(c.antennas, spec, [&](const ChannelRealization& ch, const EstimatedChannels& est) {
      return benchmark_outcome(s, ch, est, power, c.beta);
    });
  }
  return {snr, s, r.mean_sum_rate, r.std_sum_rate, r.mean_reward, spec.runs, spec.steps};
}

inline std::vector<SweepRow> run_sweep(const ExperimentConfig& c, std::size_t workers = worker_count()) {
  c.validate();
  std::vector<std::pair<double, Scheme>> cells;
  for (double snr : c.snr_db)
    for (Scheme s : c.schemes) cells.emplace_back(snr, s);
  std::vector<SweepRow> rows(cells.size());
  detail::run_parallel(cells.size(), workers, [&](std::size_t k) {
    rows[k] = run_cell(c, cells[k].second, cells[k].first);
  });
  std::filesystem::create_directories(c.outdir);
  std::ofstream os(c.outdir / "sweep.csv", std::ios::trunc);
  if (!os) throw ConfigError("cannot write " + (c.outdir / "sweep.csv").string());
  write_sweep_csv(os, c, rows);
  return rows;
}

struct ConvergenceResult {
  Scheme scheme = Scheme::maddpg_rs;
  double snr_db = 0.0;
  std::vector<TraceRow> trace;
  double bound_line = 0.0;  // mean paired bound sum-rate over the whole run
  EvalResult band;          // post-training confidence band
};

/// Per-episode learning trace of every learning scheme at every SNR, plus
/// the constant bound line and a post-training mean +- std band.
inline std::vector<ConvergenceResult> run_convergence(const ExperimentConfig& c,
                                                      std::size_t workers = worker_count()) {
  c.validate();
  std::vector<std::pair<double, Scheme>> cells;
  for (double snr : c.snr_db)
    for (Scheme s : c.schemes)
      if (is_learning(s)) cells.emplace_back(snr, s);
  if (cells.empty()) throw ConfigError("run_convergence needs maddpg_rs or maddpg_nors in schemes");
  std::vector<ConvergenceResult> out(cells.size());
  detail::run_parallel(cells.size(), workers, [&](std::size_t k) {
    const auto [snr, s] = cells[k];
    MaddpgConfig mc = c.make_training(snr, s == Scheme::maddpg_rs);
    mc.track_bound = true;
    TrainResult tr = train(mc);
    ConvergenceResult& r = out[k];
    r.scheme = s;
    r.snr_db = snr;
    for (const auto& row : tr.trace) r.bound_line += row.bound_sum_rate / static_cast<double>(tr.trace.size());
    r.band = evaluate(tr.system, c.make_eval(snr));
    save_checkpoints(tr.system, checkpoint_dir(c, s, snr));
    r.trace = std::move(tr.trace);
  });

  std::filesystem::create_directories(c.outdir);
  const std::string hash = config_hash(c);
  std::ofstream os(c.outdir / "convergence.csv", std::ios::trunc);
  os << "scheme,snr_db," << kTraceHeader << ",bound_line,seed,config_hash\n";
  for (const auto& r : out) {
    for (const auto& row : r.trace) {
      std::ostringstream line;
      write_trace_row(line, row);
      std::string text = line.str();
      text.pop_back();
      os << to_string(r.scheme) << "," << detail::format_double(r.snr_db) << "," << text << ","
         << detail::format_double(r.bound_line) << "," << c.seed << "," << hash << "\n";
    }
  }
  std::ofstream band(c.outdir / "confidence.csv", std::ios::trunc);
  band << "scheme,snr_db,mean_sum_rate,std,band_low,band_high,n_runs,n_steps,seed,config_hash\n";
  for (const auto& r : out) {
    band << to_string(r.scheme) << "," << detail::format_double(r.snr_db) << ","
         << detail::format_double(r.band.mean_sum_rate) << "," << detail::format_double(r.band.std_sum_rate) << ","
         << detail::format_double(r.band.band_low()) << "," << detail::format_double(r.band.band_high()) << ","
         << c.eval_runs << "," << c.eval_steps << "," << c.seed << "," << hash << "\n";
  }
  return out;
}

struct RegionPoint {
  double beta = 0.5;
  std::size_t episode = 0;
  double r1 = 0.0;
  double r2 = 0.0;
};

/// For every beta: trains maddpg_rs at the first SNR and logs the evaluated
/// (R1, R2) every `region.every` episodes once `region.delay` have passed.
inline std::vector<RegionPoint> run_rate_region(const ExperimentConfig& c, std::size_t workers = worker_count()) {
  c.validate();
  const double snr = c.snr_db.front();
  std::vector<std::vector<RegionPoint>> per_beta(c.region_betas.size());
  detail::run_parallel(c.region_betas.size(), workers, [&](std::size_t k) {
    ExperimentConfig ck = c;
    ck.beta = c.region_betas[k];
    MaddpgConfig mc = ck.make_training(snr, true);
    mc.track_bound = false;
    EvalSpec spec = ck.make_eval(snr);
    spec.runs = c.region_runs;
    train(mc, [&](const TraceRow& row, const MaddpgSystem& sys) {
      if (row.episode <= c.region_delay || (row.episode - c.region_delay) % c.region_every != 0) return;
      const EvalResult r = evaluate(sys, spec);
      per_beta[k].push_back({ck.beta, row.episode, r.mean_user[0], r.mean_user[1]});
    });
  });
  std::vector<RegionPoint> out;
  for (auto& v : per_beta) out.insert(out.end(), v.begin(), v.end());

  std::filesystem::create_directories(c.outdir);
  const std::string hash = config_hash(c);
  std::ofstream os(c.outdir / "region.csv", std::ios::trunc);
  os << "beta,episode,r1,r2,snr_db,seed,config_hash\n";
  for (const auto& p : out) {
    os << detail::format_double(p.beta) << "," << p.episode << "," << detail::format_double(p.r1) << ","
       << detail::format_double(p.r2) << "," << detail::format_double(snr) << "," << c.seed << "," << hash << "\n";
  }
  return out;
}

}  // namespace rsma
