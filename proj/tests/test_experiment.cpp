#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "rsma/experiment.hpp"

using namespace rsma;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is, "test.ini");
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("rsma_exp_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, ParsesAllSections) {
  const auto c = parse(R"(
[experiment]
seed = 7
schemes = maddpg_rs, mrt, upper_bound
snr_db = 0, 6.5
beta = 0.25
order_source = learned
fixed_order = 0, 1
csit = snr_scaled
outdir = /tmp/x
[antennas]
tx = 3, 2
rx = 1, 2
[training]
episodes = 40
batch = 32
buffer = 64
[evaluation]
runs = 3
steps = 10
[region]
betas = 0.1, 0.9
every = 5
)");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_TRUE(c.seed_set);
  EXPECT_EQ(c.schemes, (std::vector<Scheme>{Scheme::maddpg_rs, Scheme::mrt, Scheme::upper_bound}));
  EXPECT_EQ(c.snr_db, (std::vector<double>{0.0, 6.5}));
  EXPECT_EQ(c.beta, 0.25);
  EXPECT_EQ(c.order_source, OrderSource::learned);
  EXPECT_EQ(c.fixed_order, (DecodingOrderPair{{0, 1}}));
  EXPECT_EQ(c.csit, CsitMode::snr_scaled);
  EXPECT_EQ(c.antennas, (AntennaConfig{{3, 2}, {1, 2}}));
  EXPECT_EQ(c.episode_count(), 40u);
  EXPECT_EQ(c.training.batch, 32u);
  EXPECT_EQ(c.training.buffer_capacity, 64u);
  EXPECT_EQ(c.eval_runs, 3u);
  EXPECT_EQ(c.region_betas, (std::vector<double>{0.1, 0.9}));
  EXPECT_NO_THROW(c.validate());
  const MaddpgConfig m = c.make_training(6.5, true);
  EXPECT_EQ(m.snr_db, 6.5);
  EXPECT_EQ(m.episodes, 40u);
  EXPECT_EQ(m.gamma, 0.99);
}

TEST(Config, ErrorsNameTheField) {
  try {
    parse("[training]\nbatch = many\n");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("test.ini"), std::string::npos);
    EXPECT_NE(what.find("training.batch"), std::string::npos);
  }
  EXPECT_THROW(parse("[experiment]\nsnr = 3\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\nschemes = mrt, mmse\n"), ConfigError);
  EXPECT_THROW(parse("[antennas]\ntx = 1, 2, 3\n"), ConfigError);
  EXPECT_EQ(parse("[antennas]\ntx = 3\n").antennas.tx, (std::array<std::size_t, 2>{3, 3}));
  try {
    parse("[experiment]\nseed = 1\n[broken\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.ini:3"), std::string::npos);
  }
}

TEST(Config, SeedIsRequired) {
  EXPECT_THROW(parse("[experiment]\nschemes = mrt\n").validate(), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/file.ini"), ConfigError);
}

TEST(Config, DeskPresetAndOverrides) {
  auto c = parse("[experiment]\nseed = 1\npreset = desk\n");
  EXPECT_EQ(c.episode_count(), 600u);
  EXPECT_EQ(c.eval_runs, 10u);
  c = parse("[experiment]\nseed = 1\npreset = desk\n[training]\nepisodes = 9\n");
  EXPECT_EQ(c.episode_count(), 9u);
  EXPECT_THROW(parse("[experiment]\npreset = quick\n"), ConfigError);
}

TEST(Config, HashTracksResultRelevantFields) {
  auto a = parse("[experiment]\nseed = 1\nsnr_db = 0, 10\n");
  auto b = parse("[experiment]\nsnr_db = 0, 10\nseed = 1\n");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  apply_setting(b, "training.tau", "0.02");
  EXPECT_NE(config_hash(a), config_hash(b));
  apply_setting(b, "training.tau", "0.01");
  EXPECT_EQ(config_hash(a), config_hash(b));
  apply_setting(b, "experiment.outdir", "elsewhere");
  EXPECT_EQ(config_hash(a), config_hash(b));
}

TEST(Schemes, ParseAndNames) {
  for (Scheme s : kAllSchemes) EXPECT_EQ(parse_scheme(to_string(s)), s);
  EXPECT_TRUE(is_learning(Scheme::maddpg_nors));
  EXPECT_FALSE(is_learning(Scheme::slnr));
}

TEST(Schemes, BoundDominatesAndNoInterferenceDominatesMrt) {
  Rng rng(3);
  const auto cfg = AntennaConfig::symmetric(3, 1);
  for (int t = 0; t < 200; ++t) {
    const auto ch = sample_channel(cfg, 10.0, rng);
    const EstimatedChannels est{static_cast<const ChannelMatrices&>(ch)};
    const auto ub = benchmark_outcome(Scheme::upper_bound, ch, est, {1.0, 1.0}, 0.5);
    const auto ni = benchmark_outcome(Scheme::no_interference, ch, est, {1.0, 1.0}, 0.5);
    const auto mrt = benchmark_outcome(Scheme::mrt, ch, est, {1.0, 1.0}, 0.5);
    for (Scheme s : {Scheme::mrt, Scheme::zf, Scheme::slnr}) {
      EXPECT_LE(benchmark_outcome(s, ch, est, {1.0, 1.0}, 0.5).reward, ub.reward + 1e-6);
    }
    EXPECT_GE(ni.report.user[0], mrt.report.user[0] - 1e-12);
    EXPECT_GE(ni.report.user[1], mrt.report.user[1] - 1e-12);
  }
  EXPECT_THROW(benchmark_outcome(Scheme::maddpg_rs, sample_channel(cfg, 0.0, rng), {}, {1.0, 1.0}, 0.5),
               ConfigError);
}

TEST(Sweep, BenchmarkOnlyCsvIsDeterministic) {
  const auto dir = scratch("sweep");
  auto c = parse("[experiment]\nseed = 5\nschemes = mrt, zf, slnr, upper_bound, no_interference\nsnr_db = 0, 20\n"
                 "[evaluation]\nruns = 3\nsteps = 20\n");
  c.outdir = dir;
  const auto rows = run_sweep(c, 1);
  ASSERT_EQ(rows.size(), 10u);
  const std::string first = slurp(dir / "sweep.csv");
  run_sweep(c, 2);
  EXPECT_EQ(slurp(dir / "sweep.csv"), first);
  EXPECT_EQ(first.substr(0, kSweepHeader.size()), kSweepHeader);
  for (const auto& r : rows) {
    if (r.scheme == Scheme::mrt) {
      // SISO: every linear benchmark is the same precoder up to phase.
      for (const auto& o : rows) {
        if (o.snr_db == r.snr_db && (o.scheme == Scheme::zf || o.scheme == Scheme::slnr)) {
          EXPECT_NEAR(o.mean_sum_rate, r.mean_sum_rate, 1e-9);
        }
      }
    }
    if (r.scheme == Scheme::upper_bound) {
      for (const auto& o : rows) {
        if (o.snr_db == r.snr_db && o.scheme == Scheme::mrt) {
          EXPECT_GE(r.mean_sum_rate, o.mean_sum_rate);
        }
      }
    }
  }
  std::filesystem::remove_all(dir);
}

TEST(Sweep, LearningCellWritesTraceAndCheckpoints) {
  const auto dir = scratch("learn");
  auto c = parse("[experiment]\nseed = 2\nschemes = maddpg_rs, maddpg_nors\nsnr_db = 10\n"
                 "[training]\nepisodes = 2\nsteps = 4\nbatch = 4\nbuffer = 8\nhidden_width = 8\nhidden_layers = 2\n"
                 "[evaluation]\nruns = 2\nsteps = 5\n");
  c.outdir = dir;
  const auto rows = run_sweep(c, 1);
  ASSERT_EQ(rows.size(), 2u);
  const auto ckpt = checkpoint_dir(c, Scheme::maddpg_rs, 10.0);
  EXPECT_TRUE(std::filesystem::exists(ckpt / "agent1_precoder.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(ckpt / "agent2_power.ckpt"));
  EXPECT_FALSE(std::filesystem::exists(checkpoint_dir(c, Scheme::maddpg_nors, 10.0) / "agent1_power.ckpt"));
  const std::string trace = slurp(ckpt / "trace.csv");
  EXPECT_EQ(trace.substr(0, kTraceHeader.size()), kTraceHeader);

  c.reuse_checkpoints = true;
  const auto again = run_sweep(c, 1);
  EXPECT_EQ(again[0].mean_sum_rate, rows[0].mean_sum_rate);
  std::filesystem::remove_all(dir);
}

TEST(Sweep, LearnedOrderWithBothLearners) {
  const auto dir = scratch("learned");
  auto c = parse("[experiment]\nseed = 5\nschemes = maddpg_rs, maddpg_nors\nsnr_db = 10\norder_source = learned\n"
                 "[training]\nepisodes = 2\nsteps = 4\nbatch = 4\nbuffer = 8\nhidden_width = 8\nhidden_layers = 2\n"
                 "[evaluation]\nruns = 1\nsteps = 3\n");
  c.outdir = dir;
  const auto rows = run_sweep(c, 1);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(checkpoint_dir(c, Scheme::maddpg_rs, 10.0) / "agent1_order.ckpt"));
  EXPECT_FALSE(std::filesystem::exists(checkpoint_dir(c, Scheme::maddpg_nors, 10.0) / "agent1_order.ckpt"));
  std::filesystem::remove_all(dir);
}

TEST(Convergence, WritesTraceAndBand) {
  const auto dir = scratch("conv");
  auto c = parse("[experiment]\nseed = 3\nschemes = maddpg_rs, mrt\nsnr_db = 10\n"
                 "[training]\nepisodes = 2\nsteps = 4\nbatch = 4\nbuffer = 8\nhidden_width = 8\nhidden_layers = 2\n"
                 "[evaluation]\nruns = 2\nsteps = 5\n");
  c.outdir = dir;
  const auto out = run_convergence(c, 1);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].trace.size(), 2u);
  EXPECT_GT(out[0].bound_line, 0.0);
  EXPECT_TRUE(std::filesystem::exists(dir / "convergence.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "confidence.csv"));
  c.schemes = {Scheme::mrt};
  EXPECT_THROW(run_convergence(c, 1), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Region, LogsAfterDelay) {
  const auto dir = scratch("region");
  auto c = parse("[experiment]\nseed = 4\nsnr_db = 10\n"
                 "[training]\nepisodes = 4\nsteps = 3\nbatch = 2\nbuffer = 8\nhidden_width = 8\nhidden_layers = 2\n"
                 "[evaluation]\nsteps = 3\n[region]\nbetas = 0.5, 1\ndelay = 1\nevery = 2\nruns = 1\n");
  c.outdir = dir;
  const auto pts = run_rate_region(c, 1);
  ASSERT_EQ(pts.size(), 2u);  // episode 3 for each beta
  EXPECT_EQ(pts[0].episode, 3u);
  EXPECT_EQ(pts[1].beta, 1.0);
  EXPECT_TRUE(std::filesystem::exists(dir / "region.csv"));
  std::filesystem::remove_all(dir);
}
