#pragma once

// Quick invariant checks run by `rsma_cli selftest`.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rsma/bounds.hpp"
#include "rsma/channel.hpp"
#include "rsma/maddpg.hpp"
#include "rsma/mlp.hpp"
#include "rsma/precoders.hpp"
#include "rsma/random.hpp"
#include "rsma/rates.hpp"

namespace rsma::selftest {

struct Check {
  std::string name;
  bool passed = false;
  double worst = 0.0;
};

namespace detail {

inline PrecoderSet random_siso_precoders(Rng& rng) {
  PrecoderSet p;
  for (std::size_t i = 0; i < 2; ++i) {
    const double split = rng.uniform(0.0, 1.0);
    p.common[i] = CMatrix{{std::polar(std::sqrt(split), rng.uniform(0.0, 6.283185307179586))}};
    p.priv[i] = CMatrix{{std::polar(std::sqrt(1.0 - split), rng.uniform(0.0, 6.283185307179586))}};
  }
  return p;
}

// Scalar SINR chain for the SISO case.
inline double scalar_reward(const ChannelRealization& ch, const PrecoderSet& p, const DecodingOrderPair& o) {
  std::array<std::array<double, 2>, 2> common{};
  std::array<double, 2> priv{};
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t j = other(i);
    const double n0 = ch.noise_power;
    const double sc = std::norm(ch.direct[i](0, 0) * p.common[i](0, 0));
    const double sp = std::norm(ch.direct[i](0, 0) * p.priv[i](0, 0));
    const double xc = std::norm(ch.cross[j](0, 0) * p.common[j](0, 0));
    const double xp = std::norm(ch.cross[j](0, 0) * p.priv[j](0, 0));
    double own_c = 0.0, other_c = 0.0;
    if (o.eta[i] == 1) {
      other_c = std::log2(1.0 + xc / (n0 + sc + sp + xp));
      own_c = std::log2(1.0 + sc / (n0 + sp + xp));
    } else {
      own_c = std::log2(1.0 + sc / (n0 + xc + sp + xp));
      other_c = std::log2(1.0 + xc / (n0 + sp + xp));
    }
    priv[i] = std::log2(1.0 + sp / (n0 + xp));
    common[i][i] = own_c;
    common[j][i] = other_c;
  }
  const double r1 = std::min(common[0][0], common[0][1]) + priv[0];
  const double r2 = std::min(common[1][0], common[1][1]) + priv[1];
  return 0.5 * r1 + 0.5 * r2;
}

}  // namespace detail

inline Check siso_rate_chain(std::size_t draws, std::uint64_t seed) {
  Check c{"siso rates match scalar SINR chain", true, 0.0};
  Rng rng(seed);
  for (std::size_t n = 0; n < draws; ++n) {
    const auto ch = sample_channel(AntennaConfig{}, rng.uniform(-5.0, 25.0), rng);
    const auto p = detail::random_siso_precoders(rng);
    for (const auto& o : kAllOrderPairs) {
      const double err = std::abs(rate_report(ch, p, o, 0.5).reward - detail::scalar_reward(ch, p, o));
      c.worst = std::max(c.worst, err);
    }
  }
  c.passed = c.worst <= 1e-12;
  return c;
}

inline Check reduction_identity(std::size_t draws, std::uint64_t seed) {
  Check c{"zero common power reduces to interference-as-noise", true, 0.0};
  Rng rng(seed);
  const auto cfg = AntennaConfig::symmetric(3, 2);
  for (std::size_t n = 0; n < draws; ++n) {
    const auto ch = sample_channel(cfg, 10.0, rng);
    PrecoderSet p;
    for (std::size_t i = 0; i < 2; ++i) {
      p.common[i] = CMatrix(3, 2);
      p.priv[i] = benchmark_precoder(BenchmarkScheme::mrt, ch, i, 1.0);
    }
    const double a = rate_report(ch, p, kAllOrderPairs[n % 4], 0.5).reward;
    const double b = no_rs_rates(ch, p.priv[0], p.priv[1], 0.5).reward;
    c.worst = std::max(c.worst, std::abs(a - b));
  }
  c.passed = c.worst <= 1e-10;
  return c;
}

inline Check bound_dominance(std::size_t draws, std::uint64_t seed) {
  Check c{"outer bound dominates benchmark and random rate-splitting rates", true, 0.0};
  Rng rng(seed);
  c.worst = -1e300;
  for (std::size_t n = 0; n < draws; ++n) {
    const auto ch = sample_channel(AntennaConfig{}, 10.0 * static_cast<double>(n % 3), rng);
    const double bound = mimo_outer_bound(ch, 1.0, 1.0, 0.5).weighted_max;
    const auto p = detail::random_siso_precoders(rng);
    double best = best_order_report(ch, p, 0.5).second.reward;
    for (auto s : {BenchmarkScheme::mrt, BenchmarkScheme::zf, BenchmarkScheme::slnr}) {
      const CMatrix w1 = benchmark_precoder(s, ch, 0, 1.0);
      const CMatrix w2 = benchmark_precoder(s, ch, 1, 1.0);
      best = std::max(best, no_rs_rates(ch, w1, w2, 0.5).reward);
    }
    c.worst = std::max(c.worst, best - bound);
  }
  c.passed = c.worst <= 1e-6;
  return c;
}

inline Check mlp_gradient(std::uint64_t seed) {
  Check c{"network gradients match central differences", true, 0.0};
  Rng rng(seed);
  const Mlp net = Mlp::initialized({6, 16, 16, 3}, Activation::tanh, Activation::sigmoid, rng);
  Eigen::MatrixXd x(6, 1);
  for (Eigen::Index r = 0; r < 6; ++r) x(r, 0) = rng.normal();
  const Eigen::MatrixXd w = Eigen::MatrixXd::Ones(3, 1);
  Mlp::Cache cache;
  net.forward(x, &cache);
  const MlpGradients g = net.backward(cache, w);
  const double h = 1e-5;
  for (Eigen::Index r = 0; r < 6; ++r) {
    Eigen::MatrixXd xp = x, xm = x;
    xp(r, 0) += h;
    xm(r, 0) -= h;
    const double fd = (net.forward(xp).sum() - net.forward(xm).sum()) / (2 * h);
    c.worst = std::max(c.worst, std::abs(fd - g.input(r, 0)) / std::max(1e-8, std::abs(fd) + std::abs(g.input(r, 0))));
  }
  c.passed = c.worst <= 1e-4;
  return c;
}

inline Check power_feasibility(std::size_t draws, std::uint64_t seed) {
  Check c{"decoded actions satisfy the power constraints", true, 0.0};
  Rng rng(seed);
  MaddpgConfig cfg;
  cfg.antennas = AntennaConfig::symmetric(2, 2);
  Rng init = rng.split("init");
  const MaddpgSystem sys = make_system(cfg, init);
  for (std::size_t n = 0; n < draws; ++n) {
    const auto ch = sample_channel(cfg.antennas, 10.0, rng);
    const auto a1 = select_action(sys, 0, observation(ch, 0), true, rng);
    const auto a2 = select_action(sys, 1, observation(ch, 1), true, rng);
    if (!rsma_precoders(cfg, a1, a2).satisfies_power(cfg.power)) c.passed = false;
  }
  return c;
}

inline std::vector<Check> run_all(std::size_t draws = 200, std::uint64_t seed = 1) {
  return {siso_rate_chain(draws, seed), reduction_identity(draws, seed + 1), bound_dominance(draws, seed + 2),
          mlp_gradient(seed + 3), power_feasibility(draws, seed + 4)};
}

}  // namespace rsma::selftest
