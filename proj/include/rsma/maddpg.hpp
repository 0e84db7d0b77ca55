#pragma once

// Two-agent MADDPG for rate-splitting precoding.
//
// Agent i observes O_i = [Re H_i, Im H_i, Re G_i, Im G_i] (row-major) and
// owns two actor heads: a precoder head (tanh) and a power head (sigmoid).
// Its action vector is
//   a_i = [p_i1c .. p_iQc | for each stream k: Re u_kc, Im u_kc, Re u_kp, Im u_kp]
// (M_i entries per block). Without rate splitting only the precoder head
// exists and each stream carries a single direction (Re u_k, Im u_k).
//
// Each agent has its own centralized critic Q_i(s, a_1, a_2[, o]) where s is
// the concatenated observation and o the relaxed decoding-order output of
// the optional shared order head.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rsma/bounds.hpp"
#include "rsma/channel.hpp"
#include "rsma/errors.hpp"
#include "rsma/mlp.hpp"
#include "rsma/precoders.hpp"
#include "rsma/random.hpp"
#include "rsma/rates.hpp"

namespace rsma {

enum class OrderSource { exhaustive, learned, fixed };

inline std::string_view to_string(OrderSource s) {
  switch (s) {
    case OrderSource::exhaustive: return "exhaustive";
    case OrderSource::learned: return "learned";
    case OrderSource::fixed: return "fixed";
  }
  return "?";
}

inline OrderSource parse_order_source(std::string_view s) {
  if (s == "exhaustive") return OrderSource::exhaustive;
  if (s == "learned") return OrderSource::learned;
  if (s == "fixed") return OrderSource::fixed;
  throw ConfigError("unknown order source '" + std::string(s) + "' (exhaustive|learned|fixed)");
}

/// Episode counts used for full-length runs.
inline std::size_t default_episodes(const AntennaConfig& a) {
  if (a.is_siso()) return 2400;
  if (a.rx[0] == 1 && a.rx[1] == 1) return 4000;
  return 12000;
}

struct MaddpgConfig {
  AntennaConfig antennas{};
  double snr_db = 20.0;
  double beta = 0.5;
  std::array<double, 2> power{1.0, 1.0};
  bool rate_splitting = true;
  OrderSource order_source = OrderSource::exhaustive;
  DecodingOrderPair fixed_order{{1, 1}};
  CsitMode csit = CsitMode::none;

  std::size_t episodes = 2400;
  std::size_t steps = 200;
  double gamma = 0.99;
  std::size_t batch = 128;
  std::size_t buffer_capacity = 15000;
  double tau = 0.01;
  double noise_variance = 0.1;
  double learning_rate = 5e-5;
  std::size_t hidden_width = 64;
  std::size_t hidden_layers = 4;
  bool track_bound = true;

  std::uint64_t seed = 0;

  bool learned_order() const noexcept { return rate_splitting && order_source == OrderSource::learned; }

  std::size_t observation_dim(std::size_t i) const {
    return 2 * antennas.rx[i] * antennas.tx[i] + 2 * antennas.rx[other(i)] * antennas.tx[i];
  }
  std::size_t state_dim() const { return observation_dim(0) + observation_dim(1); }
  std::size_t precoder_dim(std::size_t i) const {
    return (rate_splitting ? 4 : 2) * antennas.tx[i] * antennas.streams(i);
  }
  std::size_t power_dim(std::size_t i) const { return rate_splitting ? antennas.streams(i) : 0; }
  std::size_t action_dim(std::size_t i) const { return power_dim(i) + precoder_dim(i); }
  std::size_t order_dim() const { return learned_order() ? 2 : 0; }
  std::size_t critic_input_dim() const {
    return state_dim() + action_dim(0) + action_dim(1) + order_dim();
  }

  void validate() const {
    antennas.validate();
    if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
    if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
    if (!(power[0] > 0.0 && power[1] > 0.0)) throw ConfigError("transmit powers must be positive");
    if (steps == 0) throw ConfigError("steps must be positive");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (batch == 0) throw ConfigError("batch must be positive");
    if (buffer_capacity < batch) throw ConfigError("buffer capacity must be at least the batch size");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
    if (!(noise_variance >= 0.0)) throw ConfigError("noise variance must be non-negative");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (hidden_width == 0 || hidden_layers == 0) throw ConfigError("hidden layers must be non-empty");
  }
};

// ---------------------------------------------------------------- codec

inline Eigen::VectorXd observation(const ChannelMatrices& ch, std::size_t i) {
  const CMatrix& h = ch.direct[i];
  const CMatrix& g = ch.cross[i];
  Eigen::VectorXd o(static_cast<Eigen::Index>(2 * h.entries().size() + 2 * g.entries().size()));
  Eigen::Index k = 0;
  for (const CMatrix* m : {&h, &g}) {
    for (const cplx& z : m->entries()) o(k++) = z.real();
    for (const cplx& z : m->entries()) o(k++) = z.imag();
  }
  return o;
}

inline Eigen::VectorXd full_state(const ChannelMatrices& ch) {
  const Eigen::VectorXd o1 = observation(ch, 0);
  const Eigen::VectorXd o2 = observation(ch, 1);
  Eigen::VectorXd s(o1.size() + o2.size());
  s << o1, o2;
  return s;
}

/// Threshold of the relaxed order output; ties round up.
inline DecodingOrderPair threshold_order(const Eigen::VectorXd& relaxed) {
  if (relaxed.size() != 2) throw ShapeMismatch("threshold_order: expected two outputs");
  return DecodingOrderPair{{relaxed(0) >= 0.5 ? 1 : 0, relaxed(1) >= 0.5 ? 1 : 0}};
}

namespace detail {

inline CMatrix read_directions(const Eigen::VectorXd& a, std::size_t offset, std::size_t m,
                               std::size_t q, std::size_t stride, std::size_t part) {
  CMatrix u(m, q);
  for (std::size_t k = 0; k < q; ++k) {
    const std::size_t base = offset + k * stride + part * 2 * m;
    for (std::size_t r = 0; r < m; ++r) {
      u(r, k) = cplx(a(static_cast<Eigen::Index>(base + r)), a(static_cast<Eigen::Index>(base + m + r)));
    }
  }
  return u;
}

}  // namespace detail

/// Splits and raw directions encoded in a rate-splitting action pair.
inline RsmaDirections decode_rsma_actions(const MaddpgConfig& cfg, const Eigen::VectorXd& a1,
                                          const Eigen::VectorXd& a2) {
  const std::array<const Eigen::VectorXd*, 2> a{&a1, &a2};
  RsmaDirections d;
  for (std::size_t i = 0; i < 2; ++i) {
    if (static_cast<std::size_t>(a[i]->size()) != cfg.action_dim(i)) {
      throw ShapeMismatch("decode_rsma_actions: action length");
    }
    const std::size_t m = cfg.antennas.tx[i];
    const std::size_t q = cfg.antennas.streams(i);
    d.split[i].resize(q);
    for (std::size_t k = 0; k < q; ++k) d.split[i][k] = (*a[i])(static_cast<Eigen::Index>(k));
    d.common[i] = detail::read_directions(*a[i], q, m, q, 4 * m, 0);
    d.priv[i] = detail::read_directions(*a[i], q, m, q, 4 * m, 1);
  }
  return d;
}

inline PrecoderSet rsma_precoders(const MaddpgConfig& cfg, const Eigen::VectorXd& a1,
                                  const Eigen::VectorXd& a2) {
  return normalize_rsma(decode_rsma_actions(cfg, a1, a2), cfg.power);
}

inline std::array<CMatrix, 2> no_rs_precoders(const MaddpgConfig& cfg, const Eigen::VectorXd& a1,
                                              const Eigen::VectorXd& a2) {
  const std::array<const Eigen::VectorXd*, 2> a{&a1, &a2};
  std::array<CMatrix, 2> w;
  for (std::size_t i = 0; i < 2; ++i) {
    if (static_cast<std::size_t>(a[i]->size()) != cfg.action_dim(i)) {
      throw ShapeMismatch("no_rs_precoders: action length");
    }
    const std::size_t m = cfg.antennas.tx[i];
    w[i] = normalize_no_rs(detail::read_directions(*a[i], 0, m, cfg.antennas.streams(i), 2 * m, 0),
                           cfg.power[i]);
  }
  return w;
}

// -------------------------------------------------------------- environment

struct StepOutcome {
  double reward = 0.0;
  RateReport report;
  DecodingOrderPair order;
};

/// Rates of the decoded actions on the true channel. `learned_order` is only
/// read when cfg.order_source == learned.
inline StepOutcome env_step(const MaddpgConfig& cfg, const ChannelRealization& ch_true,
                            const Eigen::VectorXd& a1, const Eigen::VectorXd& a2,
                            OrderSource source, const DecodingOrderPair& learned_order = {}) {
  StepOutcome out;
  if (!cfg.rate_splitting) {
    const auto w = no_rs_precoders(cfg, a1, a2);
    out.report = no_rs_rates(ch_true, w[0], w[1], cfg.beta);
  } else {
    const PrecoderSet p = rsma_precoders(cfg, a1, a2);
    switch (source) {
      case OrderSource::exhaustive: std::tie(out.order, out.report) = best_order_report(ch_true, p, cfg.beta); break;
      case OrderSource::learned:
        out.order = learned_order;
        out.report = rate_report(ch_true, p, learned_order, cfg.beta);
        break;
      case OrderSource::fixed:
        out.order = cfg.fixed_order;
        out.report = rate_report(ch_true, p, cfg.fixed_order, cfg.beta);
        break;
    }
  }
  out.reward = out.report.reward;
  return out;
}

// ------------------------------------------------------------------ replay

struct Transition {
  Eigen::VectorXd state;
  Eigen::VectorXd action[2];
  Eigen::VectorXd order;  // relaxed order output; empty without an order head
  double reward = 0.0;
  Eigen::VectorXd next_state;
  ChannelRealization channel;
  EstimatedChannels estimate;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay capacity must be positive");
    items_.reserve(capacity);
  }

  std::size_t size() const noexcept { return items_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t total_inserted() const noexcept { return inserted_; }

  void push(Transition t) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(t));
    } else {
      items_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
    ++inserted_;
  }

  /// Slot-ordered access; slot 0 is the oldest stored transition.
  const Transition& oldest(std::size_t k) const {
    const std::size_t start = items_.size() < capacity_ ? 0 : next_;
    return items_[(start + k) % items_.size()];
  }

  const Transition& at(std::size_t slot) const { return items_.at(slot); }

  /// k distinct slots, uniformly at random (Floyd's algorithm).
  std::vector<std::size_t> sample_indices(std::size_t k, Rng& rng) const {
    const std::size_t n = items_.size();
    if (k > n) throw BufferTooSmallError("replay buffer holds " + std::to_string(n) + " < " + std::to_string(k));
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    for (std::size_t j = n - k; j < n; ++j) {
      const std::size_t t = rng.index(j + 1);
      if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
        chosen.push_back(t);
      } else {
        chosen.push_back(j);
      }
    }
    return chosen;
  }

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::size_t inserted_ = 0;
  std::vector<Transition> items_;
};

// ------------------------------------------------------------------ agents

struct Trainable {
  Mlp online;
  Mlp target;
  AdamState adam;

  static Trainable make(const std::vector<std::size_t>& dims, Activation out, double lr, Rng& rng) {
    Trainable t;
    t.online = Mlp::initialized(dims, Activation::relu, out, rng);
    t.target = t.online;
    t.adam = AdamState::for_network(t.online, lr);
    return t;
  }
};

struct AgentBundle {
  Trainable precoder;
  std::optional<Trainable> power;
  Trainable critic;
};

struct MaddpgSystem {
  MaddpgConfig config;
  std::array<AgentBundle, 2> agents;
  std::optional<Trainable> order;  // shared, updated with agent 1
};

namespace detail {
inline std::vector<std::size_t> layer_dims(const MaddpgConfig& cfg, std::size_t in, std::size_t out) {
  std::vector<std::size_t> d{in};
  for (std::size_t k = 0; k < cfg.hidden_layers; ++k) d.push_back(cfg.hidden_width);
  d.push_back(out);
  return d;
}
}  // namespace detail

inline MaddpgSystem make_system(const MaddpgConfig& cfg, Rng& rng) {
  cfg.validate();
  MaddpgSystem sys;
  sys.config = cfg;
  for (std::size_t i = 0; i < 2; ++i) {
    auto& a = sys.agents[i];
    a.precoder = Trainable::make(detail::layer_dims(cfg, cfg.observation_dim(i), cfg.precoder_dim(i)),
                                 Activation::tanh, cfg.learning_rate, rng);
    if (cfg.rate_splitting) {
      a.power = Trainable::make(detail::layer_dims(cfg, cfg.observation_dim(i), cfg.power_dim(i)),
                                Activation::sigmoid, cfg.learning_rate, rng);
    }
    a.critic = Trainable::make(detail::layer_dims(cfg, cfg.critic_input_dim(), 1), Activation::linear,
                               cfg.learning_rate, rng);
  }
  if (cfg.learned_order()) {
    sys.order = Trainable::make(detail::layer_dims(cfg, cfg.state_dim(), 2), Activation::sigmoid,
                                cfg.learning_rate, rng);
  }
  return sys;
}

namespace detail {

inline Eigen::MatrixXd squash_with_noise(const Mlp& net, const Eigen::MatrixXd& x, double sd, Rng* rng) {
  Eigen::MatrixXd z = net.forward_pre_output(x);
  if (rng && sd > 0.0) {
    for (Eigen::Index c = 0; c < z.cols(); ++c)
      for (Eigen::Index r = 0; r < z.rows(); ++r) z(r, c) += rng->normal(0.0, sd);
  }
  return activate(net.output_activation(), z);
}

inline Eigen::MatrixXd policy_batch(const AgentBundle& a, const Eigen::MatrixXd& obs, bool target) {
  const Mlp& pre = target ? a.precoder.target : a.precoder.online;
  Eigen::MatrixXd dirs = pre.forward(obs);
  if (!a.power) return dirs;
  Eigen::MatrixXd pw = (target ? a.power->target : a.power->online).forward(obs);
  Eigen::MatrixXd out(pw.rows() + dirs.rows(), obs.cols());
  out << pw, dirs;
  return out;
}

}  // namespace detail

/// mu_phi(O_i), optionally with N(0, sigma_N^2) noise added before squashing.
inline Eigen::VectorXd select_action(const MaddpgSystem& sys, std::size_t i, const Eigen::VectorXd& obs,
                                     bool explore, Rng& rng) {
  const auto& a = sys.agents[i];
  if (static_cast<std::size_t>(obs.size()) != sys.config.observation_dim(i)) {
    throw ShapeMismatch("select_action: observation length");
  }
  const double sd = std::sqrt(sys.config.noise_variance);
  Rng* noise = explore ? &rng : nullptr;
  const Eigen::MatrixXd x = obs;
  Eigen::VectorXd pw;
  if (a.power) pw = detail::squash_with_noise(a.power->online, x, sd, noise).col(0);
  const Eigen::VectorXd dirs = detail::squash_with_noise(a.precoder.online, x, sd, noise).col(0);
  Eigen::VectorXd out(pw.size() + dirs.size());
  out << pw, dirs;
  return out;
}

/// Relaxed order output in (0, 1)^2 and its thresholded decoding order.
inline std::pair<DecodingOrderPair, Eigen::VectorXd> decode_order_action(const Mlp& order_head,
                                                                         const Eigen::VectorXd& state,
                                                                         bool explore, double noise_variance,
                                                                         Rng& rng) {
  const Eigen::VectorXd relaxed =
      detail::squash_with_noise(order_head, Eigen::MatrixXd(state), std::sqrt(noise_variance),
                                explore ? &rng : nullptr)
          .col(0);
  return {threshold_order(relaxed), relaxed};
}

// ----------------------------------------------------------------- updates

struct Minibatch {
  Eigen::MatrixXd state, next_state;
  std::array<Eigen::MatrixXd, 2> obs, next_obs, action;
  Eigen::MatrixXd order;
  Eigen::RowVectorXd reward;
};

inline Minibatch gather(const MaddpgConfig& cfg, const ReplayBuffer& buf, const std::vector<std::size_t>& idx) {
  const auto b = static_cast<Eigen::Index>(idx.size());
  const auto sd = static_cast<Eigen::Index>(cfg.state_dim());
  const auto o1 = static_cast<Eigen::Index>(cfg.observation_dim(0));
  Minibatch mb;
  mb.state.resize(sd, b);
  mb.next_state.resize(sd, b);
  mb.reward.resize(b);
  for (std::size_t i = 0; i < 2; ++i) mb.action[i].resize(static_cast<Eigen::Index>(cfg.action_dim(i)), b);
  mb.order.resize(static_cast<Eigen::Index>(cfg.order_dim()), b);
  for (Eigen::Index c = 0; c < b; ++c) {
    const Transition& t = buf.at(idx[static_cast<std::size_t>(c)]);
    mb.state.col(c) = t.state;
    mb.next_state.col(c) = t.next_state;
    mb.reward(c) = t.reward;
    for (std::size_t i = 0; i < 2; ++i) mb.action[i].col(c) = t.action[i];
    if (cfg.order_dim() > 0) mb.order.col(c) = t.order;
  }
  mb.obs[0] = mb.state.topRows(o1);
  mb.obs[1] = mb.state.bottomRows(sd - o1);
  mb.next_obs[0] = mb.next_state.topRows(o1);
  mb.next_obs[1] = mb.next_state.bottomRows(sd - o1);
  return mb;
}

namespace detail {
inline Eigen::MatrixXd critic_input(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a1,
                                    const Eigen::MatrixXd& a2, const Eigen::MatrixXd& o) {
  Eigen::MatrixXd x(s.rows() + a1.rows() + a2.rows() + o.rows(), s.cols());
  x << s, a1, a2, o;
  return x;
}
}  // namespace detail

namespace detail {
/// Target critics' input (s', mu'_1(O'_1), mu'_2(O'_2)[, o'(s')]).
inline Eigen::MatrixXd target_critic_input(const MaddpgSystem& sys, const Minibatch& mb) {
  const Eigen::MatrixXd a1 = policy_batch(sys.agents[0], mb.next_obs[0], true);
  const Eigen::MatrixXd a2 = policy_batch(sys.agents[1], mb.next_obs[1], true);
  const Eigen::MatrixXd o = sys.order ? sys.order->target.forward(mb.next_state)
                                      : Eigen::MatrixXd(0, mb.state.cols());
  return critic_input(mb.next_state, a1, a2, o);
}

inline Eigen::RowVectorXd td_targets(const MaddpgSystem& sys, std::size_t i, const Minibatch& mb,
                                     const Eigen::MatrixXd& next_input) {
  return mb.reward + sys.config.gamma * sys.agents[i].critic.target.forward(next_input).row(0);
}
}  // namespace detail

/// TD targets y = r + gamma Q'_i(s', mu'_1(O'_1), mu'_2(O'_2)[, o'(s')]).
inline Eigen::RowVectorXd td_targets(const MaddpgSystem& sys, std::size_t i, const Minibatch& mb) {
  return detail::td_targets(sys, i, mb, detail::target_critic_input(sys, mb));
}

/// One Adam step on each critic; returns the two MSE losses.
inline std::array<double, 2> critic_update(MaddpgSystem& sys, const Minibatch& mb) {
  const Eigen::MatrixXd x = detail::critic_input(mb.state, mb.action[0], mb.action[1], mb.order);
  const Eigen::MatrixXd next = detail::target_critic_input(sys, mb);
  std::array<Eigen::RowVectorXd, 2> y{detail::td_targets(sys, 0, mb, next), detail::td_targets(sys, 1, mb, next)};
  std::array<double, 2> loss{};
  for (std::size_t i = 0; i < 2; ++i) {
    auto& critic = sys.agents[i].critic;
    Mlp::Cache cache;
    const Eigen::MatrixXd q = critic.online.forward(x, &cache);
    auto [l, g] = mse_loss_and_grad(q.row(0), y[i]);
    loss[i] = l;
    adam_step(critic.online, critic.online.backward(cache, Eigen::MatrixXd(g)), critic.adam);
  }
  return loss;
}

/// Deterministic policy gradient step for both agents (and the order head
/// through agent 1's critic). Returns the actor gradient norms.
inline std::array<double, 2> actor_update(MaddpgSystem& sys, const Minibatch& mb) {
  const auto& cfg = sys.config;
  const Eigen::Index b = mb.state.cols();
  std::array<double, 2> norms{};
  for (std::size_t i = 0; i < 2; ++i) {
    auto& agent = sys.agents[i];
    Mlp::Cache pre_cache, pow_cache, ord_cache;
    const Eigen::MatrixXd dirs = agent.precoder.online.forward(mb.obs[i], &pre_cache);
    Eigen::MatrixXd own(static_cast<Eigen::Index>(cfg.action_dim(i)), b);
    const auto pd = static_cast<Eigen::Index>(cfg.power_dim(i));
    if (agent.power) {
      own.topRows(pd) = agent.power->online.forward(mb.obs[i], &pow_cache);
    }
    own.bottomRows(dirs.rows()) = dirs;

    const bool with_order = i == 0 && sys.order.has_value();
    const Eigen::MatrixXd order = with_order ? sys.order->online.forward(mb.state, &ord_cache) : mb.order;

    const Eigen::MatrixXd x = i == 0 ? detail::critic_input(mb.state, own, mb.action[1], order)
                                     : detail::critic_input(mb.state, mb.action[0], own, order);
    Mlp::Cache qc;
    agent.critic.online.forward(x, &qc);
    // Minimize -(1/B) sum Q.
    const Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(1, b, -1.0 / static_cast<double>(b));
    const Eigen::MatrixXd dx = agent.critic.online.backward(qc, dq, false).input;

    const Eigen::Index offset =
        static_cast<Eigen::Index>(cfg.state_dim() + (i == 0 ? 0 : cfg.action_dim(0)));
    const Eigen::MatrixXd da = dx.middleRows(offset, own.rows());

    double sq = 0.0;
    const MlpGradients gp = agent.precoder.online.backward(pre_cache, da.bottomRows(dirs.rows()));
    sq += std::pow(gradient_norm(gp), 2);
    adam_step(agent.precoder.online, gp, agent.precoder.adam);
    if (agent.power) {
      const MlpGradients gw = agent.power->online.backward(pow_cache, da.topRows(pd));
      sq += std::pow(gradient_norm(gw), 2);
      adam_step(agent.power->online, gw, agent.power->adam);
    }
    if (with_order) {
      const auto od = static_cast<Eigen::Index>(cfg.order_dim());
      const MlpGradients go = sys.order->online.backward(ord_cache, dx.bottomRows(od));
      adam_step(sys.order->online, go, sys.order->adam);
    }
    norms[i] = std::sqrt(sq);
  }
  return norms;
}

inline void soft_update_targets(MaddpgSystem& sys) {
  const double tau = sys.config.tau;
  for (auto& a : sys.agents) {
    soft_update(a.precoder.target, a.precoder.online, tau);
    if (a.power) soft_update(a.power->target, a.power->online, tau);
    soft_update(a.critic.target, a.critic.online, tau);
  }
  if (sys.order) soft_update(sys.order->target, sys.order->online, tau);
}

// ---------------------------------------------------------------- training

struct TraceRow {
  std::size_t episode = 0;
  double mean_reward = 0.0;
  double mean_sum_rate = 0.0;
  std::array<double, 2> critic_loss{};
  std::array<double, 2> actor_grad_norm{};
  double bound_sum_rate = 0.0;  // paired outer-bound sum-rate (0 when not tracked)
  std::size_t updates = 0;
};

struct TrainResult {
  MaddpgSystem system;
  std::vector<TraceRow> trace;
};

/// Samples one true channel and its transmitter-side estimate.
struct ChannelSource {
  AntennaConfig antennas;
  double snr_db;
  CsitMode csit;
  Rng channel_rng;
  Rng error_rng;

  std::pair<ChannelRealization, EstimatedChannels> next() {
    ChannelRealization ch = sample_channel(antennas, snr_db, channel_rng);
    EstimatedChannels est = apply_estimation_error(ch, csit, error_rng);
    return {std::move(ch), std::move(est)};
  }
};

/// Called after every episode with the trace row and the current system.
using EpisodeCallback = std::function<void(const TraceRow&, const MaddpgSystem&)>;

inline TrainResult train(const MaddpgConfig& cfg, const EpisodeCallback& on_episode = {}) {
  cfg.validate();
  Rng master(cfg.seed);
  Rng init_rng = master.split("init");
  Rng noise_rng = master.split("exploration");
  Rng replay_rng = master.split("replay");
  ChannelSource source{cfg.antennas, cfg.snr_db, cfg.csit, master.split("train-channel"),
                       master.split("train-csit")};

  TrainResult result{make_system(cfg, init_rng), {}};
  MaddpgSystem& sys = result.system;
  ReplayBuffer buffer(cfg.buffer_capacity);

  auto [ch, est] = source.next();
  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    TraceRow row;
    row.episode = e + 1;
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      Transition tr;
      tr.state = full_state(est);
      tr.action[0] = select_action(sys, 0, observation(est, 0), true, noise_rng);
      tr.action[1] = select_action(sys, 1, observation(est, 1), true, noise_rng);
      DecodingOrderPair eta = cfg.fixed_order;
      if (sys.order) {
        std::tie(eta, tr.order) = decode_order_action(sys.order->online, tr.state, true, cfg.noise_variance, noise_rng);
      }
      const StepOutcome out = env_step(cfg, ch, tr.action[0], tr.action[1], cfg.order_source, eta);
      tr.reward = out.reward;
      row.mean_reward += out.reward;
      row.mean_sum_rate += out.report.sum_rate();
      if (cfg.track_bound) row.bound_sum_rate += mimo_outer_bound(ch, cfg.power[0], cfg.power[1], cfg.beta).sum_max;

      auto next = source.next();
      tr.next_state = full_state(next.second);
      tr.channel = std::move(ch);
      tr.estimate = std::move(est);
      buffer.push(std::move(tr));
      ch = std::move(next.first);
      est = std::move(next.second);

      if (buffer.size() >= cfg.batch) {
        const Minibatch mb = gather(cfg, buffer, buffer.sample_indices(cfg.batch, replay_rng));
        const auto loss = critic_update(sys, mb);
        const auto norms = actor_update(sys, mb);
        soft_update_targets(sys);
        for (std::size_t i = 0; i < 2; ++i) {
          row.critic_loss[i] += loss[i];
          row.actor_grad_norm[i] += norms[i];
        }
        ++row.updates;
      }
    }
    const double steps = static_cast<double>(cfg.steps);
    row.mean_reward /= steps;
    row.mean_sum_rate /= steps;
    row.bound_sum_rate /= steps;
    if (row.updates > 0) {
      for (std::size_t i = 0; i < 2; ++i) {
        row.critic_loss[i] /= static_cast<double>(row.updates);
        row.actor_grad_norm[i] /= static_cast<double>(row.updates);
      }
    }
    if (on_episode) on_episode(row, sys);
    result.trace.push_back(row);
  }
  return result;
}

inline TrainResult train_no_rs(MaddpgConfig cfg, const EpisodeCallback& on_episode = {}) {
  cfg.rate_splitting = false;
  return train(cfg, on_episode);
}

// -------------------------------------------------------------- evaluation

struct PolicyDecision {
  Eigen::VectorXd action[2];
  std::optional<DecodingOrderPair> learned_order;
};

/// Exploration-free actions computed from the transmitters' estimate.
inline PolicyDecision act(const MaddpgSystem& sys, const ChannelMatrices& est) {
  Rng unused(0);
  PolicyDecision d;
  d.action[0] = select_action(sys, 0, observation(est, 0), false, unused);
  d.action[1] = select_action(sys, 1, observation(est, 1), false, unused);
  if (sys.order) d.learned_order = decode_order_action(sys.order->online, full_state(est), false, 0.0, unused).first;
  return d;
}

inline StepOutcome policy_outcome(const MaddpgSystem& sys, const ChannelRealization& ch,
                                  const EstimatedChannels& est, OrderSource source) {
  const PolicyDecision d = act(sys, est);
  if (sys.config.rate_splitting && source == OrderSource::learned && !d.learned_order) {
    throw ConfigError("learned decoding order requested but the system has no order head");
  }
  return env_step(sys.config, ch, d.action[0], d.action[1], source,
                  d.learned_order.value_or(sys.config.fixed_order));
}

struct EvalSpec {
  std::size_t runs = 25;
  std::size_t steps = 200;
  double snr_db = 20.0;
  CsitMode csit = CsitMode::none;
  std::uint64_t seed = 0;
};

struct EvalResult {
  double mean_reward = 0.0;
  double std_reward = 0.0;  // across per-run means
  double mean_sum_rate = 0.0;
  double std_sum_rate = 0.0;
  std::array<double, 2> mean_user{};
  std::vector<double> run_sum_rate;

  double band_low() const { return mean_sum_rate - std_sum_rate; }
  double band_high() const { return mean_sum_rate + std_sum_rate; }
};

/// Channel source for evaluation run `run`; identical for every scheme
/// evaluated with the same spec, which pairs their draws.
inline ChannelSource evaluation_source(const AntennaConfig& antennas, const EvalSpec& spec, std::size_t run) {
  Rng master(spec.seed);
  return {antennas, spec.snr_db, spec.csit, master.split("eval-channel", run), master.split("eval-csit", run)};
}

namespace detail {
inline double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}
}  // namespace detail

/// Generic paired Monte-Carlo evaluation of any per-draw policy.
inline EvalResult evaluate_outcomes(
    const AntennaConfig& antennas, const EvalSpec& spec,
    const std::function<StepOutcome(const ChannelRealization&, const EstimatedChannels&)>& outcome) {
  if (spec.runs == 0 || spec.steps == 0) throw ConfigError("evaluation needs at least one run and one step");
  EvalResult r;
  std::vector<double> run_reward;
  for (std::size_t run = 0; run < spec.runs; ++run) {
    ChannelSource src = evaluation_source(antennas, spec, run);
    double reward = 0.0, sum = 0.0;
    for (std::size_t t = 0; t < spec.steps; ++t) {
      auto [ch, est] = src.next();
      const StepOutcome o = outcome(ch, est);
      reward += o.reward;
      sum += o.report.sum_rate();
      r.mean_user[0] += o.report.user[0];
      r.mean_user[1] += o.report.user[1];
    }
    run_reward.push_back(reward / static_cast<double>(spec.steps));
    r.run_sum_rate.push_back(sum / static_cast<double>(spec.steps));
  }
  const double n = static_cast<double>(spec.runs);
  for (double x : run_reward) r.mean_reward += x / n;
  for (double x : r.run_sum_rate) r.mean_sum_rate += x / n;
  r.mean_user[0] /= n * static_cast<double>(spec.steps);
  r.mean_user[1] /= n * static_cast<double>(spec.steps);
  r.std_reward = detail::sample_std(run_reward, r.mean_reward);
  r.std_sum_rate = detail::sample_std(r.run_sum_rate, r.mean_sum_rate);
  return r;
}

inline EvalResult evaluate(const MaddpgSystem& sys, const EvalSpec& spec, std::optional<OrderSource> order = {}) {
  const OrderSource source = order.value_or(sys.config.order_source);
  return evaluate_outcomes(sys.config.antennas, spec, [&](const ChannelRealization& ch, const EstimatedChannels& est) {
    return policy_outcome(sys, ch, est, source);
  });
}

// -------------------------------------------------------------- checkpoints

/// Writes agent<i>_<head>.ckpt (i = 1, 2) for every online network. The
/// shared order head is stored with agent 1.
inline std::vector<std::filesystem::path> save_checkpoints(const MaddpgSystem& sys, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto put = [&](std::size_t agent, std::string_view head, const Mlp& net) {
    const auto p = dir / ("agent" + std::to_string(agent + 1) + "_" + std::string(head) + ".ckpt");
    checkpoint::save(p.string(), net);
    written.push_back(p);
  };
  for (std::size_t i = 0; i < 2; ++i) {
    put(i, "precoder", sys.agents[i].precoder.online);
    if (sys.agents[i].power) put(i, "power", sys.agents[i].power->online);
    put(i, "critic", sys.agents[i].critic.online);
  }
  if (sys.order) put(0, "order", sys.order->online);
  return written;
}

/// Restores a system for evaluation or further training (targets are set
/// to the online networks, optimizer states are fresh).
inline MaddpgSystem load_checkpoints(const MaddpgConfig& cfg, const std::filesystem::path& dir) {
  Rng rng(cfg.seed);
  MaddpgSystem sys = make_system(cfg, rng);
  auto get = [&](std::size_t agent, std::string_view head, Trainable& t) {
    const auto p = dir / ("agent" + std::to_string(agent + 1) + "_" + std::string(head) + ".ckpt");
    Mlp net = checkpoint::load(p.string());
    if (net.dims() != t.online.dims() || net.output_activation() != t.online.output_activation()) {
      throw CheckpointError("checkpoint " + p.string() + " does not match the configured architecture");
    }
    t.online = net;
    t.target = std::move(net);
    t.adam = AdamState::for_network(t.online, cfg.learning_rate);
  };
  for (std::size_t i = 0; i < 2; ++i) {
    get(i, "precoder", sys.agents[i].precoder);
    if (sys.agents[i].power) get(i, "power", *sys.agents[i].power);
    get(i, "critic", sys.agents[i].critic);
  }
  if (sys.order) get(0, "order", *sys.order);
  return sys;
}

}  // namespace rsma
