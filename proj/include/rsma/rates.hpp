#pragma once

// Achievable rates of rate-splitting over the two-user interference channel.
//
// Each receiver decodes both common streams and its own private stream by
// successive interference cancellation, always treating the other user's
// private stream as noise. A stream decoded while the set U of streams is
// still undecoded (U includes the stream itself and the foreign private
// stream) gets
//
//   log2 det(N0 I + sum_{u in U} L_u L_u^H) - log2 det(N0 I + sum_{u in U\t} L_u L_u^H)
//
// with L_u the effective channel-precoder product of stream u at that
// receiver. Using differences of log-determinants avoids inverting the
// interference covariance.

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "rsma/channel.hpp"
#include "rsma/errors.hpp"
#include "rsma/linalg.hpp"

namespace rsma {

inline constexpr double kInvLn2 = 1.0 / std::numbers::ln2;

/// Common and private precoders of both transmitters (M_i x Q_i each).
struct PrecoderSet {
  std::array<CMatrix, 2> common;
  std::array<CMatrix, 2> priv;

  /// Per-stream (|w_kc|^2 + |w_kp|^2 <= P_i/Q_i) and total power checks.
  bool satisfies_power(const std::array<double, 2>& total_power, double tol = 1e-9) const {
    for (std::size_t i = 0; i < 2; ++i) {
      const std::size_t q = priv[i].cols();
      if (common[i].cols() != q || common[i].rows() != priv[i].rows()) return false;
      double total = 0.0;
      for (std::size_t k = 0; k < q; ++k) {
        const double s = common[i].column_squared_norm(k) + priv[i].column_squared_norm(k);
        if (s > total_power[i] / static_cast<double>(q) + tol) return false;
        total += s;
      }
      if (total > total_power[i] + tol) return false;
    }
    return true;
  }
};

/// eta_i = 1: receiver i decodes  b_jc -> b_ic -> b_ip  (order a)
/// eta_i = 0: receiver i decodes  b_ic -> b_jc -> b_ip  (order b)
struct DecodingOrderPair {
  std::array<int, 2> eta{0, 0};

  friend bool operator==(const DecodingOrderPair&, const DecodingOrderPair&) = default;
};

inline constexpr std::array<DecodingOrderPair, 4> kAllOrderPairs{
    DecodingOrderPair{{0, 0}}, DecodingOrderPair{{0, 1}}, DecodingOrderPair{{1, 0}},
    DecodingOrderPair{{1, 1}}};

/// Rates decoded at one receiver i, in bits per channel use.
struct ReceiverRates {
  double other_common = 0.0;  // b_jc
  double own_common = 0.0;    // b_ic
  double own_private = 0.0;   // b_ip
};

struct RateReport {
  std::array<double, 2> common{0.0, 0.0};   // R_1c, R_2c (after the minimum)
  std::array<double, 2> priv{0.0, 0.0};     // R_1p, R_2p
  std::array<double, 2> user{0.0, 0.0};     // R_1, R_2
  double reward = 0.0;                      // beta R_1 + (1 - beta) R_2
  /// per_receiver_common[i][m] = rate of b_ic decodable at receiver m.
  std::array<std::array<double, 2>, 2> per_receiver_common{};

  double sum_rate() const noexcept { return user[0] + user[1]; }
};

namespace detail {

inline CMatrix noise_covariance(std::size_t n, double n0) {
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = n0;
  return m;
}

// log2 det(base + extra) - log2 det(base), clamped at zero against rounding.
inline double rate_increment(const CMatrix& base, const CMatrix& extra) {
  const double r = (logdet_hpd(base + extra) - logdet_hpd(base)) * kInvLn2;
  return r > 0.0 ? r : 0.0;
}

}  // namespace detail

/// SIC rates at `receiver` for decoding-order flag `eta`.
inline ReceiverRates sic_rates_at_receiver(const ChannelRealization& ch, const PrecoderSet& p,
                                           std::size_t receiver, int eta) {
  const std::size_t i = receiver;
  const std::size_t j = other(i);
  enum Stream { kOtherCommon = 0, kOwnCommon = 1, kOwnPrivate = 2, kOtherPrivate = 3 };

  std::array<CMatrix, 4> cov{
      gram_outer(ch.cross[j] * p.common[j]), gram_outer(ch.direct[i] * p.common[i]),
      gram_outer(ch.direct[i] * p.priv[i]), gram_outer(ch.cross[j] * p.priv[j])};

  const std::array<Stream, 3> order = eta == 1
                                          ? std::array<Stream, 3>{kOtherCommon, kOwnCommon, kOwnPrivate}
                                          : std::array<Stream, 3>{kOwnCommon, kOtherCommon, kOwnPrivate};

  // Residual covariance is rebuilt from the still-undecoded streams at every
  // step rather than by subtraction.
  std::array<bool, 4> pending{true, true, true, true};
  std::array<double, 4> rate{};
  for (Stream s : order) {
    pending[s] = false;
    CMatrix residual = detail::noise_covariance(ch.direct[i].rows(), ch.noise_power);
    for (int u = 0; u < 4; ++u)
      if (pending[u]) residual += cov[u];
    rate[s] = detail::rate_increment(residual, cov[s]);
  }
  return {rate[kOtherCommon], rate[kOwnCommon], rate[kOwnPrivate]};
}

inline RateReport rate_report(const ChannelRealization& ch, const PrecoderSet& p,
                              const DecodingOrderPair& order, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  const ReceiverRates rx0 = sic_rates_at_receiver(ch, p, 0, order.eta[0]);
  const ReceiverRates rx1 = sic_rates_at_receiver(ch, p, 1, order.eta[1]);

  RateReport r;
  r.per_receiver_common[0] = {rx0.own_common, rx1.other_common};
  r.per_receiver_common[1] = {rx0.other_common, rx1.own_common};
  r.common[0] = std::min(r.per_receiver_common[0][0], r.per_receiver_common[0][1]);
  r.common[1] = std::min(r.per_receiver_common[1][0], r.per_receiver_common[1][1]);
  r.priv = {rx0.own_private, rx1.own_private};
  r.user = {r.common[0] + r.priv[0], r.common[1] + r.priv[1]};
  r.reward = beta * r.user[0] + (1.0 - beta) * r.user[1];
  return r;
}

/// Best of the four order pairs; ties keep the lexicographically smallest.
inline std::pair<DecodingOrderPair, RateReport> best_order_report(const ChannelRealization& ch,
                                                                  const PrecoderSet& p,
                                                                  double beta) {
  std::pair<DecodingOrderPair, RateReport> best{kAllOrderPairs[0],
                                                rate_report(ch, p, kAllOrderPairs[0], beta)};
  for (std::size_t k = 1; k < kAllOrderPairs.size(); ++k) {
    RateReport r = rate_report(ch, p, kAllOrderPairs[k], beta);
    if (r.reward > best.second.reward) best = {kAllOrderPairs[k], std::move(r)};
  }
  return best;
}

/// Treating interference as noise with single-part precoders W_1, W_2.
inline RateReport no_rs_rates(const ChannelRealization& ch, const CMatrix& w1, const CMatrix& w2,
                              double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in [0, 1]");
  const std::array<const CMatrix*, 2> w{&w1, &w2};
  RateReport r;
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t j = other(i);
    CMatrix interference = detail::noise_covariance(ch.direct[i].rows(), ch.noise_power);
    interference += gram_outer(ch.cross[j] * *w[j]);
    r.priv[i] = detail::rate_increment(interference, gram_outer(ch.direct[i] * *w[i]));
    r.user[i] = r.priv[i];
  }
  r.reward = beta * r.user[0] + (1.0 - beta) * r.user[1];
  return r;
}

enum class Regime { weak, mixed, strong };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::weak: return "weak";
    case Regime::mixed: return "mixed";
    case Regime::strong: return "strong";
  }
  return "?";
}

/// SISO interference regime from SNR_i = |h_i|^2 P_i / N0 and
/// INR_i = |g_j|^2 P_j / N0 (interference seen at receiver i).
inline Regime classify_regime(const ChannelMatrices& ch, double p1, double p2) {
  if (!ch.antennas().is_siso()) throw NotSisoError("classify_regime requires a SISO channel");
  const std::array<double, 2> power{p1, p2};
  std::array<double, 2> snr{}, inr{};
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t j = other(i);
    snr[i] = std::norm(ch.direct[i](0, 0)) * power[i] / ch.noise_power;
    inr[i] = std::norm(ch.cross[j](0, 0)) * power[j] / ch.noise_power;
  }
  if (inr[0] < snr[1] && inr[1] < snr[0]) return Regime::weak;
  if (inr[0] > snr[1] && inr[1] > snr[0]) return Regime::strong;
  return Regime::mixed;
}

}  // namespace rsma
