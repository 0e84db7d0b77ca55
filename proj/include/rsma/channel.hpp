#pragma once

// Two-user MIMO interference channel: antenna configuration, fading draws,
// the SNR convention and the two imperfect-CSIT error models.
//
// Indexing convention used across the library: user/transmitter index
// i in {0, 1}, j = 1 - i.
//   direct[i] : BS_i -> UE_i,  N_i x M_i
//   cross[i]  : BS_i -> UE_j,  N_j x M_i   (interference caused by BS_i)

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

#include "rsma/errors.hpp"
#include "rsma/linalg.hpp"
#include "rsma/random.hpp"

namespace rsma {

inline constexpr std::size_t other(std::size_t i) noexcept { return 1 - i; }

struct AntennaConfig {
  std::array<std::size_t, 2> tx{1, 1};  // M_1, M_2
  std::array<std::size_t, 2> rx{1, 1};  // N_1, N_2

  static AntennaConfig symmetric(std::size_t m, std::size_t n) { return {{m, m}, {n, n}}; }

  /// Stream count Q_i = min(M_i, N_i).
  std::size_t streams(std::size_t i) const noexcept { return std::min(tx[i], rx[i]); }

  bool is_siso() const noexcept {
    return tx[0] == 1 && tx[1] == 1 && rx[0] == 1 && rx[1] == 1;
  }

  void validate() const {
    for (std::size_t i = 0; i < 2; ++i) {
      if (tx[i] == 0 || rx[i] == 0) throw ConfigError("antenna counts must be positive");
      if (tx[i] > 16 || rx[i] > 16) throw ConfigError("antenna counts above 16 are not supported");
    }
  }

  friend bool operator==(const AntennaConfig&, const AntennaConfig&) = default;
};

/// The four channel matrices plus the noise power they are used with.
struct ChannelMatrices {
  std::array<CMatrix, 2> direct;
  std::array<CMatrix, 2> cross;
  double noise_power = 1.0;

  AntennaConfig antennas() const {
    return {{direct[0].cols(), direct[1].cols()}, {direct[0].rows(), direct[1].rows()}};
  }

  void validate_shapes() const {
    for (std::size_t i = 0; i < 2; ++i) {
      const std::size_t j = other(i);
      if (cross[i].cols() != direct[i].cols() || cross[i].rows() != direct[j].rows()) {
        throw ShapeMismatch("channel: cross link shape inconsistent with direct links");
      }
    }
    if (!(noise_power > 0.0)) throw ShapeMismatch("channel: noise power must be positive");
  }

  friend bool operator==(const ChannelMatrices&, const ChannelMatrices&) = default;
};

/// The true fading draw. Rates are always computed from this.
struct ChannelRealization : ChannelMatrices {};

/// What the transmitters believe the channel is. Precoders and actions are
/// computed from this.
struct EstimatedChannels : ChannelMatrices {};

enum class CsitMode { none, fixed, snr_scaled };

inline std::string_view to_string(CsitMode m) {
  switch (m) {
    case CsitMode::none: return "none";
    case CsitMode::fixed: return "fixed";
    case CsitMode::snr_scaled: return "snr_scaled";
  }
  return "?";
}

inline CsitMode parse_csit_mode(std::string_view s) {
  if (s == "none" || s == "perfect") return CsitMode::none;
  if (s == "fixed") return CsitMode::fixed;
  if (s == "snr_scaled") return CsitMode::snr_scaled;
  throw ConfigError("unknown csit mode '" + std::string(s) + "' (none|fixed|snr_scaled)");
}

/// N0 = 10^(-snr_db/10): total transmit power is 1, so SNR = 1/N0.
inline double noise_power_from_snr_db(double snr_db) {
  if (!std::isfinite(snr_db)) throw ConfigError("snr_db must be finite");
  return std::pow(10.0, -snr_db / 10.0);
}

namespace detail {
inline CMatrix complex_normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  CMatrix m(rows, cols);
  for (auto& z : m.entries()) z = rng.complex_normal();
  return m;
}
}  // namespace detail

/// Draws H_1, G_1, H_2, G_2 (in that order) with i.i.d. CN(0,1) entries.
inline ChannelRealization sample_channel(const AntennaConfig& cfg, double snr_db, Rng& rng) {
  cfg.validate();
  ChannelRealization ch;
  ch.noise_power = noise_power_from_snr_db(snr_db);
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t j = other(i);
    ch.direct[i] = detail::complex_normal_matrix(cfg.rx[i], cfg.tx[i], rng);
    ch.cross[i] = detail::complex_normal_matrix(cfg.rx[j], cfg.tx[i], rng);
  }
  return ch;
}

/// Multiplier applied to a CN(0,1) draw for each error entry.
inline double estimation_error_scale(CsitMode mode, double noise_power) {
  switch (mode) {
    case CsitMode::none: return 0.0;
    case CsitMode::fixed: return std::pow(10.0, -0.6) / 5.0;
    case CsitMode::snr_scaled: return std::pow(1.0 / noise_power, -0.6) / 5.0;
  }
  return 0.0;
}

/// H~ = H + E, G~ = G + E^ with entries of E drawn as scale * CN(0,1).
/// Mode `none` returns an exact copy and consumes no randomness.
inline EstimatedChannels apply_estimation_error(const ChannelRealization& ch, CsitMode mode,
                                                Rng& rng) {
  EstimatedChannels est;
  static_cast<ChannelMatrices&>(est) = ch;
  if (mode == CsitMode::none) return est;
  const double scale = estimation_error_scale(mode, ch.noise_power);
  for (std::size_t i = 0; i < 2; ++i) {
    for (auto& z : est.direct[i].entries()) z += scale * rng.complex_normal();
    for (auto& z : est.cross[i].entries()) z += scale * rng.complex_normal();
  }
  return est;
}

inline EstimatedChannels perfect_estimate(const ChannelRealization& ch) {
  EstimatedChannels est;
  static_cast<ChannelMatrices&>(est) = ch;
  return est;
}

}  // namespace rsma
