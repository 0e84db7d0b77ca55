#pragma once

// Capacity outer bound for the two-user MIMO interference channel and the
// trivial no-interference reference.
//
// The outer bound is the seven-inequality system
//   R1 <= a1,  R2 <= a2,  R1+R2 <= b3, b4, b5,  2R1+R2 <= b6,  R1+2R2 <= b7
// written in terms of SNR/INR weights rho and normalized channels. With an
// input covariance Q_i = c_i I every weighted Gram term satisfies
//   rho_ii Hbar_i Hbar_i^H = c_i H_i H_i^H / N0,
// where rho_ii = Tr(H_i Q_i H_i^H) / (N_i N0) and Hbar_i is H_i scaled to
// Tr(Hbar Hbar^H) = N_i. The code forms those products directly; `rho` is
// still reported.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <utility>

#include "rsma/channel.hpp"
#include "rsma/linalg.hpp"
#include "rsma/rates.hpp"

namespace rsma {

/// Input covariance used to evaluate the bound.
///  full_power: Q_i = P_i I. Since Tr(Q) <= P_i implies Q <= P_i I and every
///              term is monotone in Q, this keeps the system an outer bound
///              for any feasible precoder.
///  isotropic:  Q_i = (P_i / M_i) I. Equal to full_power when M_i = 1.
enum class BoundCovariance { full_power, isotropic };

inline std::string_view to_string(BoundCovariance c) {
  return c == BoundCovariance::full_power ? "full_power" : "isotropic";
}

inline BoundCovariance parse_bound_covariance(std::string_view s) {
  if (s == "full_power") return BoundCovariance::full_power;
  if (s == "isotropic") return BoundCovariance::isotropic;
  throw ConfigError("unknown bound covariance '" + std::string(s) + "' (full_power|isotropic)");
}

struct BoundReport {
  /// Right-hand sides: R1, R2, three sum-rate bounds, 2R1+R2, R1+2R2.
  std::array<double, 7> rhs{};
  std::array<double, 2> rho_direct{};  // rho_11, rho_22
  std::array<double, 2> rho_cross{};   // rho_12 (BS1 -> UE2), rho_21
  double r1_max = 0.0;
  double r2_max = 0.0;
  double sum_max = 0.0;
  double beta = 0.5;
  double weighted_max = 0.0;
};

namespace detail {

struct Halfplane {
  double a, b, c;  // a R1 + b R2 <= c
};

inline std::array<Halfplane, 9> bound_halfplanes(const std::array<double, 7>& rhs) {
  return {{{1, 0, rhs[0]},
           {0, 1, rhs[1]},
           {1, 1, rhs[2]},
           {1, 1, rhs[3]},
           {1, 1, rhs[4]},
           {2, 1, rhs[5]},
           {1, 2, rhs[6]},
           {-1, 0, 0.0},
           {0, -1, 0.0}}};
}

}  // namespace detail

/// max w1 R1 + w2 R2 over the bound polytope, by vertex enumeration.
inline double maximize_over_bound(const std::array<double, 7>& rhs, double w1, double w2) {
  const auto hp = detail::bound_halfplanes(rhs);
  const double tol = 1e-12 * (1.0 + *std::max_element(rhs.begin(), rhs.end()));
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < hp.size(); ++p)
    for (std::size_t q = p + 1; q < hp.size(); ++q) {
      const double det = hp[p].a * hp[q].b - hp[p].b * hp[q].a;
      if (det == 0.0) continue;
      const double x = (hp[p].c * hp[q].b - hp[p].b * hp[q].c) / det;
      const double y = (hp[p].a * hp[q].c - hp[p].c * hp[q].a) / det;
      bool feasible = true;
      for (const auto& h : hp) {
        if (h.a * x + h.b * y > h.c + tol) {
          feasible = false;
          break;
        }
      }
      if (feasible) best = std::max(best, w1 * x + w2 * y);
    }
  return best;
}

inline double weighted_max(const BoundReport& b, double beta) {
  return maximize_over_bound(b.rhs, beta, 1.0 - beta);
}

inline BoundReport mimo_outer_bound(const ChannelRealization& ch, double p1, double p2, double beta,
                                    BoundCovariance cov = BoundCovariance::full_power) {
  const std::array<double, 2> power{p1, p2};
  const double n0 = ch.noise_power;
  std::array<double, 2> c{};
  for (std::size_t i = 0; i < 2; ++i) {
    c[i] = cov == BoundCovariance::full_power
               ? power[i]
               : power[i] / static_cast<double>(ch.direct[i].cols());
  }

  BoundReport out;
  out.beta = beta;
  // Weighted Gram matrices in receiver space and K_i in transmitter space.
  std::array<CMatrix, 2> direct_gram, cross_gram, genie_gram;
  for (std::size_t i = 0; i < 2; ++i) {
    const CMatrix& h = ch.direct[i];
    const CMatrix& g = ch.cross[i];
    out.rho_direct[i] = c[i] * h.squared_norm() / (static_cast<double>(h.rows()) * n0);
    out.rho_cross[i] = c[i] * g.squared_norm() / (static_cast<double>(ch.direct[i].rows()) * n0);
    direct_gram[i] = gram_outer(h) * (c[i] / n0);  // N_i x N_i
    cross_gram[i] = gram_outer(g) * (c[i] / n0);   // N_j x N_j
    CMatrix k_inv = hermitian(g) * g * (c[i] / n0);
    for (std::size_t d = 0; d < k_inv.rows(); ++d) k_inv(d, d) += 1.0;
    const CMatrix k = inverse(k_inv);
    genie_gram[i] = h * k * hermitian(h) * (c[i] / n0);
  }

  auto log2det_plus_identity = [](const CMatrix& m) {
    CMatrix a = m;
    for (std::size_t d = 0; d < a.rows(); ++d) a(d, d) += 1.0;
    return logdet_hpd(a) * kInvLn2;
  };

  // Receiver 1 sees H1 (own) and G2 (from BS2); receiver 2 sees H2 and G1.
  const double a1 = log2det_plus_identity(direct_gram[0]);
  const double a2 = log2det_plus_identity(direct_gram[1]);
  const double rx2_full = log2det_plus_identity(cross_gram[0] + direct_gram[1]);
  const double rx1_full = log2det_plus_identity(cross_gram[1] + direct_gram[0]);
  const double rx1_genie = log2det_plus_identity(genie_gram[0]);
  const double rx2_genie = log2det_plus_identity(genie_gram[1]);
  const double rx1_cross_genie = log2det_plus_identity(cross_gram[1] + genie_gram[0]);
  const double rx2_cross_genie = log2det_plus_identity(cross_gram[0] + genie_gram[1]);

  out.rhs = {a1,
             a2,
             rx2_full + rx1_genie,
             rx1_full + rx2_genie,
             rx1_cross_genie + rx2_cross_genie,
             rx1_full + rx1_genie + rx2_cross_genie,
             rx2_full + rx2_genie + rx1_cross_genie};

  out.r1_max = maximize_over_bound(out.rhs, 1.0, 0.0);
  out.r2_max = maximize_over_bound(out.rhs, 0.0, 1.0);
  out.sum_max = maximize_over_bound(out.rhs, 1.0, 1.0);
  out.weighted_max = maximize_over_bound(out.rhs, beta, 1.0 - beta);
  return out;
}

/// Interference-free rates R_i = log2 det(I + H_i W_i W_i^H H_i^H / N0).
inline std::pair<double, double> no_interference_rates(const ChannelRealization& ch,
                                                       const CMatrix& w1, const CMatrix& w2) {
  const std::array<const CMatrix*, 2> w{&w1, &w2};
  std::array<double, 2> r{};
  for (std::size_t i = 0; i < 2; ++i) {
    CMatrix a = gram_outer(ch.direct[i] * *w[i]) * (1.0 / ch.noise_power);
    for (std::size_t d = 0; d < a.rows(); ++d) a(d, d) += 1.0;
    r[i] = logdet_hpd(a) * kInvLn2;
  }
  return {r[0], r[1]};
}

}  // namespace rsma
