#pragma once

// Benchmark precoders (MRT, ZF, SLNR) and the maps that turn raw directions
// into power-feasible precoders.
//
// The benchmark routines return unnormalized directions of shape M_i x Q_i;
// normalize_no_rs() then scales each column to the per-stream budget
// P_i / Q_i. None of the benchmarks uses a common stream.

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "rsma/channel.hpp"
#include "rsma/errors.hpp"
#include "rsma/linalg.hpp"
#include "rsma/rates.hpp"

namespace rsma {

/// The channels one transmitter i knows: its direct link H_i (N_i x M_i)
/// and the link G_i (N_j x M_i) on which it interferes.
struct TransmitterView {
  const CMatrix& direct;
  const CMatrix& cross;
  double noise_power;

  std::size_t streams() const noexcept { return std::min(direct.rows(), direct.cols()); }
};

inline TransmitterView transmitter_view(const ChannelMatrices& ch, std::size_t i) {
  return {ch.direct[i], ch.cross[i], ch.noise_power};
}

enum class BenchmarkScheme { mrt, zf, slnr };

inline std::string_view to_string(BenchmarkScheme s) {
  switch (s) {
    case BenchmarkScheme::mrt: return "mrt";
    case BenchmarkScheme::zf: return "zf";
    case BenchmarkScheme::slnr: return "slnr";
  }
  return "?";
}

inline BenchmarkScheme parse_benchmark_scheme(std::string_view s) {
  if (s == "mrt") return BenchmarkScheme::mrt;
  if (s == "zf") return BenchmarkScheme::zf;
  if (s == "slnr") return BenchmarkScheme::slnr;
  throw ConfigError("unknown precoder '" + std::string(s) + "' (mrt|zf|slnr)");
}

/// W = H^H (first Q_i columns).
inline CMatrix mrt(const TransmitterView& v) {
  if (v.direct.squared_norm() == 0.0) throw ZeroChannelError("mrt: direct channel is zero");
  return hermitian(v.direct).leading_columns(v.streams());
}

/// W = (G^H G)^{-1} H^H. Throws SingularError when the Gram matrix fails
/// the kernel's condition threshold (always the case when M_i > N_j).
inline CMatrix zf(const TransmitterView& v) {
  const CMatrix gh = hermitian(v.cross);
  return solve(gh * v.cross, hermitian(v.direct)).leading_columns(v.streams());
}

inline constexpr double kZfRegularization = 1e-12;

/// W = (G^H G + delta I)^{-1} H^H.
///
/// For a wide G (M_i > N_j) the expression is evaluated through the
/// push-through identity
///   (G^H G + delta I)^{-1} = (I - G^H (G G^H + delta I)^{-1} G) / delta,
/// which only inverts the well-conditioned N_j x N_j matrix. As delta -> 0
/// the direction approaches the projection of H^H onto the null space of G.
inline CMatrix zf_regularized(const TransmitterView& v, double delta = kZfRegularization) {
  const CMatrix gh = hermitian(v.cross);
  const CMatrix hh = hermitian(v.direct);
  const std::size_t m = v.cross.cols();
  const std::size_t n = v.cross.rows();
  CMatrix w;
  if (m > n) {
    CMatrix inner = v.cross * gh;
    for (std::size_t k = 0; k < n; ++k) inner(k, k) += delta;
    w = hh - gh * solve(inner, v.cross * hh);
    w *= 1.0 / delta;
  } else {
    CMatrix gram = gh * v.cross;
    for (std::size_t k = 0; k < m; ++k) gram(k, k) += delta;
    w = solve(gram, hh);
  }
  return w.leading_columns(v.streams());
}

/// zf() with the regularized fallback; `regularized` reports which path ran.
inline CMatrix zf_with_fallback(const TransmitterView& v, bool* regularized = nullptr) {
  try {
    CMatrix w = zf(v);
    if (regularized) *regularized = false;
    return w;
  } catch (const SingularError&) {
    if (regularized) *regularized = true;
    return zf_regularized(v);
  }
}

/// Per-stream signal and leakage matrices for SLNR: signal is receive
/// antenna k of the intended user (row k of H_i), leakage is the whole cross
/// link G_i.
struct SlnrStreamMatrices {
  CMatrix signal;   // h_k^H h_k
  CMatrix leakage;  // N0 I + G^H G
};

inline SlnrStreamMatrices slnr_matrices(const TransmitterView& v, std::size_t k) {
  const CMatrix hk = v.direct.row(k);
  SlnrStreamMatrices s{hermitian(hk) * hk, hermitian(v.cross) * v.cross};
  for (std::size_t d = 0; d < s.leakage.rows(); ++d) s.leakage(d, d) += v.noise_power;
  return s;
}

inline double slnr_value(const TransmitterView& v, std::size_t k, const CMatrix& direction) {
  const auto s = slnr_matrices(v, k);
  return rayleigh_quotient(s.signal, s.leakage, direction);
}

/// Column k is the dominant generalized eigenvector of (h_k^H h_k, N0 I + G^H G).
inline CMatrix slnr(const TransmitterView& v) {
  const std::size_t q = v.streams();
  CMatrix w(v.direct.cols(), q);
  for (std::size_t k = 0; k < q; ++k) {
    const auto s = slnr_matrices(v, k);
    w.set_column(k, dominant_gen_eigvec(s.signal, s.leakage));
  }
  return w;
}

/// Scales every column to |w_k|^2 = P_i / Q_i.
inline CMatrix normalize_no_rs(const CMatrix& raw, double total_power) {
  CMatrix w = raw;
  const double per_stream = total_power / static_cast<double>(raw.cols());
  for (std::size_t k = 0; k < raw.cols(); ++k) {
    const double n2 = raw.column_squared_norm(k);
    if (!(n2 > 0.0)) throw ZeroDirectionError("normalize_no_rs: zero column");
    const double s = std::sqrt(per_stream / n2);
    for (std::size_t r = 0; r < raw.rows(); ++r) w(r, k) *= s;
  }
  return w;
}

/// Raw (unnormalized) rate-splitting action of both transmitters.
struct RsmaDirections {
  std::array<CMatrix, 2> common;          // u_ikc as columns, M_i x Q_i
  std::array<CMatrix, 2> priv;            // u_ikp as columns
  std::array<std::vector<double>, 2> split;  // p_ikc in [0, 1], Q_i entries
};

/// w_ikc = sqrt(P_ik p) u_ikc/|u_ikc|, w_ikp = sqrt(P_ik (1-p)) u_ikp/|u_ikp|,
/// with P_ik = P_i / Q_i.
inline PrecoderSet normalize_rsma(const RsmaDirections& raw, const std::array<double, 2>& total_power) {
  PrecoderSet out;
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t q = raw.priv[i].cols();
    if (raw.common[i].cols() != q || raw.common[i].rows() != raw.priv[i].rows() ||
        raw.split[i].size() != q) {
      throw ShapeMismatch("normalize_rsma: direction/split shapes disagree");
    }
    const double per_stream = total_power[i] / static_cast<double>(q);
    out.common[i] = CMatrix(raw.common[i].rows(), q);
    out.priv[i] = CMatrix(raw.priv[i].rows(), q);
    for (std::size_t k = 0; k < q; ++k) {
      const double p = raw.split[i][k];
      if (!(p >= 0.0 && p <= 1.0)) throw ShapeMismatch("normalize_rsma: split outside [0, 1]");
      const std::array<std::pair<const CMatrix*, CMatrix*>, 2> parts{
          std::pair{&raw.common[i], &out.common[i]}, std::pair{&raw.priv[i], &out.priv[i]}};
      const std::array<double, 2> power{per_stream * p, per_stream * (1.0 - p)};
      for (std::size_t part = 0; part < 2; ++part) {
        if (power[part] == 0.0) continue;
        const double n2 = parts[part].first->column_squared_norm(k);
        if (!(n2 > 0.0)) throw ZeroDirectionError("normalize_rsma: zero direction with power");
        const double s = std::sqrt(power[part] / n2);
        for (std::size_t r = 0; r < raw.priv[i].rows(); ++r) {
          (*parts[part].second)(r, k) = (*parts[part].first)(r, k) * s;
        }
      }
    }
  }
  return out;
}

/// Normalized benchmark precoder for transmitter i.
inline CMatrix benchmark_precoder(BenchmarkScheme scheme, const ChannelMatrices& ch, std::size_t i,
                                  double total_power, bool* zf_regularized = nullptr) {
  const TransmitterView v = transmitter_view(ch, i);
  switch (scheme) {
    case BenchmarkScheme::mrt: return normalize_no_rs(mrt(v), total_power);
    case BenchmarkScheme::zf: return normalize_no_rs(zf_with_fallback(v, zf_regularized), total_power);
    case BenchmarkScheme::slnr: return normalize_no_rs(slnr(v), total_power);
  }
  throw ConfigError("unknown benchmark scheme");
}

}  // namespace rsma
