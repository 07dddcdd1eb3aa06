#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "megsim/core.hpp"

namespace megsim {

enum class LinkKind { UL, DL, D2D };

inline std::string_view to_string(LinkKind k) {
  switch (k) {
    case LinkKind::UL: return "UL";
    case LinkKind::DL: return "DL";
    case LinkKind::D2D: return "D2D";
  }
  return "UL";
}

/**
 * AWGN link: SNR in dB, payload rate in bits/s, and which hop it models.
 * For digital transport the linear SNR is the per-bit energy ratio; for
 * analog transport it is signal power over noise power per symbol.
 */
struct ChannelSpec {
  double snr_db = 0.0;
  double rate_bps = 1.0e6;
  LinkKind kind = LinkKind::DL;
};

inline void validate(const ChannelSpec& ch) {
  if (!(ch.rate_bps > 0.0)) throw ValueError("channel rate_bps must be positive");
  if (!std::isfinite(ch.snr_db)) throw ValueError("channel snr_db must be finite");
}

inline double snr_db_to_linear(double snr_db) {
  return std::pow(10.0, snr_db / 10.0);
}

inline double snr_linear(const ChannelSpec& ch) { return snr_db_to_linear(ch.snr_db); }

/** BPSK bit error rate over AWGN: Q(sqrt(2*snr)) = erfc(sqrt(snr))/2. */
inline double ber_bpsk(double snr_lin) {
  if (!(snr_lin > 0.0)) throw ValueError("ber_bpsk: snr must be positive");
  return 0.5 * std::erfc(std::sqrt(snr_lin));
}

/** Packed bit vector, LSB-first within 64-bit words. */
struct BitPayload {
  std::vector<std::uint64_t> words;
  std::size_t length_bits = 0;

  static BitPayload zeros(std::size_t nbits) {
    BitPayload p;
    p.length_bits = nbits;
    p.words.assign((nbits + 63) / 64, 0);
    return p;
  }

  bool bit(std::size_t i) const {
    return (words[i >> 6] >> (i & 63)) & 1u;
  }
  void set_bit(std::size_t i, bool v) {
    const std::uint64_t mask = 1ull << (i & 63);
    if (v)
      words[i >> 6] |= mask;
    else
      words[i >> 6] &= ~mask;
  }
  void flip_bit(std::size_t i) { words[i >> 6] ^= 1ull << (i & 63); }

  void append_bit(bool v) {
    if ((length_bits & 63) == 0) words.push_back(0);
    if (v) words.back() |= 1ull << (length_bits & 63);
    ++length_bits;
  }
  void append_u16(std::uint16_t v) {
    for (int b = 0; b < 16; ++b) append_bit((v >> b) & 1u);
  }
  /** Reads bits [16*index, 16*index + 16), LSB-first. */
  std::uint16_t u16_at(std::size_t index) const {
    std::uint16_t v = 0;
    const std::size_t base = index * 16;
    for (int b = 0; b < 16; ++b)
      if (bit(base + b)) v = static_cast<std::uint16_t>(v | (1u << b));
    return v;
  }
};

enum class DigitalChannelModel {
  ber_model,     // flip each bit with the analytic BPSK error probability
  bpsk_symbols,  // modulate +/-1, add Gaussian noise, hard-decide
};

/**
 * Digital transport. The default applies the analytic BER per bit; the
 * symbol-level mode exists to validate that model and is bitwise-consistent
 * with it in distribution, not in sample path.
 */
inline BitPayload transmit_bits(const BitPayload& payload, const ChannelSpec& ch,
                                RngStream stream,
                                DigitalChannelModel model = DigitalChannelModel::ber_model) {
  validate(ch);
  BitPayload out = payload;
  const std::size_t n = payload.length_bits;
  if (n == 0) return out;
  const double snr = snr_linear(ch);
  Rng rng(stream);
  if (model == DigitalChannelModel::bpsk_symbols) {
    const double sigma = std::sqrt(1.0 / (2.0 * snr));
    for (std::size_t i = 0; i < n; ++i) {
      const double tx = out.bit(i) ? -1.0 : 1.0;
      const double y = tx + sigma * rng.next_normal();
      out.set_bit(i, y < 0.0);
    }
    return out;
  }
  const double p = ber_bpsk(snr);
  if (p <= 0.0) return out;  // underflows to zero at very high SNR
  if (p >= 0.02) {
    for (std::size_t i = 0; i < n; ++i)
      if (rng.next_unit() < p) out.flip_bit(i);
    return out;
  }
  // Sparse regime: jump between flips with geometric gaps.
  const double log_q = std::log1p(-p);
  std::size_t i = 0;
  while (i < n) {
    const double u = rng.next_unit();
    const double gap = std::floor(std::log1p(-u) / log_q);
    if (gap >= static_cast<double>(n)) break;
    i += static_cast<std::size_t>(gap);
    if (i >= n) break;
    out.flip_bit(i);
    ++i;
  }
  return out;
}

/** Analog transport: y = x + n, Var(n) = 1 / snr_linear. Shape preserved. */
inline FeatureTensor transmit_analog(const FeatureTensor& symbols, const ChannelSpec& ch,
                                     RngStream stream) {
  validate(ch);
  const double snr = snr_linear(ch);
  if (!(snr > 0.0)) throw ValueError("transmit_analog: snr must be positive");
  FeatureTensor out = symbols;
  if (out.values.empty()) return out;
  const double sigma = std::sqrt(1.0 / snr);
  Rng rng(stream);
  for (double& v : out.values) v += sigma * rng.next_normal();
  return out;
}

/** Airtime of a payload: bits / rate. */
inline double tx_latency_s(std::uint64_t length_bits, const ChannelSpec& ch) {
  validate(ch);
  return static_cast<double>(length_bits) / ch.rate_bps;
}

}  // namespace megsim
