#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "megsim/channel.hpp"
#include "megsim/core.hpp"

namespace megsim {

// ---------------------------------------------------------------------------
// IEEE-754 half precision
// ---------------------------------------------------------------------------

inline constexpr double kHalfMax = 65504.0;

/** float -> half bits, round-to-nearest-even; values >= 65520 become Inf. */
inline std::uint16_t float_to_half_bits(float f) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(f);
  const std::uint16_t sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
  const std::uint32_t abs = x & 0x7FFFFFFFu;
  if (abs >= 0x7F800000u)  // Inf / NaN
    return static_cast<std::uint16_t>(sign | 0x7C00u |
                                      (abs > 0x7F800000u ? 0x0200u : 0u));
  if (abs >= 0x477FF000u)  // rounds past the largest finite half
    return static_cast<std::uint16_t>(sign | 0x7C00u);
  if (abs >= 0x38800000u) {  // normal half
    const std::uint32_t mant = abs & 0x7FFFFFu;
    const std::uint32_t exp = (abs >> 23) - 112u;
    std::uint16_t h = static_cast<std::uint16_t>((exp << 10) | (mant >> 13));
    const std::uint32_t rem = mant & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;  // carry may bump exp
    return static_cast<std::uint16_t>(sign | h);
  }
  if (abs >= 0x33000000u) {  // subnormal half (>= 2^-25)
    const std::uint32_t sig = (abs & 0x7FFFFFu) | 0x800000u;
    const std::uint32_t shift = 126u - (abs >> 23);  // in [14, 24]
    std::uint32_t q = sig >> shift;
    const std::uint32_t rem = sig & ((1u << shift) - 1u);
    const std::uint32_t half = 1u << (shift - 1u);
    if (rem > half || (rem == half && (q & 1u))) ++q;
    return static_cast<std::uint16_t>(sign | q);
  }
  return sign;  // underflows to signed zero
}

/** half bits -> double, exact. */
inline double half_bits_to_double(std::uint16_t h) {
  const unsigned sign = h >> 15;
  const unsigned exp = (h >> 10) & 0x1Fu;
  const unsigned mant = h & 0x3FFu;
  double v;
  if (exp == 0)
    v = std::ldexp(static_cast<double>(mant), -24);
  else if (exp == 31)
    v = mant ? std::numeric_limits<double>::quiet_NaN()
             : std::numeric_limits<double>::infinity();
  else
    v = std::ldexp(static_cast<double>(mant | 0x400u), static_cast<int>(exp) - 25);
  return sign ? -v : v;
}

// ---------------------------------------------------------------------------
// Digital fp16 codec
// ---------------------------------------------------------------------------

/**
 * clamp_max bounds both the encoder's saturation and the decoder's
 * sanitization; receivers expecting unit-scale features should set it to the
 * feature dynamic range rather than the format maximum.
 */
struct DigitalCodecConfig {
  unsigned bits_per_value = 16;
  double clamp_max = kHalfMax;
};

inline void validate(const DigitalCodecConfig& cfg) {
  if (cfg.bits_per_value != 16)
    throw ConfigError("codecs.digital.bits_per_value", "only 16-bit values are supported");
  if (!(cfg.clamp_max > 0.0) || cfg.clamp_max > kHalfMax)
    throw ConfigError("codecs.digital.clamp_max", "must be in (0, 65504]");
}

/** Round each value to half precision, saturating at +/-clamp_max. */
inline BitPayload quantize_fp16(const FeatureTensor& t,
                                const DigitalCodecConfig& cfg = {}) {
  validate(cfg);
  BitPayload p;
  p.words.reserve((t.size() * 16 + 63) / 64);
  for (double v : t.values) {
    if (!std::isfinite(v)) throw ValueError("quantize_fp16: non-finite value");
    const double c = std::clamp(v, -cfg.clamp_max, cfg.clamp_max);
    p.append_u16(float_to_half_bits(static_cast<float>(c)));
  }
  return p;
}

/** Decode and sanitize: NaN -> 0, Inf and |v| > clamp_max -> +/-clamp_max. */
inline FeatureTensor dequantize_fp16(const BitPayload& p,
                                     std::vector<std::size_t> shape,
                                     const DigitalCodecConfig& cfg = {},
                                     TensorRole role = TensorRole::seed) {
  validate(cfg);
  const std::size_t n = shape_elements(shape);
  if (p.length_bits != n * 16)
    throw PayloadSizeError("dequantize_fp16: payload length does not match shape");
  FeatureTensor t;
  t.shape = std::move(shape);
  t.role = role;
  t.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = half_bits_to_double(p.u16_at(i));
    if (std::isnan(v))
      v = 0.0;
    else if (v > cfg.clamp_max)
      v = cfg.clamp_max;
    else if (v < -cfg.clamp_max)
      v = -cfg.clamp_max;
    t.values[i] = v;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Neuron merging
// ---------------------------------------------------------------------------

/**
 * Surjective map of original dims onto merged groups. group_floor_mse is the
 * reduce-expand roundtrip MSE measured on the calibration set that produced
 * the map.
 */
struct MergeMap {
  std::size_t original_dim = 0;
  std::size_t merged_dim = 0;
  std::vector<std::uint32_t> assignment;  // dim -> group, groups are dense [0, merged_dim)
  double group_floor_mse = 0.0;
};

inline void validate(const MergeMap& m) {
  if (m.merged_dim == 0 || m.merged_dim > m.original_dim)
    throw ConfigError("merge_map.merged_dim", "must be in [1, original_dim]");
  if (m.assignment.size() != m.original_dim)
    throw ConfigError("merge_map.assignment", "length must equal original_dim");
  std::vector<std::uint8_t> seen(m.merged_dim, 0);
  for (std::uint32_t g : m.assignment) {
    if (g >= m.merged_dim)
      throw ConfigError("merge_map.assignment", "group id out of range");
    seen[g] = 1;
  }
  for (std::uint8_t s : seen)
    if (!s) throw ConfigError("merge_map.assignment", "empty group");
}

inline MergeMap identity_merge_map(std::size_t n) {
  MergeMap m;
  m.original_dim = n;
  m.merged_dim = n;
  m.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.assignment[i] = static_cast<std::uint32_t>(i);
  return m;
}

/**
 * Contiguous near-equal blocks; O(N). The fast deterministic choice for
 * large tensors where the greedy fit's quadratic scan is prohibitive.
 */
inline MergeMap blocked_merge_map(std::size_t original_dim, std::size_t merged_dim) {
  if (merged_dim == 0 || merged_dim > original_dim)
    throw ConfigError("merge_map.merged_dim", "must be in [1, original_dim]");
  MergeMap m;
  m.original_dim = original_dim;
  m.merged_dim = merged_dim;
  m.assignment.resize(original_dim);
  const std::size_t base = original_dim / merged_dim;
  const std::size_t rem = original_dim % merged_dim;
  std::size_t i = 0;
  for (std::size_t g = 0; g < merged_dim; ++g) {
    const std::size_t len = base + (g < rem ? 1 : 0);
    for (std::size_t k = 0; k < len; ++k) m.assignment[i++] = static_cast<std::uint32_t>(g);
  }
  return m;
}

/** Replace each group by the mean of its members; output is flat [merged_dim]. */
inline FeatureTensor merge_reduce(const FeatureTensor& t, const MergeMap& m) {
  if (t.size() != m.original_dim)
    throw ShapeError("merge_reduce: tensor size does not match merge map");
  std::vector<double> sums(m.merged_dim, 0.0);
  std::vector<std::uint32_t> counts(m.merged_dim, 0);
  for (std::size_t i = 0; i < t.values.size(); ++i) {
    sums[m.assignment[i]] += t.values[i];
    ++counts[m.assignment[i]];
  }
  for (std::size_t g = 0; g < m.merged_dim; ++g) sums[g] /= counts[g];
  FeatureTensor out;
  out.shape = {m.merged_dim};
  out.values = std::move(sums);
  out.role = t.role;
  return out;
}

/** Broadcast each group value back to its members; output is flat [original_dim]. */
inline FeatureTensor merge_expand(const FeatureTensor& reduced, const MergeMap& m) {
  if (reduced.size() != m.merged_dim)
    throw ShapeError("merge_expand: tensor size does not match merged_dim");
  FeatureTensor out;
  out.shape = {m.original_dim};
  out.role = reduced.role;
  out.values.resize(m.original_dim);
  for (std::size_t i = 0; i < m.original_dim; ++i)
    out.values[i] = reduced.values[m.assignment[i]];
  return out;
}

/** Mean reduce-expand roundtrip MSE over the calibration set; stored on the map. */
inline double calibrate_merge_floor(MergeMap& m,
                                    std::span<const FeatureTensor> calibration) {
  if (calibration.empty())
    throw ConfigError("merge_map.calibration", "calibration set must be non-empty");
  double acc = 0.0;
  for (const FeatureTensor& t : calibration) {
    const FeatureTensor rt = merge_expand(merge_reduce(t, m), m);
    double s = 0.0;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
      const double d = t.values[i] - rt.values[i];
      s += d * d;
    }
    acc += s / static_cast<double>(t.values.size());
  }
  m.group_floor_mse = acc / static_cast<double>(calibration.size());
  return m.group_floor_mse;
}

/**
 * Greedy agglomerative fit: repeatedly merge the pair of groups whose merge
 * raises the within-group sum of squares the least over the calibration set
 * (Ward linkage); ties break to the lexicographically lowest pair. Quadratic
 * in the number of groups per step, intended for modest dims; use
 * blocked_merge_map for large tensors.
 */
inline MergeMap fit_merge_map(std::span<const FeatureTensor> calibration,
                              std::size_t merged_dim) {
  if (calibration.empty())
    throw ConfigError("merge_map.calibration", "calibration set must be non-empty");
  const std::size_t n = calibration.front().size();
  if (n == 0) throw ShapeError("fit_merge_map: empty calibration tensors");
  for (const FeatureTensor& t : calibration)
    if (t.size() != n) throw ShapeError("fit_merge_map: calibration sizes differ");
  if (merged_dim == 0 || merged_dim > n)
    throw ConfigError("merge_map.merged_dim", "must be in [1, original_dim]");

  const std::size_t tcount = calibration.size();
  // Per-group state: per-tensor member sums, member count, smallest member.
  std::vector<std::vector<double>> sums(n, std::vector<double>(tcount));
  std::vector<std::size_t> size(n, 1);
  std::vector<std::size_t> min_member(n);
  std::vector<bool> alive(n, true);
  for (std::size_t i = 0; i < n; ++i) {
    min_member[i] = i;
    for (std::size_t t = 0; t < tcount; ++t) sums[i][t] = calibration[t].values[i];
  }

  auto merge_cost = [&](std::size_t a, std::size_t b) {
    const double na = static_cast<double>(size[a]);
    const double nb = static_cast<double>(size[b]);
    const double w = na * nb / (na + nb);
    double c = 0.0;
    for (std::size_t t = 0; t < tcount; ++t) {
      const double d = sums[a][t] / na - sums[b][t] / nb;
      c += w * d * d;
    }
    return c;
  };

  std::vector<std::size_t> alive_ids(n);
  std::iota(alive_ids.begin(), alive_ids.end(), 0);
  std::vector<std::uint32_t> group_of(n);
  for (std::size_t i = 0; i < n; ++i) group_of[i] = static_cast<std::uint32_t>(i);

  for (std::size_t groups = n; groups > merged_dim; --groups) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_a = 0, best_b = 0;
    for (std::size_t ia = 0; ia < alive_ids.size(); ++ia) {
      for (std::size_t ib = ia + 1; ib < alive_ids.size(); ++ib) {
        const std::size_t a = alive_ids[ia], b = alive_ids[ib];
        const double c = merge_cost(a, b);
        if (c < best) {
          best = c;
          best_a = a;
          best_b = b;
        }
      }
    }
    // Absorb b into a (a < b by enumeration order).
    for (std::size_t t = 0; t < tcount; ++t) sums[best_a][t] += sums[best_b][t];
    size[best_a] += size[best_b];
    min_member[best_a] = std::min(min_member[best_a], min_member[best_b]);
    alive[best_b] = false;
    for (std::size_t i = 0; i < n; ++i)
      if (group_of[i] == best_b) group_of[i] = static_cast<std::uint32_t>(best_a);
    alive_ids.erase(std::find(alive_ids.begin(), alive_ids.end(), best_b));
  }

  // Renumber surviving groups by smallest member so ids are reproducible.
  std::vector<std::size_t> order;
  for (std::size_t g = 0; g < n; ++g)
    if (alive[g]) order.push_back(g);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return min_member[a] < min_member[b]; });
  std::vector<std::uint32_t> rank(n, 0);
  for (std::size_t r = 0; r < order.size(); ++r)
    rank[order[r]] = static_cast<std::uint32_t>(r);

  MergeMap m;
  m.original_dim = n;
  m.merged_dim = merged_dim;
  m.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.assignment[i] = rank[group_of[i]];
  calibrate_merge_floor(m, calibration);
  return m;
}

// ---------------------------------------------------------------------------
// Top-k pruning
// ---------------------------------------------------------------------------

struct PrunedPayload {
  std::size_t original_dim = 0;
  std::vector<std::uint32_t> indices;  // ascending
  std::vector<double> values;          // fp16-rounded
  std::uint64_t payload_bits = 0;
};

inline unsigned ceil_log2(std::size_t n) {
  unsigned b = 0;
  while ((std::size_t{1} << b) < n) ++b;
  return b;
}

/** Keep the k largest-magnitude values (ties keep the lower index). */
inline PrunedPayload prune_topk(const FeatureTensor& t, std::size_t keep) {
  const std::size_t n = t.size();
  if (keep == 0 || keep > n) throw ValueError("prune_topk: keep must be in [1, dim]");
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
    const double ma = std::abs(t.values[a]), mb = std::abs(t.values[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  });
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  PrunedPayload p;
  p.original_dim = n;
  p.indices = std::move(idx);
  p.values.reserve(keep);
  for (std::uint32_t i : p.indices)
    p.values.push_back(half_bits_to_double(
        float_to_half_bits(static_cast<float>(std::clamp(t.values[i], -kHalfMax, kHalfMax)))));
  p.payload_bits = static_cast<std::uint64_t>(keep) * (16 + ceil_log2(n));
  return p;
}

/** Dense reconstruction with zeros at pruned positions. */
inline FeatureTensor prune_dense(const PrunedPayload& p) {
  FeatureTensor t;
  t.shape = {p.original_dim};
  t.values.assign(p.original_dim, 0.0);
  for (std::size_t k = 0; k < p.indices.size(); ++k) t.values[p.indices[k]] = p.values[k];
  return t;
}

// ---------------------------------------------------------------------------
// Analog joint source-channel codec
// ---------------------------------------------------------------------------

struct PowerNorm {
  double mean = 0.0;
  double scale = 1.0;
};

struct JsccCodecConfig {
  MergeMap merge_map;
  PowerNorm power_norm;
};

inline void validate(const JsccCodecConfig& cfg) {
  validate(cfg.merge_map);
  if (!(cfg.power_norm.scale > 0.0))
    throw ConfigError("codecs.jscc.power_norm.scale", "must be positive");
  if (!std::isfinite(cfg.power_norm.mean))
    throw ConfigError("codecs.jscc.power_norm.mean", "must be finite");
}

/** Calibrates power normalization (and the merge floor) from example tensors. */
inline JsccCodecConfig make_jscc_config(MergeMap map,
                                        std::span<const FeatureTensor> calibration) {
  calibrate_merge_floor(map, calibration);
  double mean = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (const FeatureTensor& t : calibration) {
    const FeatureTensor r = merge_reduce(t, map);
    for (double v : r.values) {
      mean += v;
      sq += v * v;
      ++count;
    }
  }
  mean /= static_cast<double>(count);
  const double var = sq / static_cast<double>(count) - mean * mean;
  JsccCodecConfig cfg;
  cfg.merge_map = std::move(map);
  cfg.power_norm.mean = mean;
  cfg.power_norm.scale = std::sqrt(std::max(var, 0.0));
  if (!(cfg.power_norm.scale > 0.0))
    throw ConfigError("codecs.jscc.power_norm.scale",
                      "calibration has zero variance after merging");
  return cfg;
}

/** Merge then normalize to unit average power; output is flat [merged_dim]. */
inline FeatureTensor jscc_encode(const FeatureTensor& t, const JsccCodecConfig& cfg) {
  validate(cfg);
  FeatureTensor s = merge_reduce(t, cfg.merge_map);
  for (double& v : s.values) v = (v - cfg.power_norm.mean) / cfg.power_norm.scale;
  return s;
}

/** LMMSE shrinkage, denormalize, expand back to the original dims. */
inline FeatureTensor jscc_decode(const FeatureTensor& received, const JsccCodecConfig& cfg,
                                 double snr_lin) {
  validate(cfg);
  if (!(snr_lin > 0.0)) throw ValueError("jscc_decode: snr must be positive");
  if (received.size() != cfg.merge_map.merged_dim)
    throw ShapeError("jscc_decode: symbol count does not match merged_dim");
  const double shrink = snr_lin / (1.0 + snr_lin);
  FeatureTensor s = received;
  for (double& v : s.values)
    v = shrink * v * cfg.power_norm.scale + cfg.power_norm.mean;
  return merge_expand(s, cfg.merge_map);
}

/** Encode/decode without channel or shrinkage: the wire-format view. */
inline FeatureTensor jscc_wire_roundtrip(const FeatureTensor& t, const JsccCodecConfig& cfg) {
  validate(cfg);
  FeatureTensor s = jscc_encode(t, cfg);
  for (double& v : s.values) v = v * cfg.power_norm.scale + cfg.power_norm.mean;
  return merge_expand(s, cfg.merge_map);
}

// ---------------------------------------------------------------------------
// Sketch codec
// ---------------------------------------------------------------------------

struct SketchConfig {
  std::size_t downsample_factor = 1;
  bool edge_bits = false;
  double edge_threshold = 0.5;
};

inline void validate(const SketchConfig& cfg) {
  if (cfg.downsample_factor == 0)
    throw ConfigError("codecs.sketch.downsample_factor", "must be >= 1");
  if (!(cfg.edge_threshold > 0.0))
    throw ConfigError("codecs.sketch.edge_threshold", "must be positive");
}

struct SketchPayload {
  FeatureTensor pooled;              // 2-D, role sketch
  std::optional<BitPayload> edges;   // one bit per pooled cell, row-major
};

inline std::uint64_t sketch_payload_bits(const SketchConfig& cfg,
                                         std::span<const std::size_t> shape) {
  validate(cfg);
  if (shape.size() != 2) throw ShapeError("sketch: tensor must be 2-D");
  const std::size_t f = cfg.downsample_factor;
  if (shape[0] % f != 0 || shape[1] % f != 0)
    throw ShapeError("sketch: shape not divisible by downsample factor");
  const std::uint64_t cells =
      static_cast<std::uint64_t>(shape[0] / f) * (shape[1] / f);
  return cells * 16 + (cfg.edge_bits ? cells : 0);
}

/** Average-pool plus an optional 1-bit edge map at the reduced resolution. */
inline SketchPayload sketch_encode(const FeatureTensor& t, const SketchConfig& cfg) {
  validate(cfg);
  if (t.shape.size() != 2) throw ShapeError("sketch_encode: tensor must be 2-D");
  const std::size_t f = cfg.downsample_factor;
  const std::size_t h = t.shape[0], w = t.shape[1];
  if (h % f != 0 || w % f != 0)
    throw ShapeError("sketch_encode: shape not divisible by downsample factor");
  const std::size_t hp = h / f, wp = w / f;
  SketchPayload out;
  out.pooled.shape = {hp, wp};
  out.pooled.role = TensorRole::sketch;
  out.pooled.values.resize(hp * wp);
  for (std::size_t r = 0; r < hp; ++r)
    for (std::size_t c = 0; c < wp; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < f; ++i)
        for (std::size_t j = 0; j < f; ++j) s += t.values[(r * f + i) * w + (c * f + j)];
      out.pooled.values[r * wp + c] = s / static_cast<double>(f * f);
    }
  if (cfg.edge_bits) {
    BitPayload edges = BitPayload::zeros(hp * wp);
    const auto& p = out.pooled.values;
    for (std::size_t r = 0; r < hp; ++r)
      for (std::size_t c = 0; c < wp; ++c) {
        const double gx = c + 1 < wp ? p[r * wp + c + 1] - p[r * wp + c] : 0.0;
        const double gy = r + 1 < hp ? p[(r + 1) * wp + c] - p[r * wp + c] : 0.0;
        if (std::sqrt(gx * gx + gy * gy) > cfg.edge_threshold)
          edges.set_bit(r * wp + c, true);
      }
    out.edges = std::move(edges);
  }
  return out;
}

/**
 * Bilinear upsample (cell centers, clamped borders); cells marked in the edge
 * map fall back to their pooled value so interpolation never crosses an edge.
 */
inline FeatureTensor sketch_decode(const SketchPayload& payload, const SketchConfig& cfg,
                                   std::span<const std::size_t> target_shape) {
  validate(cfg);
  if (payload.pooled.shape.size() != 2) throw ShapeError("sketch_decode: pooled must be 2-D");
  if (target_shape.size() != 2) throw ShapeError("sketch_decode: target must be 2-D");
  const std::size_t f = cfg.downsample_factor;
  const std::size_t hp = payload.pooled.shape[0], wp = payload.pooled.shape[1];
  if (target_shape[0] != hp * f || target_shape[1] != wp * f)
    throw ShapeError("sketch_decode: target shape does not match pooled shape and factor");
  if (payload.edges && payload.edges->length_bits != hp * wp)
    throw PayloadSizeError("sketch_decode: edge map length mismatch");
  const auto& p = payload.pooled.values;
  FeatureTensor out;
  out.shape.assign(target_shape.begin(), target_shape.end());
  out.role = payload.pooled.role;
  out.values.resize(target_shape[0] * target_shape[1]);
  const double fd = static_cast<double>(f);
  for (std::size_t r = 0; r < target_shape[0]; ++r) {
    const double u = (static_cast<double>(r) + 0.5) / fd - 0.5;
    const std::size_t r0 = static_cast<std::size_t>(std::clamp(std::floor(u), 0.0,
                                                               static_cast<double>(hp - 1)));
    const std::size_t r1 = std::min(r0 + 1, hp - 1);
    const double fu = std::clamp(u - static_cast<double>(r0), 0.0, 1.0);
    for (std::size_t c = 0; c < target_shape[1]; ++c) {
      const std::size_t cell = (r / f) * wp + (c / f);
      if (payload.edges && payload.edges->bit(cell)) {
        out.values[r * target_shape[1] + c] = p[cell];
        continue;
      }
      const double v = (static_cast<double>(c) + 0.5) / fd - 0.5;
      const std::size_t c0 = static_cast<std::size_t>(std::clamp(std::floor(v), 0.0,
                                                                 static_cast<double>(wp - 1)));
      const std::size_t c1 = std::min(c0 + 1, wp - 1);
      const double fv = std::clamp(v - static_cast<double>(c0), 0.0, 1.0);
      const double top = p[r0 * wp + c0] + fv * (p[r0 * wp + c1] - p[r0 * wp + c0]);
      const double bot = p[r1 * wp + c0] + fv * (p[r1 * wp + c1] - p[r1 * wp + c0]);
      out.values[r * target_shape[1] + c] = top + fu * (bot - top);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transport binding: how a tensor becomes channel payload
// ---------------------------------------------------------------------------

enum class TransportKind { digital_fp16, analog_jscc, sketch, raw_image };

inline std::string_view to_string(TransportKind k) {
  switch (k) {
    case TransportKind::digital_fp16: return "digital_fp16";
    case TransportKind::analog_jscc: return "analog_jscc";
    case TransportKind::sketch: return "sketch";
    case TransportKind::raw_image: return "raw_image";
  }
  return "digital_fp16";
}

struct TransportResult {
  FeatureTensor received;
  std::uint64_t payload_bits = 0;
  double airtime_s = 0.0;
};

struct TransportCodec {
  TransportKind kind = TransportKind::digital_fp16;
  DigitalCodecConfig digital{};
  std::shared_ptr<const JsccCodecConfig> jscc{};
  SketchConfig sketch_cfg{};
  unsigned bits_per_symbol = 16;  // airtime equivalence for analog symbols

  std::uint64_t payload_bits(std::span<const std::size_t> shape) const {
    switch (kind) {
      case TransportKind::digital_fp16:
      case TransportKind::raw_image:
        return static_cast<std::uint64_t>(shape_elements(shape)) * 16;
      case TransportKind::analog_jscc:
        return static_cast<std::uint64_t>(jscc->merge_map.merged_dim) * bits_per_symbol;
      case TransportKind::sketch:
        return sketch_payload_bits(sketch_cfg, shape);
    }
    return 0;
  }

  /** Noiseless encode/decode: what a lossless channel would deliver. */
  FeatureTensor wire_roundtrip(const FeatureTensor& t) const {
    switch (kind) {
      case TransportKind::digital_fp16:
      case TransportKind::raw_image: {
        return dequantize_fp16(quantize_fp16(t, digital), t.shape, digital, t.role);
      }
      case TransportKind::analog_jscc:
        return reshape(jscc_wire_roundtrip(t, *jscc), t.shape);
      case TransportKind::sketch: {
        const SketchPayload p = sketch_encode(t, sketch_cfg);
        SketchPayload wire;
        wire.pooled = dequantize_fp16(quantize_fp16(p.pooled, digital), p.pooled.shape,
                                      digital, p.pooled.role);
        wire.edges = p.edges;
        return sketch_decode(wire, sketch_cfg, t.shape);
      }
    }
    return t;
  }

  TransportResult transport(const FeatureTensor& t, const ChannelSpec& ch,
                            RngStream stream) const {
    TransportResult r;
    r.payload_bits = payload_bits(t.shape);
    r.airtime_s = tx_latency_s(r.payload_bits, ch);
    switch (kind) {
      case TransportKind::digital_fp16:
      case TransportKind::raw_image: {
        const BitPayload sent = quantize_fp16(t, digital);
        const BitPayload got = transmit_bits(sent, ch, substream(stream, "bits"));
        r.received = dequantize_fp16(got, t.shape, digital, t.role);
        return r;
      }
      case TransportKind::analog_jscc: {
        const FeatureTensor symbols = jscc_encode(t, *jscc);
        const FeatureTensor got = transmit_analog(symbols, ch, substream(stream, "symbols"));
        r.received = reshape(jscc_decode(got, *jscc, snr_linear(ch)), t.shape);
        r.received.role = t.role;
        return r;
      }
      case TransportKind::sketch: {
        const SketchPayload p = sketch_encode(t, sketch_cfg);
        BitPayload bits = quantize_fp16(p.pooled, digital);
        if (p.edges)
          for (std::size_t i = 0; i < p.edges->length_bits; ++i)
            bits.append_bit(p.edges->bit(i));
        const BitPayload got = transmit_bits(bits, ch, substream(stream, "bits"));
        const std::size_t cells = p.pooled.size();
        BitPayload pooled_bits = BitPayload::zeros(cells * 16);
        for (std::size_t i = 0; i < cells * 16; ++i) pooled_bits.set_bit(i, got.bit(i));
        SketchPayload rx;
        rx.pooled = dequantize_fp16(pooled_bits, p.pooled.shape, digital, p.pooled.role);
        if (p.edges) {
          BitPayload e = BitPayload::zeros(cells);
          for (std::size_t i = 0; i < cells; ++i) e.set_bit(i, got.bit(cells * 16 + i));
          rx.edges = std::move(e);
        }
        r.received = sketch_decode(rx, sketch_cfg, t.shape);
        r.received.role = t.role;
        return r;
      }
    }
    r.received = t;
    return r;
  }
};

inline TransportCodec digital_codec(DigitalCodecConfig cfg = {}) {
  TransportCodec c;
  c.kind = TransportKind::digital_fp16;
  c.digital = cfg;
  return c;
}

inline TransportCodec raw_image_codec(DigitalCodecConfig cfg = {}) {
  TransportCodec c;
  c.kind = TransportKind::raw_image;
  c.digital = cfg;
  return c;
}

inline TransportCodec jscc_codec(std::shared_ptr<const JsccCodecConfig> cfg,
                                 unsigned bits_per_symbol = 16) {
  TransportCodec c;
  c.kind = TransportKind::analog_jscc;
  c.jscc = std::move(cfg);
  c.bits_per_symbol = bits_per_symbol;
  return c;
}

inline TransportCodec sketch_codec(SketchConfig sketch, DigitalCodecConfig digital = {}) {
  TransportCodec c;
  c.kind = TransportKind::sketch;
  c.sketch_cfg = sketch;
  c.digital = digital;
  return c;
}

}  // namespace megsim
