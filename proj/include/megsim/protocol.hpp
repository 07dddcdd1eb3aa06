#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "megsim/channel.hpp"
#include "megsim/codec.hpp"
#include "megsim/core.hpp"
#include "megsim/pipeline.hpp"

namespace megsim {

enum class Mechanism { E2U, U2E, SEU, PEU };
enum class Scheme { Centralized, MEG, E2E_MEG };

inline std::string_view to_string(Mechanism m) {
  switch (m) {
    case Mechanism::E2U: return "E2U";
    case Mechanism::U2E: return "U2E";
    case Mechanism::SEU: return "SEU";
    case Mechanism::PEU: return "PEU";
  }
  return "E2U";
}

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::Centralized: return "Centralized";
    case Scheme::MEG: return "MEG";
    case Scheme::E2E_MEG: return "E2E_MEG";
  }
  return "MEG";
}

// ---------------------------------------------------------------------------
// Fusion operators
// ---------------------------------------------------------------------------

/** Elementwise mixing weights in [0, 1]; identical copies live on both sides. */
struct FeatureGate {
  FeatureTensor alpha;
};

inline void validate(const FeatureGate& g) {
  for (double a : g.alpha.values)
    if (!(a >= 0.0 && a <= 1.0))
      throw ConfigError("gate.alpha", "entries must be in [0, 1]");
}

inline FeatureGate uniform_gate(std::vector<std::size_t> shape, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("gate.alpha", "must be in [0, 1]");
  FeatureGate g;
  g.alpha.shape = std::move(shape);
  g.alpha.values.assign(shape_elements(g.alpha.shape), alpha);
  return g;
}

/**
 * alpha*local + (1-alpha)*remote elementwise. Equal inputs pass through
 * bit-exactly for any alpha, so agreeing replicas never drift.
 */
inline FeatureTensor gate_fuse(const FeatureTensor& local, const FeatureTensor& remote,
                               const FeatureGate& gate) {
  if (local.shape != remote.shape || local.shape != gate.alpha.shape)
    throw ShapeError("gate_fuse: shapes differ");
  FeatureTensor out = local;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double l = local.values[i], r = remote.values[i];
    if (l != r) {
      const double a = gate.alpha.values[i];
      out.values[i] = a * l + (1.0 - a) * r;
    }
  }
  return out;
}

/**
 * Elementwise mean, bitwise permutation-invariant: addends are sorted before
 * summation, and an all-equal element short-circuits so K identical inputs
 * return exactly that input.
 */
inline FeatureTensor fuse_mean(std::span<const FeatureTensor> features) {
  if (features.empty()) throw ValueError("fuse_mean: empty feature list");
  const std::vector<std::size_t>& shape = features.front().shape;
  for (const FeatureTensor& f : features)
    if (f.shape != shape) throw ShapeError("fuse_mean: shapes differ");
  FeatureTensor out = features.front();
  const std::size_t k = features.size();
  if (k == 1) return out;
  std::vector<double> buf(k);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    bool all_eq = true;
    for (std::size_t j = 0; j < k; ++j) {
      buf[j] = features[j].values[i];
      all_eq = all_eq && buf[j] == buf[0];
    }
    if (all_eq) continue;  // out already holds features[0]'s value
    std::sort(buf.begin(), buf.end());
    double s = 0.0;
    for (double v : buf) s += v;
    out.values[i] = s / static_cast<double>(k);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mechanism configuration and run metrics
// ---------------------------------------------------------------------------

struct MechanismConfig {
  Mechanism mechanism = Mechanism::E2U;
  Scheme scheme = Scheme::MEG;
  ChannelSpec ul{};
  ChannelSpec dl{};
  TransportCodec ul_codec{};
  TransportCodec dl_codec{};
  PipelineModel pipeline{};
  std::uint64_t prompt_bits = 0;
  std::optional<std::size_t> seu_dl_split{};  // stage index of the return hop
  double gate_alpha = 0.5;
  double gate_seconds = 0.0;
  double psnr_peak = 1.0;
};

inline void validate(const MechanismConfig& cfg) {
  validate(cfg.pipeline);
  validate(cfg.ul);
  validate(cfg.dl);
  if (cfg.scheme == Scheme::Centralized && cfg.mechanism != Mechanism::E2U &&
      cfg.mechanism != Mechanism::U2E)
    throw ConfigError("mechanism", "Centralized supports only E2U and U2E");
  if ((cfg.mechanism == Mechanism::E2U || cfg.mechanism == Mechanism::U2E) &&
      cfg.scheme != Scheme::Centralized &&
      (cfg.pipeline.split_index == 0 ||
       cfg.pipeline.split_index == cfg.pipeline.stages.size()))
    throw ConfigError("pipeline.split_index",
                      "split must leave at least one stage on each side");
  if (cfg.mechanism == Mechanism::SEU) {
    if (!cfg.seu_dl_split)
      throw ConfigError("seu_dl_split", "required for the SEU mechanism");
    if (*cfg.seu_dl_split < cfg.pipeline.split_index ||
        *cfg.seu_dl_split > cfg.pipeline.stages.size())
      throw ConfigError("seu_dl_split", "must be in [split_index, stage count]");
  }
  if (!(cfg.gate_alpha >= 0.0 && cfg.gate_alpha <= 1.0))
    throw ConfigError("gate_alpha", "must be in [0, 1]");
  if (!(cfg.gate_seconds >= 0.0)) throw ConfigError("gate_seconds", "must be >= 0");
  if (!(cfg.psnr_peak > 0.0)) throw ConfigError("psnr_peak", "must be positive");
  const std::size_t boundary = shape_elements(cfg.pipeline.boundary_shape);
  for (const auto* c : {&cfg.ul_codec, &cfg.dl_codec})
    if (c->kind == TransportKind::analog_jscc &&
        c->jscc->merge_map.original_dim != boundary)
      throw ConfigError("codecs.jscc.merged_dim",
                        "merge map original_dim must equal boundary volume");
}

struct TimelineEvent {
  std::string label;
  double t_s = 0.0;
};

struct RunMetrics {
  double t_tx_s = 0.0;
  double t_compute_s = 0.0;
  double t_e2e_s = 0.0;
  std::uint64_t payload_bits_ul = 0;
  std::uint64_t payload_bits_dl = 0;
  DistortionReport distortion{};
  std::optional<DistortionReport> distortion_secondary{};  // PEU server side
  std::vector<TimelineEvent> timeline;
  std::vector<std::string> flags;
};

/** Causal ordering plus t_e2e == final timestamp; every run must satisfy it. */
inline void audit_timeline(const RunMetrics& m) {
  if (m.timeline.empty()) throw Error("timeline audit: empty timeline");
  double prev = 0.0;
  for (const TimelineEvent& e : m.timeline) {
    if (!(e.t_s >= prev)) throw Error("timeline audit: events out of order at " + e.label);
    prev = e.t_s;
  }
  if (m.t_e2e_s != m.timeline.back().t_s)
    throw Error("timeline audit: t_e2e_s does not equal the final timestamp");
}

namespace detail {

inline FeatureTensor boundary_input(const MechanismConfig& cfg, RngStream stream,
                                    const FeatureTensor* injected) {
  if (!injected) return synth_boundary_tensor(cfg.pipeline, stream);
  if (injected->shape != cfg.pipeline.boundary_shape)
    throw ShapeError("injected boundary tensor does not match pipeline boundary shape");
  return *injected;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Single-user mechanisms
// ---------------------------------------------------------------------------

/**
 * Server-to-device: prompt up, server runs the pipeline head, boundary
 * feature down, device finishes. Distortion compares the received feature
 * against the noiseless boundary.
 */
inline RunMetrics run_e2u(const MechanismConfig& cfg, RngStream stream,
                          const FeatureTensor* injected = nullptr) {
  validate(cfg);
  const FeatureTensor x = detail::boundary_input(cfg, stream, injected);
  const PipelineSplit split = split_at(cfg.pipeline, cfg.pipeline.split_index);
  const TransportResult dl = cfg.dl_codec.transport(x, cfg.dl, substream(stream, "dl"));
  const double t_prompt = tx_latency_s(cfg.prompt_bits, cfg.ul);

  RunMetrics m;
  double t = 0.0;
  m.timeline.push_back({"prompt_ul", t += t_prompt});
  m.timeline.push_back({"compute_es", t += split.server_s});
  m.timeline.push_back({"feature_dl", t += dl.airtime_s});
  m.timeline.push_back({"compute_ue", t += split.device_s});
  m.t_e2e_s = t;
  m.t_tx_s = t_prompt + dl.airtime_s;
  m.t_compute_s = split.server_s + split.device_s;
  m.payload_bits_ul = cfg.prompt_bits;
  m.payload_bits_dl = dl.payload_bits;
  m.distortion = distortion_report(x, dl.received, cfg.psnr_peak);
  audit_timeline(m);
  return m;
}

/**
 * Device-to-server mirror: prompt down, device encodes, boundary feature up,
 * server finishes. Distortion measured on the server side.
 */
inline RunMetrics run_u2e(const MechanismConfig& cfg, RngStream stream,
                          const FeatureTensor* injected = nullptr) {
  validate(cfg);
  const FeatureTensor x = detail::boundary_input(cfg, stream, injected);
  const PipelineSplit split = split_at(cfg.pipeline, cfg.pipeline.split_index);
  const TransportResult ul = cfg.ul_codec.transport(x, cfg.ul, substream(stream, "ul"));
  const double t_prompt = tx_latency_s(cfg.prompt_bits, cfg.dl);

  RunMetrics m;
  double t = 0.0;
  m.timeline.push_back({"prompt_dl", t += t_prompt});
  m.timeline.push_back({"compute_ue", t += split.server_s});
  m.timeline.push_back({"feature_ul", t += ul.airtime_s});
  m.timeline.push_back({"compute_es", t += split.device_s});
  m.t_e2e_s = t;
  m.t_tx_s = t_prompt + ul.airtime_s;
  m.t_compute_s = split.server_s + split.device_s;
  m.payload_bits_ul = ul.payload_bits;
  m.payload_bits_dl = cfg.prompt_bits;
  m.distortion = distortion_report(x, ul.received, cfg.psnr_peak);
  audit_timeline(m);
  return m;
}

/**
 * Device-server-device round trip: device encodes [0, split), server runs
 * [split, seu_dl_split), device decodes the rest. t_e2e is the plain sum of
 * the five timeline terms; distortion compounds the UL and DL hops (the
 * server section passes features through unchanged in value terms).
 */
inline RunMetrics run_seu(const MechanismConfig& cfg, RngStream stream,
                          const FeatureTensor* injected = nullptr) {
  validate(cfg);
  const FeatureTensor x = detail::boundary_input(cfg, stream, injected);
  const std::size_t a = cfg.pipeline.split_index;
  const std::size_t b = *cfg.seu_dl_split;
  const double t_enc = compute_latency_s(cfg.pipeline, 0, a);
  const double t_mid = compute_latency_s(cfg.pipeline, a, b);
  const double t_dec = compute_latency_s(cfg.pipeline, b, cfg.pipeline.stages.size());
  const TransportResult ul = cfg.ul_codec.transport(x, cfg.ul, substream(stream, "ul"));
  const TransportResult dl =
      cfg.dl_codec.transport(ul.received, cfg.dl, substream(stream, "dl"));

  RunMetrics m;
  double t = 0.0;
  m.timeline.push_back({"encode_ue", t += t_enc});
  m.timeline.push_back({"feature_ul", t += ul.airtime_s});
  m.timeline.push_back({"compute_es", t += t_mid});
  m.timeline.push_back({"feature_dl", t += dl.airtime_s});
  m.timeline.push_back({"decode_ue", t += t_dec});
  m.t_e2e_s = t;
  m.t_tx_s = ul.airtime_s + dl.airtime_s;
  m.t_compute_s = t_enc + t_mid + t_dec;
  m.payload_bits_ul = ul.payload_bits;
  m.payload_bits_dl = dl.payload_bits;
  m.distortion = distortion_report(x, dl.received, cfg.psnr_peak);
  audit_timeline(m);
  return m;
}

/** The two replicas' fused tensors plus the ideal-fusion reference. */
struct PeuViews {
  FeatureTensor fused_es;
  FeatureTensor fused_ue;
  FeatureTensor reference;
};

/**
 * Parallel generation: both sides run the pipeline head on local data,
 * exchange boundary features simultaneously, fuse with identical gate copies,
 * and finish locally. Completion per side = max(own branch, peer arrival) +
 * fusion + tail; t_e2e = max of the two sides.
 *
 * Both replicas fuse wire-format tensors (the local feature as a lossless
 * receiver would see it, the remote as actually received), so under lossless
 * transport the two fused views are bit-identical for any gate. Pass views to
 * inspect them.
 */
inline RunMetrics run_peu(const MechanismConfig& cfg, RngStream stream,
                          const FeatureGate& gate,
                          const FeatureTensor* injected = nullptr,
                          PeuViews* views = nullptr) {
  validate(cfg);
  validate(gate);
  if (gate.alpha.shape != cfg.pipeline.boundary_shape)
    throw ShapeError("run_peu: gate shape does not match boundary shape");
  const FeatureTensor x_es =
      injected ? *injected : detail::boundary_input(cfg, substream(stream, "es"), nullptr);
  const FeatureTensor x_ue =
      injected ? *injected : detail::boundary_input(cfg, substream(stream, "ue"), nullptr);
  if (injected && injected->shape != cfg.pipeline.boundary_shape)
    throw ShapeError("injected boundary tensor does not match pipeline boundary shape");

  const PipelineSplit split = split_at(cfg.pipeline, cfg.pipeline.split_index);
  const TransportResult dl = cfg.dl_codec.transport(x_es, cfg.dl, substream(stream, "dl"));
  const TransportResult ul = cfg.ul_codec.transport(x_ue, cfg.ul, substream(stream, "ul"));
  const FeatureTensor es_wire = cfg.dl_codec.wire_roundtrip(x_es);
  const FeatureTensor ue_wire = cfg.ul_codec.wire_roundtrip(x_ue);

  // The gate's first argument is the server-side feature on both replicas.
  const FeatureTensor fused_ue = gate_fuse(dl.received, ue_wire, gate);
  const FeatureTensor fused_es = gate_fuse(es_wire, ul.received, gate);
  const FeatureTensor reference = gate_fuse(x_es, x_ue, gate);

  const double t_branch = split.server_s;
  const double t_fuse_ue = std::max(t_branch, t_branch + dl.airtime_s) + cfg.gate_seconds;
  const double t_fuse_es = std::max(t_branch, t_branch + ul.airtime_s) + cfg.gate_seconds;
  const double t_ue = t_fuse_ue + split.device_s;
  const double t_es = t_fuse_es + split.device_s;

  RunMetrics m;
  m.timeline = {
      {"branch_es", t_branch},          {"branch_ue", t_branch},
      {"feature_dl", t_branch + dl.airtime_s}, {"feature_ul", t_branch + ul.airtime_s},
      {"fuse_ue", t_fuse_ue},           {"fuse_es", t_fuse_es},
      {"generate_ue", t_ue},            {"generate_es", t_es},
  };
  std::stable_sort(m.timeline.begin(), m.timeline.end(),
                   [](const TimelineEvent& a, const TimelineEvent& b) { return a.t_s < b.t_s; });
  m.t_e2e_s = std::max(t_ue, t_es);
  m.t_tx_s = ul.airtime_s + dl.airtime_s;
  m.t_compute_s = t_branch + cfg.gate_seconds + split.device_s;
  m.payload_bits_ul = ul.payload_bits;
  m.payload_bits_dl = dl.payload_bits;
  m.distortion = distortion_report(reference, fused_ue, cfg.psnr_peak);
  m.distortion_secondary = distortion_report(reference, fused_es, cfg.psnr_peak);
  if (views) *views = {fused_es, fused_ue, reference};
  audit_timeline(m);
  return m;
}

inline RunMetrics run_mechanism(const MechanismConfig& cfg, RngStream stream,
                                const FeatureTensor* injected = nullptr) {
  switch (cfg.mechanism) {
    case Mechanism::E2U: return run_e2u(cfg, stream, injected);
    case Mechanism::U2E: return run_u2e(cfg, stream, injected);
    case Mechanism::SEU: return run_seu(cfg, stream, injected);
    case Mechanism::PEU:
      return run_peu(cfg, stream,
                     uniform_gate(cfg.pipeline.boundary_shape, cfg.gate_alpha), injected);
  }
  throw ValueError("run_mechanism: unknown mechanism");
}

// ---------------------------------------------------------------------------
// Multi-user modes
// ---------------------------------------------------------------------------

enum class MultiUserMode { Individual, DecentralizedShared, CoordinatedFused };

inline std::string_view to_string(MultiUserMode m) {
  switch (m) {
    case MultiUserMode::Individual: return "Individual";
    case MultiUserMode::DecentralizedShared: return "DecentralizedShared";
    case MultiUserMode::CoordinatedFused: return "CoordinatedFused";
  }
  return "Individual";
}

struct MultiUserConfig {
  MultiUserMode mode = MultiUserMode::Individual;
  unsigned num_ues = 1;
  std::optional<ChannelSpec> d2d{};  // absent: mirrors the UL spec
  std::vector<std::pair<unsigned, unsigned>> neighbors{};  // undirected edges
  std::vector<double> ue_ul_rate_scale{};  // empty: all 1.0; scales UL and D2D sends
  bool coordinated_dl = false;
};

inline void validate(const MultiUserConfig& mu) {
  if (mu.num_ues < 1) throw ConfigError("multi_user.num_ues", "must be >= 1");
  for (const auto& [a, b] : mu.neighbors) {
    if (a >= mu.num_ues || b >= mu.num_ues)
      throw ConfigError("multi_user.neighbors", "edge endpoint out of range");
    if (a == b) throw ConfigError("multi_user.neighbors", "self-loops not allowed");
  }
  if (!mu.ue_ul_rate_scale.empty()) {
    if (mu.ue_ul_rate_scale.size() != mu.num_ues)
      throw ConfigError("multi_user.ue_ul_rate_scale", "length must equal num_ues");
    for (double s : mu.ue_ul_rate_scale)
      if (!(s > 0.0)) throw ConfigError("multi_user.ue_ul_rate_scale", "entries must be positive");
  }
  if (mu.d2d) validate(*mu.d2d);
}

struct MultiUserResult {
  std::vector<RunMetrics> per_ue;
  double aggregate_latency_s = 0.0;  // max completion over UEs
  double mean_mse = 0.0;
  std::vector<std::string> flags;
};

namespace detail {

inline std::string ue_label(unsigned i) { return "ue:" + std::to_string(i); }

inline double ue_scale(const MultiUserConfig& mu, unsigned i) {
  return mu.ue_ul_rate_scale.empty() ? 1.0 : mu.ue_ul_rate_scale[i];
}

inline ChannelSpec d2d_spec(const MultiUserConfig& mu, const MechanismConfig& mech) {
  ChannelSpec d2d = mu.d2d.value_or(mech.ul);
  d2d.kind = LinkKind::D2D;
  return d2d;
}

inline void finish_multiuser(MultiUserResult& r) {
  double mse = 0.0;
  for (const RunMetrics& m : r.per_ue) {
    r.aggregate_latency_s = std::max(r.aggregate_latency_s, m.t_e2e_s);
    mse += m.distortion.mse;
    for (const std::string& f : m.flags) r.flags.push_back(f);
  }
  r.mean_mse = mse / static_cast<double>(r.per_ue.size());
}

}  // namespace detail

/**
 * Multi-user generation. Per-UE streams are substream(stream, "ue:{i}") and
 * the label layout inside each UE matches the single-user runners, so a
 * one-UE Individual or CoordinatedFused run is value-identical to the
 * corresponding single-user run on that substream.
 *
 * Individual: every UE runs the configured mechanism on its own.
 * DecentralizedShared: UEs encode, broadcast over D2D, fuse own + received
 * neighbor features (mean), and generate locally; an isolated UE generates
 * from its own feature alone and records a missing-feature flag.
 * CoordinatedFused: all UEs upload; the server waits for the slowest, fuses,
 * generates, and optionally downlinks the fused feature to each UE.
 *
 * Injected features, when provided, supply one boundary tensor per UE.
 */
inline MultiUserResult run_multiuser(const MultiUserConfig& mu, const MechanismConfig& mech,
                                     RngStream stream,
                                     std::span<const FeatureTensor> features = {}) {
  validate(mu);
  validate(mech);
  if (mech.scheme == Scheme::Centralized)
    throw ConfigError("multi_user.mode", "multi-user modes require a split scheme");
  if (mu.mode != MultiUserMode::Individual && mech.mechanism != Mechanism::U2E)
    throw ConfigError("multi_user.mode",
                      "shared and fused modes are defined over the U2E mechanism");
  if (!features.empty() && features.size() != mu.num_ues)
    throw ShapeError("run_multiuser: need one injected feature per UE");

  const unsigned n = mu.num_ues;
  std::vector<RngStream> streams;
  streams.reserve(n);
  for (unsigned i = 0; i < n; ++i)
    streams.push_back(substream(stream, detail::ue_label(i)));

  MultiUserResult r;
  r.per_ue.reserve(n);

  if (mu.mode == MultiUserMode::Individual) {
    for (unsigned i = 0; i < n; ++i) {
      MechanismConfig cfg = mech;
      cfg.ul.rate_bps *= detail::ue_scale(mu, i);
      r.per_ue.push_back(
          run_mechanism(cfg, streams[i], features.empty() ? nullptr : &features[i]));
    }
    detail::finish_multiuser(r);
    return r;
  }

  // Shared state for the cooperative modes.
  const PipelineSplit split = split_at(mech.pipeline, mech.pipeline.split_index);
  std::vector<FeatureTensor> x(n);
  for (unsigned i = 0; i < n; ++i)
    x[i] = features.empty() ? synth_boundary_tensor(mech.pipeline, streams[i]) : features[i];

  if (mu.mode == MultiUserMode::DecentralizedShared) {
    std::vector<std::vector<unsigned>> adj(n);
    for (const auto& [a, b] : mu.neighbors) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
    for (auto& v : adj) {
      std::sort(v.begin(), v.end());
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    const std::uint64_t share_bits = mech.ul_codec.payload_bits(x[0].shape);
    for (unsigned i = 0; i < n; ++i) {
      RunMetrics m;
      m.payload_bits_ul = adj[i].empty() ? 0 : share_bits;
      double t_arrivals = 0.0;
      std::vector<FeatureTensor> pool;
      std::vector<FeatureTensor> ideal;
      pool.push_back(x[i]);
      ideal.push_back(x[i]);
      for (unsigned j : adj[i]) {
        ChannelSpec d2d = detail::d2d_spec(mu, mech);
        d2d.rate_bps *= detail::ue_scale(mu, j);  // sender j's radio
        const TransportResult got = mech.ul_codec.transport(
            x[j], d2d, substream(streams[i], "d2d:" + std::to_string(j)));
        t_arrivals = std::max(t_arrivals, split.server_s + got.airtime_s);
        pool.push_back(got.received);
        ideal.push_back(x[j]);
      }
      const FeatureTensor fused = fuse_mean(pool);
      const FeatureTensor reference = fuse_mean(ideal);
      double t = split.server_s;
      m.timeline.push_back({"encode_ue", t});
      if (!adj[i].empty()) {
        t = std::max(t, t_arrivals);
        m.timeline.push_back({"share_d2d", t});
      } else {
        m.flags.push_back("missing_feature:" + detail::ue_label(i));
      }
      m.timeline.push_back({"fuse_ue", t});
      m.timeline.push_back({"generate_ue", t += split.device_s});
      m.t_e2e_s = t;
      m.t_compute_s = split.server_s + split.device_s;
      m.t_tx_s = m.t_e2e_s - m.t_compute_s;
      m.distortion = distortion_report(reference, fused, mech.psnr_peak);
      audit_timeline(m);
      r.per_ue.push_back(std::move(m));
    }
    detail::finish_multiuser(r);
    return r;
  }

  // CoordinatedFused: server-side fusion over everyone's uploads.
  std::vector<TransportResult> ups(n);
  double t_all = 0.0;
  for (unsigned i = 0; i < n; ++i) {
    ChannelSpec ul = mech.ul;
    ul.rate_bps *= detail::ue_scale(mu, i);
    ups[i] = mech.ul_codec.transport(x[i], ul, substream(streams[i], "ul"));
    t_all = std::max(t_all, split.server_s + ups[i].airtime_s);
  }
  std::vector<FeatureTensor> pool;
  pool.reserve(n);
  for (const TransportResult& u : ups) pool.push_back(u.received);
  const FeatureTensor fused = fuse_mean(pool);
  const FeatureTensor reference = fuse_mean(std::span<const FeatureTensor>(x));
  const double t_done = t_all + split.device_s;
  for (unsigned i = 0; i < n; ++i) {
    RunMetrics m;
    m.payload_bits_ul = ups[i].payload_bits;
    double t = split.server_s;
    m.timeline.push_back({"encode_ue", t});
    m.timeline.push_back({"feature_ul", t += ups[i].airtime_s});
    m.timeline.push_back({"fuse_es", t = t_all});
    m.timeline.push_back({"generate_es", t = t_done});
    if (mu.coordinated_dl) {
      const TransportResult down =
          mech.dl_codec.transport(fused, mech.dl, substream(streams[i], "dl"));
      m.payload_bits_dl = down.payload_bits;
      m.timeline.push_back({"result_dl", t += down.airtime_s});
      m.distortion = distortion_report(reference, down.received, mech.psnr_peak);
    } else {
      m.distortion = distortion_report(reference, fused, mech.psnr_peak);
    }
    m.t_e2e_s = t;
    m.t_compute_s = split.server_s + split.device_s;
    m.t_tx_s = m.t_e2e_s - m.t_compute_s;
    m.distortion_secondary = distortion_report(reference, fused, mech.psnr_peak);
    audit_timeline(m);
    r.per_ue.push_back(std::move(m));
  }
  detail::finish_multiuser(r);
  return r;
}

}  // namespace megsim
