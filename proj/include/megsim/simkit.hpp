#pragma once

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "megsim/codec.hpp"
#include "megsim/core.hpp"
#include "megsim/pipeline.hpp"
#include "megsim/protocol.hpp"

namespace megsim {

enum class MergeStrategy { blocked, fitted };

inline std::string_view to_string(MergeStrategy s) {
  return s == MergeStrategy::blocked ? "blocked" : "fitted";
}

/** How the analog codec is fitted when an E2E_MEG scheme is requested. */
struct JsccSettings {
  std::size_t merged_dim = 0;
  MergeStrategy merge_strategy = MergeStrategy::blocked;
  unsigned calibration_tensors = 4;
  unsigned bits_per_symbol = 16;
};

/**
 * A full experiment description: one mechanism, one or more schemes, an SNR
 * list, and repetitions. Per-link SNR is driven by the snr_db list at run
 * time; channel specs in the scenario carry rates only.
 */
struct Scenario {
  std::string name = "scenario";
  Mechanism mechanism = Mechanism::E2U;
  std::vector<Scheme> schemes;
  std::vector<double> snr_db;
  unsigned repetitions = 1;
  std::uint64_t master_seed = 0;
  PipelineModel pipeline;
  ChannelSpec ul{};
  ChannelSpec dl{};
  std::optional<ChannelSpec> d2d{};
  DigitalCodecConfig digital{};
  JsccSettings jscc{};
  std::optional<MultiUserConfig> multi_user{};
  std::optional<std::size_t> seu_dl_split{};
  std::uint64_t prompt_bits = 0;
  double gate_alpha = 0.5;
  double psnr_peak = 1.0;
};

inline void validate(const Scenario& s) {
  if (s.name.empty()) throw ConfigError("name", "must be non-empty");
  if (s.name.find_first_of(",\"\n") != std::string::npos)
    throw ConfigError("name", "must not contain commas, quotes, or newlines");
  if (s.schemes.empty()) throw ConfigError("schemes", "must be non-empty");
  if (s.snr_db.empty()) throw ConfigError("snr_db", "must be non-empty");
  for (double v : s.snr_db)
    if (!std::isfinite(v)) throw ConfigError("snr_db", "entries must be finite");
  if (s.repetitions < 1) throw ConfigError("repetitions", "must be >= 1");
  validate(s.pipeline);
  validate(s.ul);
  validate(s.dl);
  if (s.d2d) validate(*s.d2d);
  validate(s.digital);
  bool wants_jscc = false;
  for (Scheme sc : s.schemes) wants_jscc = wants_jscc || sc == Scheme::E2E_MEG;
  if (wants_jscc) {
    const std::size_t boundary = shape_elements(s.pipeline.boundary_shape);
    if (s.jscc.merged_dim < 1 || s.jscc.merged_dim > boundary)
      throw ConfigError("codecs.jscc.merged_dim", "must be in [1, boundary volume]");
    if (s.jscc.calibration_tensors < 1)
      throw ConfigError("codecs.jscc.calibration_tensors", "must be >= 1");
    if (s.jscc.bits_per_symbol < 1)
      throw ConfigError("codecs.jscc.bits_per_symbol", "must be >= 1");
  }
  if (s.multi_user) validate(*s.multi_user);
  if (!(s.gate_alpha >= 0.0 && s.gate_alpha <= 1.0))
    throw ConfigError("gate_alpha", "must be in [0, 1]");
  if (!(s.psnr_peak > 0.0)) throw ConfigError("psnr_peak", "must be positive");
  // Mechanism-level constraints surface early with config paths.
  if (s.mechanism == Mechanism::SEU && !s.seu_dl_split)
    throw ConfigError("seu_dl_split", "required for the SEU mechanism");
  if (s.mechanism == Mechanism::SEU &&
      (*s.seu_dl_split < s.pipeline.split_index ||
       *s.seu_dl_split > s.pipeline.stages.size()))
    throw ConfigError("seu_dl_split", "must be in [split_index, stage count]");
  for (Scheme sc : s.schemes) {
    if (sc == Scheme::Centralized && s.mechanism != Mechanism::E2U &&
        s.mechanism != Mechanism::U2E)
      throw ConfigError("schemes", "Centralized supports only E2U and U2E");
    if (sc == Scheme::Centralized && s.multi_user)
      throw ConfigError("schemes", "multi-user modes require a split scheme");
    if (sc != Scheme::Centralized &&
        (s.mechanism == Mechanism::E2U || s.mechanism == Mechanism::U2E) &&
        (s.pipeline.split_index == 0 ||
         s.pipeline.split_index == s.pipeline.stages.size()))
      throw ConfigError("pipeline.split_index",
                        "split must leave at least one stage on each side");
  }
  if (s.multi_user && s.multi_user->mode != MultiUserMode::Individual &&
      s.mechanism != Mechanism::U2E)
    throw ConfigError("multi_user.mode",
                      "shared and fused modes are defined over the U2E mechanism");
}

/** Scenario plus the analog codec fitted once from seeded calibration data. */
struct CompiledScenario {
  Scenario scenario;
  std::shared_ptr<const JsccCodecConfig> jscc{};
};

inline CompiledScenario compile_scenario(const Scenario& s) {
  validate(s);
  CompiledScenario c;
  c.scenario = s;
  bool wants_jscc = false;
  for (Scheme sc : s.schemes) wants_jscc = wants_jscc || sc == Scheme::E2E_MEG;
  if (wants_jscc) {
    const RngStream cal = substream(root_stream(s.master_seed), "calibration");
    std::vector<FeatureTensor> calibration;
    calibration.reserve(s.jscc.calibration_tensors);
    for (unsigned t = 0; t < s.jscc.calibration_tensors; ++t)
      calibration.push_back(
          gaussian_tensor(std::span<const std::size_t>(s.pipeline.boundary_shape),
                          substream(cal, "t:" + std::to_string(t))));
    const std::size_t boundary = shape_elements(s.pipeline.boundary_shape);
    JsccCodecConfig cfg;
    if (s.jscc.merge_strategy == MergeStrategy::blocked)
      cfg = make_jscc_config(blocked_merge_map(boundary, s.jscc.merged_dim), calibration);
    else
      cfg = make_jscc_config(fit_merge_map(calibration, s.jscc.merged_dim), calibration);
    c.jscc = std::make_shared<const JsccCodecConfig>(std::move(cfg));
  }
  return c;
}

/**
 * The per-scheme run setup at one SNR. Centralized moves the whole pipeline
 * to one side and ships the raw fp16 image; MEG ships the boundary feature
 * digitally; E2E_MEG ships merged analog symbols.
 */
inline MechanismConfig mechanism_for(const CompiledScenario& c, Scheme scheme,
                                     double snr_db) {
  const Scenario& s = c.scenario;
  MechanismConfig cfg;
  cfg.mechanism = s.mechanism;
  cfg.scheme = scheme;
  cfg.ul = s.ul;
  cfg.dl = s.dl;
  cfg.ul.kind = LinkKind::UL;
  cfg.dl.kind = LinkKind::DL;
  cfg.ul.snr_db = snr_db;
  cfg.dl.snr_db = snr_db;
  cfg.pipeline = s.pipeline;
  cfg.prompt_bits = s.prompt_bits;
  cfg.seu_dl_split = s.seu_dl_split;
  cfg.gate_alpha = s.gate_alpha;
  cfg.psnr_peak = s.psnr_peak;
  switch (scheme) {
    case Scheme::Centralized:
      cfg.pipeline.split_index =
          s.mechanism == Mechanism::E2U ? s.pipeline.stages.size() : 0;
      cfg.pipeline.boundary_shape = s.pipeline.image_shape;
      cfg.ul_codec = raw_image_codec(s.digital);
      cfg.dl_codec = raw_image_codec(s.digital);
      break;
    case Scheme::MEG:
      cfg.ul_codec = digital_codec(s.digital);
      cfg.dl_codec = digital_codec(s.digital);
      break;
    case Scheme::E2E_MEG:
      cfg.ul_codec = jscc_codec(c.jscc, s.jscc.bits_per_symbol);
      cfg.dl_codec = jscc_codec(c.jscc, s.jscc.bits_per_symbol);
      break;
  }
  return cfg;
}

/** One flattened run result; (scenario, scheme, snr_db, rep) is unique. */
struct RunRecord {
  std::string scenario;
  Scheme scheme = Scheme::MEG;
  Mechanism mechanism = Mechanism::E2U;
  double snr_db = 0.0;
  unsigned rep = 0;
  std::uint64_t payload_bits_ul = 0;
  std::uint64_t payload_bits_dl = 0;
  double t_tx_s = 0.0;
  double t_compute_s = 0.0;
  double t_e2e_s = 0.0;
  double mse = 0.0;
  double psnr_db = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {

/** Shortest round-trip decimal form, so stream labels are exact and stable. */
inline std::string format_double_shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string point_label(double snr_db, unsigned rep) {
  return "snr:" + format_double_shortest(snr_db) + "/rep:" + std::to_string(rep);
}

inline double psnr_from_mse(double mse_value, double peak) {
  if (mse_value == 0.0) return kPsnrCapDb;
  return 10.0 * std::log10(peak * peak / mse_value);
}

inline RunRecord make_record(const CompiledScenario& c, Scheme scheme, double snr_db,
                             unsigned rep, RngStream point) {
  const Scenario& s = c.scenario;
  const MechanismConfig mech = mechanism_for(c, scheme, snr_db);
  RunRecord r;
  r.scenario = s.name;
  r.scheme = scheme;
  r.mechanism = s.mechanism;
  r.snr_db = snr_db;
  r.rep = rep;
  r.seed = point.stream;
  if (s.multi_user) {
    MultiUserConfig mu = *s.multi_user;
    if (!mu.d2d) mu.d2d = s.d2d;  // scenario-level D2D spec, when configured
    if (mu.d2d) mu.d2d->snr_db = snr_db;
    const MultiUserResult res = run_multiuser(mu, mech, point);
    // Flattened view: payloads sum over UEs; timing follows the critical UE.
    std::size_t crit = 0;
    for (std::size_t i = 0; i < res.per_ue.size(); ++i) {
      r.payload_bits_ul += res.per_ue[i].payload_bits_ul;
      r.payload_bits_dl += res.per_ue[i].payload_bits_dl;
      if (res.per_ue[i].t_e2e_s > res.per_ue[crit].t_e2e_s) crit = i;
    }
    r.t_tx_s = res.per_ue[crit].t_tx_s;
    r.t_compute_s = res.per_ue[crit].t_compute_s;
    r.t_e2e_s = res.aggregate_latency_s;
    r.mse = res.mean_mse;
    r.psnr_db = psnr_from_mse(res.mean_mse, s.psnr_peak);
    return r;
  }
  const RunMetrics m = run_mechanism(mech, point);
  r.payload_bits_ul = m.payload_bits_ul;
  r.payload_bits_dl = m.payload_bits_dl;
  r.t_tx_s = m.t_tx_s;
  r.t_compute_s = m.t_compute_s;
  r.t_e2e_s = m.t_e2e_s;
  r.mse = m.distortion.mse;
  r.psnr_db = m.distortion.psnr_db;
  return r;
}

}  // namespace detail

/**
 * Runs every (snr, repetition, scheme) cell. Each (snr, rep) point gets the
 * substream "snr:{v}/rep:{i}" of the master seed, shared by all schemes so
 * scheme comparisons are paired. Records are ordered by (snr index, rep,
 * scheme index); with n_threads > 1 points run concurrently into
 * preassigned slots, so output is identical to the serial order.
 */
inline std::vector<RunRecord> run_scenario(const Scenario& s, unsigned n_threads = 1) {
  const CompiledScenario c = compile_scenario(s);
  const std::size_t n_points = s.snr_db.size() * s.repetitions;
  const std::size_t n_schemes = s.schemes.size();
  std::vector<RunRecord> records(n_points * n_schemes);
  const RngStream master = root_stream(s.master_seed);

  auto run_point = [&](std::size_t p) {
    const std::size_t snr_idx = p / s.repetitions;
    const unsigned rep = static_cast<unsigned>(p % s.repetitions);
    const double snr = s.snr_db[snr_idx];
    const RngStream point = substream(master, detail::point_label(snr, rep));
    for (std::size_t si = 0; si < n_schemes; ++si)
      records[p * n_schemes + si] =
          detail::make_record(c, s.schemes[si], snr, rep, point);
  };

  if (n_threads <= 1 || n_points <= 1) {
    for (std::size_t p = 0; p < n_points; ++p) run_point(p);
    return records;
  }

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t p = next.fetch_add(1);
      if (p >= n_points) return;
      try {
        run_point(p);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min<std::size_t>(n_threads, n_points);
  pool.reserve(n);
  for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return records;
}

/** Inclusive arithmetic grid; a step larger than the range yields just `from`. */
inline std::vector<double> snr_grid(double from_db, double to_db, double step_db) {
  if (!(step_db > 0.0)) throw ConfigError("sweep.step", "must be positive");
  if (!(from_db <= to_db)) throw ConfigError("sweep.from", "must be <= sweep.to");
  const std::size_t count =
      static_cast<std::size_t>(std::floor((to_db - from_db) / step_db + 1e-9)) + 1;
  std::vector<double> grid(count);
  for (std::size_t k = 0; k < count; ++k) grid[k] = from_db + static_cast<double>(k) * step_db;
  return grid;
}

inline std::vector<RunRecord> sweep_snr(const Scenario& s, double from_db, double to_db,
                                        double step_db, unsigned n_threads = 1) {
  Scenario swept = s;
  swept.snr_db = snr_grid(from_db, to_db, step_db);
  return run_scenario(swept, n_threads);
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct SchemeSnrAggregate {
  Scheme scheme = Scheme::MEG;
  double snr_db = 0.0;
  unsigned count = 0;
  double mean_t_tx_s = 0.0;
  double mean_t_compute_s = 0.0;
  double mean_t_e2e_s = 0.0;
  double mean_mse = 0.0;
  double mean_psnr_db = 0.0;
};

/**
 * Mean per (scheme, snr) over repetitions. Records are summed in sorted key
 * order, so the result is bit-stable no matter how the input was produced or
 * shuffled.
 */
inline std::vector<SchemeSnrAggregate> aggregate_records(std::span<const RunRecord> records) {
  std::map<std::pair<int, double>, SchemeSnrAggregate> groups;
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const RunRecord& ra = records[a];
    const RunRecord& rb = records[b];
    if (ra.scheme != rb.scheme) return static_cast<int>(ra.scheme) < static_cast<int>(rb.scheme);
    if (ra.snr_db != rb.snr_db) return ra.snr_db < rb.snr_db;
    return ra.rep < rb.rep;
  });
  for (std::size_t i : order) {
    const RunRecord& r = records[i];
    SchemeSnrAggregate& g = groups[{static_cast<int>(r.scheme), r.snr_db}];
    g.scheme = r.scheme;
    g.snr_db = r.snr_db;
    ++g.count;
    g.mean_t_tx_s += r.t_tx_s;
    g.mean_t_compute_s += r.t_compute_s;
    g.mean_t_e2e_s += r.t_e2e_s;
    g.mean_mse += r.mse;
    g.mean_psnr_db += r.psnr_db;
  }
  std::vector<SchemeSnrAggregate> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) {
    const double n = static_cast<double>(g.count);
    g.mean_t_tx_s /= n;
    g.mean_t_compute_s /= n;
    g.mean_t_e2e_s /= n;
    g.mean_mse /= n;
    g.mean_psnr_db /= n;
    out.push_back(g);
  }
  return out;
}

inline std::vector<SchemeSnrAggregate> compare_schemes(const Scenario& s,
                                                       unsigned n_threads = 1) {
  const std::vector<RunRecord> records = run_scenario(s, n_threads);
  return aggregate_records(records);
}

/**
 * Smallest grid SNR v such that MEG mean MSE < E2E_MEG mean MSE at every grid
 * point >= v; nullopt when digital transport never wins or a curve is absent.
 */
inline std::optional<double> crossover_snr(std::span<const SchemeSnrAggregate> table) {
  std::map<double, std::pair<std::optional<double>, std::optional<double>>> by_snr;
  for (const SchemeSnrAggregate& g : table) {
    if (g.scheme == Scheme::MEG) by_snr[g.snr_db].first = g.mean_mse;
    if (g.scheme == Scheme::E2E_MEG) by_snr[g.snr_db].second = g.mean_mse;
  }
  std::optional<double> best;
  for (auto it = by_snr.rbegin(); it != by_snr.rend(); ++it) {
    const auto& [meg, e2e] = it->second;
    if (!meg || !e2e) return std::nullopt;
    if (*meg < *e2e)
      best = it->first;
    else
      break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader =
    "scenario,scheme,mechanism,snr_db,rep,payload_bits_ul,payload_bits_dl,"
    "t_tx_s,t_compute_s,t_e2e_s,mse,psnr_db,seed";

namespace detail {

inline std::string format_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

inline void write_csv(std::ostream& os, std::span<const RunRecord> records) {
  os << kCsvHeader << '\n';
  for (const RunRecord& r : records) {
    os << r.scenario << ',' << to_string(r.scheme) << ',' << to_string(r.mechanism) << ','
       << detail::format_g6(r.snr_db) << ',' << r.rep << ',' << r.payload_bits_ul << ','
       << r.payload_bits_dl << ',' << detail::format_g6(r.t_tx_s) << ','
       << detail::format_g6(r.t_compute_s) << ',' << detail::format_g6(r.t_e2e_s) << ','
       << detail::format_g6(r.mse) << ',' << detail::format_g6(r.psnr_db) << ','
       << r.seed << '\n';
  }
}

inline constexpr std::string_view kAggregateCsvHeader =
    "scheme,snr_db,count,mean_t_tx_s,mean_t_compute_s,mean_t_e2e_s,mean_mse,mean_psnr_db";

inline void write_aggregate_csv(std::ostream& os,
                                std::span<const SchemeSnrAggregate> table) {
  os << kAggregateCsvHeader << '\n';
  for (const SchemeSnrAggregate& g : table) {
    os << to_string(g.scheme) << ',' << detail::format_g6(g.snr_db) << ',' << g.count << ','
       << detail::format_g6(g.mean_t_tx_s) << ',' << detail::format_g6(g.mean_t_compute_s)
       << ',' << detail::format_g6(g.mean_t_e2e_s) << ',' << detail::format_g6(g.mean_mse)
       << ',' << detail::format_g6(g.mean_psnr_db) << '\n';
  }
}

}  // namespace megsim
