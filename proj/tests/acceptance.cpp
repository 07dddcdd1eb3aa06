// Acceptance gate: one pass/fail line per shipped guarantee, exit 0 only if
// every check holds. Each criterion prints its measured numbers on failure.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "megsim/config.hpp"
#include "megsim/simkit.hpp"

using namespace megsim;
namespace fs = std::filesystem;

namespace {

int g_checks = 0;
int g_failures = 0;
bool g_criterion_ok = true;

void check(bool ok, const std::string& what) {
  ++g_checks;
  if (!ok) {
    ++g_failures;
    g_criterion_ok = false;
    std::printf("       FAIL  %s\n", what.c_str());
  }
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const std::string kCfgDir = MEGSIM_CONFIG_DIR;
const std::string kBin = MEGSIM_CLI_BIN;

struct CaseStudy {
  std::vector<RunRecord> records;
  double elapsed_s = 0.0;
};

const CaseStudy& case_study() {
  static const CaseStudy cs = [] {
    const Scenario s = load_scenario_file(kCfgDir + "/case_study.json");
    const auto t0 = std::chrono::steady_clock::now();
    CaseStudy out;
    out.records = run_scenario(s);
    out.elapsed_s = seconds_since(t0);
    return out;
  }();
  return cs;
}

const RunRecord* find_record(const std::vector<RunRecord>& rs, Scheme s) {
  for (const RunRecord& r : rs)
    if (r.scheme == s) return &r;
  return nullptr;
}

// --- 1: transmission latency -----------------------------------------------

void c1() {
  const CaseStudy& cs = case_study();
  check(cs.elapsed_s < 1.0, fmt("latency table took %.3f s, budget 1 s", cs.elapsed_s));
  const struct {
    Scheme scheme;
    double t_tx;
  } want[] = {{Scheme::Centralized, 50.331648},
              {Scheme::MEG, 1.048576},
              {Scheme::E2E_MEG, 0.58}};
  for (const auto& w : want) {
    const RunRecord* r = find_record(cs.records, w.scheme);
    if (!r) {
      check(false, std::string("no record for ") + std::string(to_string(w.scheme)));
      continue;
    }
    check(std::abs(r->t_tx_s - w.t_tx) <= 0.01,
          std::string(to_string(w.scheme)) +
              fmt(": t_tx %.6f s, expected %.6f +- 0.01", r->t_tx_s, w.t_tx));
  }
}

// --- 2: end-to-end latency --------------------------------------------------

void c2() {
  const CaseStudy& cs = case_study();
  const struct {
    Scheme scheme;
    double t_e2e;
  } want[] = {{Scheme::Centralized, 57.911648},
              {Scheme::MEG, 8.628576},
              {Scheme::E2E_MEG, 8.16}};
  for (const auto& w : want) {
    const RunRecord* r = find_record(cs.records, w.scheme);
    if (!r) {
      check(false, std::string("no record for ") + std::string(to_string(w.scheme)));
      continue;
    }
    check(std::abs(r->t_e2e_s - w.t_e2e) <= 0.02,
          std::string(to_string(w.scheme)) +
              fmt(": t_e2e %.6f s, expected %.6f +- 0.02", r->t_e2e_s, w.t_e2e));
    check(std::abs(r->t_compute_s - 7.58) <= 1e-9,
          std::string(to_string(w.scheme)) +
              fmt(": t_compute %.9f s, expected 7.58", r->t_compute_s));
  }
}

// --- 3: channel fidelity -----------------------------------------------------

void c3() {
  const RngStream root = root_stream(20260817);

  for (const double db : {-10.0, -5.0, 0.0, 5.0, 10.0}) {
    const double p = ber_bpsk(snr_db_to_linear(db));
    const std::size_t n = std::size_t{1} << 21;  // 2,097,152 bits
    ChannelSpec ch;
    ch.snr_db = db;
    const BitPayload got =
        transmit_bits(BitPayload::zeros(n), ch,
                      substream(root, "ber:" + std::to_string(static_cast<int>(db))),
                      DigitalChannelModel::bpsk_symbols);
    std::uint64_t flips = 0;
    for (const std::uint64_t w : got.words) flips += std::popcount(w);
    const double phat = static_cast<double>(flips) / static_cast<double>(n);
    const double tol = 3.0 * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    check(std::abs(phat - p) <= tol,
          fmt("BER at %g dB: measured %.8g, analytic %.8g outside 3 sigma", db, phat, p));
  }

  for (const double db : {-10.0, 0.0, 10.0}) {
    const double g = snr_db_to_linear(db);
    const std::size_t n = 100000;
    const RngStream s = substream(root, "lmmse:" + std::to_string(static_cast<int>(db)));
    const std::vector<FeatureTensor> cal = {gaussian_tensor({n}, substream(s, "cal0")),
                                            gaussian_tensor({n}, substream(s, "cal1"))};
    const JsccCodecConfig cfg = make_jscc_config(identity_merge_map(n), cal);
    const FeatureTensor x = gaussian_tensor({n}, substream(s, "x"));
    ChannelSpec ch;
    ch.snr_db = db;
    const FeatureTensor y = transmit_analog(jscc_encode(x, cfg), ch, substream(s, "noise"));
    const double measured = distortion_report(x, jscc_decode(y, cfg, g)).mse;
    const double expected = 1.0 / (1.0 + g);
    check(std::abs(measured - expected) <= 0.03 * expected,
          fmt("LMMSE MSE at gamma %.2g: measured %.6g, expected %.6g +- 3%%", g, measured,
              expected));
  }
}

// --- 4: distortion crossover -------------------------------------------------

void c4() {
  Scenario s = load_scenario_file(kCfgDir + "/case_study_crossover.json");
  s.snr_db = snr_grid(-10.0, 10.0, 1.0);
  check(s.repetitions >= 20, fmt("config repetitions %g below 20", s.repetitions));
  const unsigned threads = std::max(1u, std::thread::hardware_concurrency());

  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<RunRecord> records = run_scenario(s, threads);
  const double elapsed = seconds_since(t0);
  check(elapsed < 60.0, fmt("sweep took %.1f s, budget 60 s", elapsed));

  const std::vector<SchemeSnrAggregate> table = aggregate_records(records);
  const auto mean_mse = [&](Scheme sc, double snr) -> std::optional<double> {
    for (const SchemeSnrAggregate& g : table)
      if (g.scheme == sc && g.snr_db == snr) return g.mean_mse;
    return std::nullopt;
  };

  for (double snr = -10.0; snr <= -5.0; snr += 1.0) {
    const auto meg = mean_mse(Scheme::MEG, snr);
    const auto e2e = mean_mse(Scheme::E2E_MEG, snr);
    if (!meg || !e2e) {
      check(false, fmt("missing aggregate at %g dB", snr));
      continue;
    }
    check(*e2e < *meg,
          fmt("analog should win at %g dB: e2e %.4g vs meg %.4g", snr, *e2e, *meg));
  }

  const std::optional<double> cross = crossover_snr(table);
  check(cross.has_value(), "no crossover SNR found on the grid");
  if (cross) {
    check(*cross <= 10.0, fmt("crossover at %g dB, required <= 10", *cross));
    for (double snr = *cross; snr <= 10.0; snr += 1.0) {
      const auto meg = mean_mse(Scheme::MEG, snr);
      const auto e2e = mean_mse(Scheme::E2E_MEG, snr);
      check(meg && e2e && *meg < *e2e,
            fmt("digital should win at %g dB past the crossover", snr));
    }
  }
}

// --- 5: codec properties ------------------------------------------------------

double roundtrip_mse(const FeatureTensor& t, const MergeMap& m) {
  return distortion_report(t, merge_expand(merge_reduce(t, m), m)).mse;
}

void c5() {
  const RngStream root = root_stream(555);

  const FeatureTensor gauss = gaussian_tensor({std::size_t{1} << 16}, substream(root, "half"));
  const double half_mse = distortion_report(gauss, digital_codec().wire_roundtrip(gauss)).mse;
  check(half_mse <= 1e-6, fmt("fp16 roundtrip MSE %.3g above 1e-6", half_mse));

  MergeMap map = blocked_merge_map(65536, 36250);
  std::vector<FeatureTensor> cal;
  for (int i = 0; i < 6; ++i)
    cal.push_back(gaussian_tensor({std::size_t{65536}},
                                  substream(root, "cal:" + std::to_string(i))));
  const double floor = calibrate_merge_floor(map, cal);

  double on_cal = 0.0;
  for (const FeatureTensor& t : cal) on_cal += roundtrip_mse(t, map);
  on_cal /= static_cast<double>(cal.size());
  check(std::abs(on_cal - floor) <= 0.01 * floor,
        fmt("merge MSE on calibration data %.6g vs predicted floor %.6g", on_cal, floor));

  double fresh = 0.0;
  for (int i = 0; i < 4; ++i)
    fresh += roundtrip_mse(
        gaussian_tensor({std::size_t{65536}}, substream(root, "fresh:" + std::to_string(i))),
        map);
  fresh /= 4.0;
  check(std::abs(fresh - floor) <= 0.01 * floor,
        fmt("merge MSE on fresh data %.6g vs predicted floor %.6g", fresh, floor));

  // Top-k pruning against the exhaustive subset oracle, identical accumulation
  // order on both sides so equality is exact.
  const auto subset_mse = [](const FeatureTensor& t, unsigned mask) {
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double v = t.values[i];
      if (mask & (1u << i)) {
        const double kept = half_bits_to_double(
            float_to_half_bits(static_cast<float>(std::clamp(v, -kHalfMax, kHalfMax))));
        acc += (v - kept) * (v - kept);
      } else {
        acc += v * v;
      }
    }
    return acc / static_cast<double>(t.size());
  };
  for (const std::size_t keep : {std::size_t{1}, std::size_t{3}, std::size_t{6},
                                 std::size_t{11}}) {
    const FeatureTensor t =
        gaussian_tensor({std::size_t{12}}, substream(root, "prune:" + std::to_string(keep)));
    const PrunedPayload p = prune_topk(t, keep);
    unsigned got_mask = 0;
    for (const std::uint32_t i : p.indices) got_mask |= 1u << i;
    const double got = subset_mse(t, got_mask);
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 0; mask < (1u << 12); ++mask) {
      if (std::popcount(mask) != static_cast<int>(keep)) continue;
      best = std::min(best, subset_mse(t, mask));
    }
    check(got == best, fmt("top-%g pruning MSE %.17g vs oracle %.17g",
                           static_cast<double>(keep), got, best));
  }
}

// --- 6: protocol invariants ----------------------------------------------------

PipelineModel acceptance_pipeline() {
  PipelineModel p;
  p.stages = {{"enc", 0.2, 1, {}}, {"mid", 0.3, 2, {}}, {"dec", 0.1, 1, {}}};
  p.split_index = 1;
  p.boundary_shape = {16};
  p.image_shape = {8, 8};
  return p;
}

MechanismConfig acceptance_mech(Mechanism m) {
  MechanismConfig cfg;
  cfg.mechanism = m;
  cfg.pipeline = acceptance_pipeline();
  cfg.ul.rate_bps = 1e5;
  cfg.dl.rate_bps = 1e5;
  cfg.ul.snr_db = 40.0;
  cfg.dl.snr_db = 40.0;
  cfg.ul.kind = LinkKind::UL;
  cfg.dl.kind = LinkKind::DL;
  cfg.ul_codec = digital_codec();
  cfg.dl_codec = digital_codec();
  if (m == Mechanism::SEU) cfg.seu_dl_split = 2;
  return cfg;
}

void c6() {
  const RngStream root = root_stream(6006);
  int audits = 0;
  const auto audited = [&](const RunMetrics& m) {
    audit_timeline(m);
    ++audits;
    return m;
  };

  // PEU: both devices must hold bitwise-identical fused tensors even when the
  // two links run different codecs.
  {
    MechanismConfig cfg = acceptance_mech(Mechanism::PEU);
    cfg.ul_codec = digital_codec(DigitalCodecConfig{16, 6.0});
    const FeatureGate gate = uniform_gate({16}, 0.37);
    PeuViews views;
    const RunMetrics m =
        audited(run_peu(cfg, substream(root, "peu"), gate, nullptr, &views));
    check(views.fused_es.shape == views.fused_ue.shape, "fused view shapes differ");
    check(views.fused_es.values.size() == views.fused_ue.values.size() &&
              std::memcmp(views.fused_es.values.data(), views.fused_ue.values.data(),
                          views.fused_es.values.size() * sizeof(double)) == 0,
          "fused views are not bit-identical across devices");
    check(m.distortion_secondary.has_value() &&
              m.distortion.mse == m.distortion_secondary->mse,
          "device-side and server-side distortion differ on identical views");
  }

  // SEU: end-to-end latency is exactly the left-to-right sum of its five
  // timeline terms (head compute, first hop, middle compute, return hop, tail).
  {
    const MechanismConfig cfg = acceptance_mech(Mechanism::SEU);
    const RunMetrics m = audited(run_mechanism(cfg, substream(root, "seu")));
    check(m.timeline.size() == 5,
          fmt("SEU timeline has %g events, expected 5",
              static_cast<double>(m.timeline.size())));
    const auto stage_sum = [&](std::size_t from, std::size_t to) {
      double acc = 0.0;
      for (std::size_t i = from; i < to; ++i)
        acc += cfg.pipeline.stages[i].compute_seconds *
               static_cast<double>(cfg.pipeline.stages[i].repeat);
      return acc;
    };
    const double expected =
        stage_sum(0, cfg.pipeline.split_index) + tx_latency_s(m.payload_bits_dl, cfg.dl) +
        stage_sum(cfg.pipeline.split_index, *cfg.seu_dl_split) +
        tx_latency_s(m.payload_bits_ul, cfg.ul) +
        stage_sum(*cfg.seu_dl_split, cfg.pipeline.stages.size());
    check(m.t_e2e_s == expected,
          fmt("SEU t_e2e %.17g != five-term sum %.17g", m.t_e2e_s, expected));
  }

  // Fleet ordering on a symmetric config: per device and in aggregate,
  // Individual <= DecentralizedShared <= CoordinatedFused.
  {
    const MechanismConfig mech = acceptance_mech(Mechanism::U2E);
    MultiUserConfig mu;
    mu.num_ues = 3;
    mu.neighbors = {{0, 1}, {0, 2}, {1, 2}};
    const RngStream fleet = substream(root, "fleet");

    mu.mode = MultiUserMode::Individual;
    const MultiUserResult ind = run_multiuser(mu, mech, fleet);
    mu.mode = MultiUserMode::DecentralizedShared;
    const MultiUserResult dec = run_multiuser(mu, mech, fleet);
    mu.mode = MultiUserMode::CoordinatedFused;
    const MultiUserResult coord = run_multiuser(mu, mech, fleet);

    for (unsigned i = 0; i < mu.num_ues; ++i) {
      const double a = ind.per_ue[i].t_e2e_s;
      const double b = dec.per_ue[i].t_e2e_s;
      const double c = coord.per_ue[i].t_e2e_s;
      check(a <= b && b <= c,
            fmt("device latency ordering violated: %.6g / %.6g / %.6g", a, b, c));
    }
    check(ind.aggregate_latency_s <= dec.aggregate_latency_s &&
              dec.aggregate_latency_s <= coord.aggregate_latency_s,
          fmt("aggregate ordering violated: %.6g / %.6g / %.6g", ind.aggregate_latency_s,
              dec.aggregate_latency_s, coord.aggregate_latency_s));
    check(ind.flags.empty() && dec.flags.empty() && coord.flags.empty(),
          "unexpected flags on a fully connected fleet");
    for (const MultiUserResult* r : {&ind, &dec, &coord})
      for (const RunMetrics& m : r->per_ue) audited(m);
  }

  // Every mechanism and every case-study scheme passes the timeline audit.
  for (const Mechanism m :
       {Mechanism::E2U, Mechanism::U2E, Mechanism::SEU, Mechanism::PEU})
    audited(run_mechanism(acceptance_mech(m), substream(root, "audit")));
  {
    const Scenario s = load_scenario_file(kCfgDir + "/case_study.json");
    const CompiledScenario c = compile_scenario(s);
    for (const Scheme sc : s.schemes)
      audited(run_mechanism(mechanism_for(c, sc, 10.0),
                            substream(root_stream(s.master_seed), "snr:10/rep:0")));
  }
  check(audits >= 16, fmt("only %g timeline audits ran", static_cast<double>(audits)));
}

// --- 7: determinism --------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f.good()) return {};
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void c7() {
  const fs::path dir =
      fs::temp_directory_path() / ("megsim_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string base = "'" + kBin + "' sweep --config '" + kCfgDir +
                           "/case_study_crossover.json' --set repetitions=3"
                           " --from -2 --to 2 --step 2 > /dev/null --out ";
  const fs::path a = dir / "a.csv";
  const fs::path b = dir / "b.csv";
  const fs::path c = dir / "c.csv";
  const auto shell = [&](const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    return rc != -1 && WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
  };
  check(shell(base + "'" + a.string() + "'"), "first sweep invocation failed");
  check(shell(base + "'" + b.string() + "'"), "second sweep invocation failed");
  check(shell(base + "'" + c.string() + "' --parallel 4"), "parallel sweep failed");

  const std::string ca = slurp(a);
  check(!ca.empty() && ca.find('\n') != std::string::npos, "sweep CSV is empty");
  check(ca == slurp(b), "rerun produced different CSV bytes");
  check(ca == slurp(c), "parallel run produced different CSV bytes");
}

}  // namespace

int main() {
  const struct {
    int num;
    const char* title;
    void (*fn)();
  } criteria[] = {
      {1, "transmission latency matches the case-study table (+-0.01 s, <1 s wall)", c1},
      {2, "end-to-end latency matches with compute fixed at 7.58 s (+-0.02 s)", c2},
      {3, "Monte-Carlo BER within 3 sigma; LMMSE end-to-end MSE within 3%", c3},
      {4, "analog/digital distortion crossover on the SNR sweep (<60 s wall)", c4},
      {5, "codec properties: fp16 roundtrip, merge floor, exact top-k pruning", c5},
      {6, "protocol invariants: shared views, five-term latency, fleet ordering", c6},
      {7, "byte-identical sweep CSV across reruns and parallelism", c7},
  };
  for (const auto& c : criteria) {
    g_criterion_ok = true;
    try {
      c.fn();
    } catch (const std::exception& e) {
      check(false, std::string("unexpected exception: ") + e.what());
    }
    std::printf("[%s] criterion %d: %s\n", g_criterion_ok ? "PASS" : "FAIL", c.num,
                c.title);
  }
  if (g_failures == 0)
    std::printf("all %d checks passed\n", g_checks);
  else
    std::printf("%d of %d checks failed\n", g_failures, g_checks);
  return g_failures == 0 ? 0 : 1;
}
