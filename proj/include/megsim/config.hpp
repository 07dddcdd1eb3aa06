#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "megsim/simkit.hpp"

namespace megsim {

namespace cfgdetail {

using nlohmann::json;

inline std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

inline const json& req(const json& obj, const std::string& path, std::string_view key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join(path, key), "missing required key");
  return *it;
}

inline void reject_unknown(const json& obj, const std::string& path,
                           std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(path, "must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (std::string_view a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(join(path, key), "unknown key");
  }
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "must be a number");
  return v.get<double>();
}

inline std::uint64_t as_u64(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError(path, "must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError(path, "must be a string");
  return v.get<std::string>();
}

inline bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError(path, "must be a boolean");
  return v.get<bool>();
}

inline Mechanism parse_mechanism(const json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  if (s == "E2U") return Mechanism::E2U;
  if (s == "U2E") return Mechanism::U2E;
  if (s == "SEU") return Mechanism::SEU;
  if (s == "PEU") return Mechanism::PEU;
  throw ConfigError(path, "must be one of E2U, U2E, SEU, PEU");
}

inline Scheme parse_scheme(const json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  if (s == "Centralized") return Scheme::Centralized;
  if (s == "MEG") return Scheme::MEG;
  if (s == "E2E_MEG") return Scheme::E2E_MEG;
  throw ConfigError(path, "must be one of Centralized, MEG, E2E_MEG");
}

inline TensorRole parse_role(const json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  if (s == "seed") return TensorRole::seed;
  if (s == "sketch") return TensorRole::sketch;
  if (s == "prompt") return TensorRole::prompt;
  if (s == "image") return TensorRole::image;
  throw ConfigError(path, "must be one of seed, sketch, prompt, image");
}

inline MergeStrategy parse_merge_strategy(const json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  if (s == "blocked") return MergeStrategy::blocked;
  if (s == "fitted") return MergeStrategy::fitted;
  throw ConfigError(path, "must be one of blocked, fitted");
}

inline MultiUserMode parse_mu_mode(const json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  if (s == "Individual") return MultiUserMode::Individual;
  if (s == "DecentralizedShared") return MultiUserMode::DecentralizedShared;
  if (s == "CoordinatedFused") return MultiUserMode::CoordinatedFused;
  throw ConfigError(path, "must be one of Individual, DecentralizedShared, CoordinatedFused");
}

inline std::vector<std::size_t> parse_shape(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) throw ConfigError(path, "must be a non-empty array");
  std::vector<std::size_t> shape;
  shape.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    shape.push_back(static_cast<std::size_t>(
        as_u64(v[i], path + "[" + std::to_string(i) + "]")));
  return shape;
}

inline ChannelSpec parse_channel(const json& v, const std::string& path, LinkKind kind) {
  reject_unknown(v, path, {"rate_bps"});
  ChannelSpec ch;
  ch.kind = kind;
  ch.rate_bps = as_number(req(v, path, "rate_bps"), join(path, "rate_bps"));
  return ch;
}

inline PipelineModel parse_pipeline(const json& v, const std::string& path) {
  reject_unknown(v, path, {"stages", "split_index", "boundary_shape", "image_shape"});
  PipelineModel p;
  const json& stages = req(v, path, "stages");
  if (!stages.is_array()) throw ConfigError(join(path, "stages"), "must be an array");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string sp = path + ".stages[" + std::to_string(i) + "]";
    const json& sj = stages[i];
    reject_unknown(sj, sp, {"name", "compute_seconds", "repeat", "output_role"});
    StageSpec st;
    st.name = as_string(req(sj, sp, "name"), join(sp, "name"));
    st.compute_seconds =
        as_number(req(sj, sp, "compute_seconds"), join(sp, "compute_seconds"));
    st.repeat = sj.contains("repeat")
                    ? static_cast<unsigned>(as_u64(sj["repeat"], join(sp, "repeat")))
                    : 1u;
    st.output_role = sj.contains("output_role")
                         ? parse_role(sj["output_role"], join(sp, "output_role"))
                         : TensorRole::seed;
    p.stages.push_back(std::move(st));
  }
  p.split_index = static_cast<std::size_t>(
      as_u64(req(v, path, "split_index"), join(path, "split_index")));
  p.boundary_shape = parse_shape(req(v, path, "boundary_shape"), join(path, "boundary_shape"));
  p.image_shape = parse_shape(req(v, path, "image_shape"), join(path, "image_shape"));
  return p;
}

inline MultiUserConfig parse_multi_user(const json& v, const std::string& path) {
  reject_unknown(v, path,
                 {"mode", "num_ues", "neighbors", "ue_ul_rate_scale", "coordinated_dl"});
  MultiUserConfig mu;
  mu.mode = parse_mu_mode(req(v, path, "mode"), join(path, "mode"));
  mu.num_ues = static_cast<unsigned>(as_u64(req(v, path, "num_ues"), join(path, "num_ues")));
  if (v.contains("neighbors")) {
    const json& edges = v["neighbors"];
    const std::string ep = join(path, "neighbors");
    if (!edges.is_array()) throw ConfigError(ep, "must be an array of [a, b] pairs");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string ip = ep + "[" + std::to_string(i) + "]";
      const json& e = edges[i];
      if (!e.is_array() || e.size() != 2) throw ConfigError(ip, "must be an [a, b] pair");
      mu.neighbors.emplace_back(static_cast<unsigned>(as_u64(e[0], ip + "[0]")),
                                static_cast<unsigned>(as_u64(e[1], ip + "[1]")));
    }
  }
  if (v.contains("ue_ul_rate_scale")) {
    const json& sc = v["ue_ul_rate_scale"];
    const std::string sp = join(path, "ue_ul_rate_scale");
    if (!sc.is_array()) throw ConfigError(sp, "must be an array of numbers");
    for (std::size_t i = 0; i < sc.size(); ++i)
      mu.ue_ul_rate_scale.push_back(as_number(sc[i], sp + "[" + std::to_string(i) + "]"));
  }
  if (v.contains("coordinated_dl"))
    mu.coordinated_dl = as_bool(v["coordinated_dl"], join(path, "coordinated_dl"));
  return mu;
}

}  // namespace cfgdetail

/**
 * Strict scenario parsing: unknown keys are rejected and every error carries
 * the full dotted path of the offending field. snr_db accepts a number or an
 * array; schemes accepts a string or an array.
 */
inline Scenario scenario_from_json(const nlohmann::json& j) {
  using namespace cfgdetail;
  const std::string root;
  if (!j.is_object()) throw ConfigError("config", "must be a JSON object");
  reject_unknown(j, root,
                 {"version", "name", "mechanism", "schemes", "snr_db", "repetitions",
                  "master_seed", "prompt_bits", "gate_alpha", "psnr_peak", "pipeline",
                  "channels", "codecs", "multi_user", "seu_dl_split"});
  if (as_u64(req(j, root, "version"), "version") != 1)
    throw ConfigError("version", "must be 1");

  Scenario s;
  s.name = as_string(req(j, root, "name"), "name");
  s.mechanism = parse_mechanism(req(j, root, "mechanism"), "mechanism");

  const json& schemes = req(j, root, "schemes");
  if (schemes.is_string()) {
    s.schemes.push_back(parse_scheme(schemes, "schemes"));
  } else if (schemes.is_array()) {
    for (std::size_t i = 0; i < schemes.size(); ++i)
      s.schemes.push_back(parse_scheme(schemes[i], "schemes[" + std::to_string(i) + "]"));
  } else {
    throw ConfigError("schemes", "must be a string or an array of strings");
  }

  const json& snr = req(j, root, "snr_db");
  if (snr.is_number()) {
    s.snr_db.push_back(snr.get<double>());
  } else if (snr.is_array()) {
    for (std::size_t i = 0; i < snr.size(); ++i)
      s.snr_db.push_back(as_number(snr[i], "snr_db[" + std::to_string(i) + "]"));
  } else {
    throw ConfigError("snr_db", "must be a number or an array of numbers");
  }

  if (j.contains("repetitions"))
    s.repetitions = static_cast<unsigned>(as_u64(j["repetitions"], "repetitions"));
  if (j.contains("master_seed")) s.master_seed = as_u64(j["master_seed"], "master_seed");
  if (j.contains("prompt_bits")) s.prompt_bits = as_u64(j["prompt_bits"], "prompt_bits");
  if (j.contains("gate_alpha")) s.gate_alpha = as_number(j["gate_alpha"], "gate_alpha");
  if (j.contains("psnr_peak")) s.psnr_peak = as_number(j["psnr_peak"], "psnr_peak");
  if (j.contains("seu_dl_split"))
    s.seu_dl_split = static_cast<std::size_t>(as_u64(j["seu_dl_split"], "seu_dl_split"));

  s.pipeline = parse_pipeline(req(j, root, "pipeline"), "pipeline");

  const json& ch = req(j, root, "channels");
  reject_unknown(ch, "channels", {"ul", "dl", "d2d"});
  s.ul = parse_channel(req(ch, "channels", "ul"), "channels.ul", LinkKind::UL);
  s.dl = parse_channel(req(ch, "channels", "dl"), "channels.dl", LinkKind::DL);
  if (ch.contains("d2d"))
    s.d2d = parse_channel(ch["d2d"], "channels.d2d", LinkKind::D2D);

  if (j.contains("codecs")) {
    const json& codecs = j["codecs"];
    reject_unknown(codecs, "codecs", {"digital", "jscc"});
    if (codecs.contains("digital")) {
      const json& d = codecs["digital"];
      reject_unknown(d, "codecs.digital", {"bits_per_value", "clamp_max"});
      if (d.contains("bits_per_value"))
        s.digital.bits_per_value = static_cast<unsigned>(
            as_u64(d["bits_per_value"], "codecs.digital.bits_per_value"));
      if (d.contains("clamp_max"))
        s.digital.clamp_max = as_number(d["clamp_max"], "codecs.digital.clamp_max");
    }
    if (codecs.contains("jscc")) {
      const json& a = codecs["jscc"];
      reject_unknown(a, "codecs.jscc",
                     {"merged_dim", "merge_strategy", "calibration_tensors",
                      "bits_per_symbol"});
      if (a.contains("merged_dim"))
        s.jscc.merged_dim =
            static_cast<std::size_t>(as_u64(a["merged_dim"], "codecs.jscc.merged_dim"));
      if (a.contains("merge_strategy"))
        s.jscc.merge_strategy =
            parse_merge_strategy(a["merge_strategy"], "codecs.jscc.merge_strategy");
      if (a.contains("calibration_tensors"))
        s.jscc.calibration_tensors = static_cast<unsigned>(
            as_u64(a["calibration_tensors"], "codecs.jscc.calibration_tensors"));
      if (a.contains("bits_per_symbol"))
        s.jscc.bits_per_symbol = static_cast<unsigned>(
            as_u64(a["bits_per_symbol"], "codecs.jscc.bits_per_symbol"));
    }
  }

  if (j.contains("multi_user"))
    s.multi_user = parse_multi_user(j["multi_user"], "multi_user");

  validate(s);
  return s;
}

/** Normalized full form: every effective value explicit, absent optionals omitted. */
inline nlohmann::json scenario_to_json(const Scenario& s) {
  nlohmann::json j;
  j["version"] = 1;
  j["name"] = s.name;
  j["mechanism"] = std::string(to_string(s.mechanism));
  j["schemes"] = nlohmann::json::array();
  for (Scheme sc : s.schemes) j["schemes"].push_back(std::string(to_string(sc)));
  j["snr_db"] = s.snr_db;
  j["repetitions"] = s.repetitions;
  j["master_seed"] = s.master_seed;
  j["prompt_bits"] = s.prompt_bits;
  j["gate_alpha"] = s.gate_alpha;
  j["psnr_peak"] = s.psnr_peak;
  if (s.seu_dl_split) j["seu_dl_split"] = *s.seu_dl_split;
  j["pipeline"]["stages"] = nlohmann::json::array();
  for (const StageSpec& st : s.pipeline.stages) {
    nlohmann::json sj;
    sj["name"] = st.name;
    sj["compute_seconds"] = st.compute_seconds;
    sj["repeat"] = st.repeat;
    sj["output_role"] = std::string(to_string(st.output_role));
    j["pipeline"]["stages"].push_back(std::move(sj));
  }
  j["pipeline"]["split_index"] = s.pipeline.split_index;
  j["pipeline"]["boundary_shape"] = s.pipeline.boundary_shape;
  j["pipeline"]["image_shape"] = s.pipeline.image_shape;
  j["channels"]["ul"]["rate_bps"] = s.ul.rate_bps;
  j["channels"]["dl"]["rate_bps"] = s.dl.rate_bps;
  if (s.d2d) j["channels"]["d2d"]["rate_bps"] = s.d2d->rate_bps;
  j["codecs"]["digital"]["bits_per_value"] = s.digital.bits_per_value;
  j["codecs"]["digital"]["clamp_max"] = s.digital.clamp_max;
  j["codecs"]["jscc"]["merged_dim"] = s.jscc.merged_dim;
  j["codecs"]["jscc"]["merge_strategy"] = std::string(to_string(s.jscc.merge_strategy));
  j["codecs"]["jscc"]["calibration_tensors"] = s.jscc.calibration_tensors;
  j["codecs"]["jscc"]["bits_per_symbol"] = s.jscc.bits_per_symbol;
  if (s.multi_user) {
    const MultiUserConfig& mu = *s.multi_user;
    nlohmann::json m;
    m["mode"] = std::string(to_string(mu.mode));
    m["num_ues"] = mu.num_ues;
    m["neighbors"] = nlohmann::json::array();
    for (const auto& [a, b] : mu.neighbors)
      m["neighbors"].push_back(nlohmann::json::array({a, b}));
    m["ue_ul_rate_scale"] = mu.ue_ul_rate_scale;
    m["coordinated_dl"] = mu.coordinated_dl;
    j["multi_user"] = std::move(m);
  }
  return j;
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config", "cannot open: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return j;
}

inline Scenario load_scenario_file(const std::string& path) {
  return scenario_from_json(load_json_file(path));
}

/**
 * Applies one `key.path=value` override to a config document. The value is
 * parsed as JSON when possible (numbers, arrays, booleans) and treated as a
 * string otherwise. Intermediate objects are created as needed; strict
 * parsing afterwards still rejects unknown paths.
 */
inline void apply_override(nlohmann::json& doc, std::string_view setting) {
  const std::size_t eq = setting.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("--set", "expected key.path=value, got: " + std::string(setting));
  const std::string_view path = setting.substr(0, eq);
  const std::string_view raw = setting.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = std::string(raw);

  nlohmann::json* cur = &doc;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = path.find('.', start);
    const std::string key(path.substr(start, dot == std::string_view::npos
                                                 ? std::string_view::npos
                                                 : dot - start));
    if (key.empty())
      throw ConfigError("--set", "empty path segment in: " + std::string(setting));
    if (dot == std::string_view::npos) {
      (*cur)[key] = std::move(value);
      return;
    }
    if (!cur->contains(key) || !(*cur)[key].is_object()) (*cur)[key] = nlohmann::json::object();
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

}  // namespace megsim
