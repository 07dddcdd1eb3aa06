#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "megsim/codec.hpp"

namespace megsim {

/** Versioned JSON form of a fitted analog codec, stable across runs. */
inline nlohmann::json jscc_config_to_json(const JsccCodecConfig& cfg) {
  validate(cfg);
  nlohmann::json j;
  j["version"] = 1;
  j["merge_map"]["original_dim"] = cfg.merge_map.original_dim;
  j["merge_map"]["merged_dim"] = cfg.merge_map.merged_dim;
  j["merge_map"]["assignment"] = cfg.merge_map.assignment;
  j["merge_map"]["group_floor_mse"] = cfg.merge_map.group_floor_mse;
  j["power_norm"]["mean"] = cfg.power_norm.mean;
  j["power_norm"]["scale"] = cfg.power_norm.scale;
  return j;
}

inline JsccCodecConfig jscc_config_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1)
      throw ConfigError("version", "unsupported artifact version");
    JsccCodecConfig cfg;
    const auto& m = j.at("merge_map");
    cfg.merge_map.original_dim = m.at("original_dim").get<std::size_t>();
    cfg.merge_map.merged_dim = m.at("merged_dim").get<std::size_t>();
    cfg.merge_map.assignment = m.at("assignment").get<std::vector<std::uint32_t>>();
    cfg.merge_map.group_floor_mse = m.at("group_floor_mse").get<double>();
    cfg.power_norm.mean = j.at("power_norm").at("mean").get<double>();
    cfg.power_norm.scale = j.at("power_norm").at("scale").get<double>();
    validate(cfg);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("jscc_artifact", e.what());
  }
}

inline void save_jscc_config(const JsccCodecConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open for writing: " + path);
  f << jscc_config_to_json(cfg).dump(2) << '\n';
}

inline JsccCodecConfig load_jscc_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("jscc_artifact", e.what());
  }
  return jscc_config_from_json(j);
}

}  // namespace megsim
