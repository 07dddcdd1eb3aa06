// megsim: scenario runner for split generative pipelines over noisy links.
// Subcommands: run (scenario as configured), sweep (SNR grid + optional JSON
// summary), compare (per-scheme aggregate table). Exit codes: 0 success,
// 2 config error, 3 runtime error; errors go to stderr as one JSON object.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "megsim/config.hpp"
#include "megsim/simkit.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  unsigned parallel = 1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "scenario config JSON")->required();
  cmd->add_option("--out", o.out_path, "output CSV path (default: $MEGSIM_OUT_DIR)");
  cmd->add_option("--set", o.sets, "config override key.path=value (repeatable)");
  cmd->add_option("--seed", o.seed, "master seed override");
  cmd->add_option("--parallel", o.parallel, "worker threads (default 1)")
      ->check(CLI::PositiveNumber);
}

std::string default_out_dir() {
  const char* dir = std::getenv("MEGSIM_OUT_DIR");
  return dir && *dir ? dir : ".";
}

std::string resolve_out(const CommonOpts& o, const std::string& scenario_name,
                        const char* cmd) {
  if (!o.out_path.empty()) return o.out_path;
  return default_out_dir() + "/" + scenario_name + "_" + cmd + ".csv";
}

megsim::Scenario load_scenario(const CommonOpts& o) {
  nlohmann::json doc = megsim::load_json_file(o.config_path);
  for (const std::string& s : o.sets) megsim::apply_override(doc, s);
  megsim::Scenario sc = megsim::scenario_from_json(doc);
  if (o.seed) sc.master_seed = *o.seed;
  return sc;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw megsim::Error("cannot open for writing: " + path);
  f << content;
  if (!f) throw megsim::Error("short write: " + path);
}

int cmd_run(const CommonOpts& o) {
  const megsim::Scenario sc = load_scenario(o);
  const std::vector<megsim::RunRecord> records = megsim::run_scenario(sc, o.parallel);
  std::ostringstream csv;
  megsim::write_csv(csv, records);
  const std::string out = resolve_out(o, sc.name, "run");
  write_file(out, csv.str());
  std::cout << "wrote " << out << " (" << records.size() << " records)\n";
  return 0;
}

int cmd_sweep(const CommonOpts& o, double from_db, double to_db, double step_db,
              const std::string& summary_path) {
  const megsim::Scenario sc = load_scenario(o);
  const std::vector<megsim::RunRecord> records =
      megsim::sweep_snr(sc, from_db, to_db, step_db, o.parallel);
  std::ostringstream csv;
  megsim::write_csv(csv, records);
  const std::string out = resolve_out(o, sc.name, "sweep");
  write_file(out, csv.str());
  std::cout << "wrote " << out << " (" << records.size() << " records)\n";

  if (!summary_path.empty()) {
    const std::vector<megsim::SchemeSnrAggregate> table =
        megsim::aggregate_records(records);
    nlohmann::json summary;
    summary["scenario"] = sc.name;
    summary["from_db"] = from_db;
    summary["to_db"] = to_db;
    summary["step_db"] = step_db;
    nlohmann::json curves = nlohmann::json::object();
    for (const megsim::SchemeSnrAggregate& g : table) {
      nlohmann::json& c = curves[std::string(megsim::to_string(g.scheme))];
      if (c.is_null()) {
        c["snr_db"] = nlohmann::json::array();
        c["mean_mse"] = nlohmann::json::array();
        c["mean_psnr_db"] = nlohmann::json::array();
        c["mean_t_e2e_s"] = nlohmann::json::array();
      }
      c["snr_db"].push_back(g.snr_db);
      c["mean_mse"].push_back(g.mean_mse);
      c["mean_psnr_db"].push_back(g.mean_psnr_db);
      c["mean_t_e2e_s"].push_back(g.mean_t_e2e_s);
    }
    summary["schemes"] = std::move(curves);
    const std::optional<double> cross = megsim::crossover_snr(table);
    summary["crossover_snr_db"] = cross ? nlohmann::json(*cross) : nlohmann::json(nullptr);
    write_file(summary_path, summary.dump(2) + "\n");
    std::cout << "wrote " << summary_path << "\n";
  }
  return 0;
}

int cmd_compare(const CommonOpts& o) {
  const megsim::Scenario sc = load_scenario(o);
  const std::vector<megsim::SchemeSnrAggregate> table =
      megsim::compare_schemes(sc, o.parallel);
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %8s %12s %14s %12s %12s %12s", "scheme",
                "snr_db", "t_tx_s", "t_compute_s", "t_e2e_s", "mse", "psnr_db");
  std::cout << line << "\n";
  for (const megsim::SchemeSnrAggregate& g : table) {
    std::snprintf(line, sizeof(line), "%-12s %8.6g %12.6g %14.6g %12.6g %12.6g %12.6g",
                  std::string(megsim::to_string(g.scheme)).c_str(), g.snr_db,
                  g.mean_t_tx_s, g.mean_t_compute_s, g.mean_t_e2e_s, g.mean_mse,
                  g.mean_psnr_db);
    std::cout << line << "\n";
  }
  std::ostringstream csv;
  megsim::write_aggregate_csv(csv, table);
  const std::string out = resolve_out(o, sc.name, "compare");
  write_file(out, csv.str());
  std::cout << "wrote " << out << "\n";
  return 0;
}

void report_error(const char* kind, const std::string& path, const std::string& message) {
  nlohmann::json e;
  e["error"] = kind;
  if (!path.empty()) e["path"] = path;
  e["message"] = message;
  std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"megsim: split generative pipeline link simulator"};
  app.require_subcommand(1);

  CommonOpts opts;
  double from_db = 0.0, to_db = 0.0, step_db = 1.0;
  std::string summary_path;

  CLI::App* run = app.add_subcommand("run", "run the scenario as configured");
  add_common(run, opts);
  CLI::App* sweep = app.add_subcommand("sweep", "run over an inclusive SNR grid");
  add_common(sweep, opts);
  sweep->add_option("--from", from_db, "grid start, dB")->required();
  sweep->add_option("--to", to_db, "grid end, dB")->required();
  sweep->add_option("--step", step_db, "grid step, dB")->required();
  sweep->add_option("--summary", summary_path, "also write a JSON summary here");
  CLI::App* compare = app.add_subcommand("compare", "aggregate schemes side by side");
  add_common(compare, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    report_error("config", "", e.what());
    return 2;
  }

  try {
    if (app.got_subcommand(run)) return cmd_run(opts);
    if (app.got_subcommand(sweep)) return cmd_sweep(opts, from_db, to_db, step_db, summary_path);
    return cmd_compare(opts);
  } catch (const megsim::ConfigError& e) {
    report_error("config", e.path(), e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error("runtime", "", e.what());
    return 3;
  }
}
