// Reproduces the reference latency table: raw-image offloading vs digital
// feature transport vs merged analog transport on a 1 Mbps link.

#include <cstdio>

#include "megsim/simkit.hpp"

int main() {
  megsim::Scenario s;
  s.name = "latency_demo";
  s.mechanism = megsim::Mechanism::E2U;
  s.schemes = {megsim::Scheme::Centralized, megsim::Scheme::MEG, megsim::Scheme::E2E_MEG};
  s.snr_db = {10.0};
  s.repetitions = 1;
  s.master_seed = 7;
  s.pipeline = megsim::case_study_pipeline();
  s.ul.rate_bps = s.dl.rate_bps = 1.0e6;
  s.digital.clamp_max = 6.0;
  s.jscc.merged_dim = 36250;

  for (const megsim::SchemeSnrAggregate& g : megsim::compare_schemes(s)) {
    std::printf("%-12s t_tx %9.4f s   t_compute %5.2f s   t_e2e %9.4f s   mse %.4g\n",
                std::string(megsim::to_string(g.scheme)).c_str(), g.mean_t_tx_s,
                g.mean_t_compute_s, g.mean_t_e2e_s, g.mean_mse);
  }
  return 0;
}
