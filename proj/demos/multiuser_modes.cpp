// Runs the three multi-user generation modes over the same four-UE setup and
// prints per-UE completion times, including one UE with a 10x slower uplink.

#include <cstdio>

#include "megsim/protocol.hpp"

int main() {
  megsim::MechanismConfig mech;
  mech.mechanism = megsim::Mechanism::U2E;
  mech.scheme = megsim::Scheme::MEG;
  mech.ul.rate_bps = mech.dl.rate_bps = 1.0e6;
  mech.ul.snr_db = mech.dl.snr_db = 10.0;
  mech.ul_codec = megsim::digital_codec({16, 6.0});
  mech.dl_codec = megsim::digital_codec({16, 6.0});
  mech.pipeline.stages = {{"encoder", 0.2, 1, megsim::TensorRole::seed},
                          {"generator", 0.5, 1, megsim::TensorRole::image}};
  mech.pipeline.split_index = 1;
  mech.pipeline.boundary_shape = {32, 32};
  mech.pipeline.image_shape = {128, 128};

  megsim::MultiUserConfig mu;
  mu.num_ues = 4;
  mu.neighbors = {{0, 1}, {1, 2}, {2, 3}};
  mu.ue_ul_rate_scale = {1.0, 1.0, 0.1, 1.0};  // UE 2 is on a weak link

  const megsim::RngStream stream = megsim::root_stream(42);
  for (megsim::MultiUserMode mode : {megsim::MultiUserMode::Individual,
                                     megsim::MultiUserMode::DecentralizedShared,
                                     megsim::MultiUserMode::CoordinatedFused}) {
    mu.mode = mode;
    const megsim::MultiUserResult r = megsim::run_multiuser(mu, mech, stream);
    std::printf("%-20s aggregate %7.4f s   mean mse %.4g\n",
                std::string(megsim::to_string(mode)).c_str(), r.aggregate_latency_s,
                r.mean_mse);
    for (std::size_t i = 0; i < r.per_ue.size(); ++i)
      std::printf("  ue %zu: t_e2e %7.4f s\n", i, r.per_ue[i].t_e2e_s);
    for (const std::string& f : r.flags) std::printf("  flag: %s\n", f.c_str());
  }
  return 0;
}
